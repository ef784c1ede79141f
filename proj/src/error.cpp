#include "kgc/error.hpp"

namespace kgc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingEntityMetadata: return "MissingEntityMetadata";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::UnknownEntity: return "UnknownEntity";
    case ErrorCode::SplitInfeasible: return "SplitInfeasible";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::MisalignedScoreSets: return "MisalignedScoreSets";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::UnsupportedRouterKind: return "UnsupportedRouterKind";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::NoSameTypeNeighbor: return "NoSameTypeNeighbor";
    case ErrorCode::MissingVector: return "MissingVector";
    case ErrorCode::StageFailure: return "StageFailure";
    case ErrorCode::HashMismatch: return "HashMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace kgc

#pragma once

#include <cstdint>
#include <filesystem>

#include "kgc/kg.hpp"

namespace kgc {

/// Typed random KG with cluster structure: relation r links head-type
/// entities of cluster c to tail-type entities of cluster (c + r) mod C
/// with probability `signal`, otherwise to a random tail-type entity.
struct SyntheticSpec {
  std::size_t entities = 60;
  std::size_t types = 3;
  std::size_t relations = 4;
  std::size_t triples = 200;
  std::size_t clusters = 4;
  double signal = 0.9;
  /// Fraction of entities with a description.
  double described = 0.6;
};

KnowledgeGraph make_synthetic_kg(const SyntheticSpec& spec, std::uint64_t seed);

/// Writes `entities.tsv` (key, type, name, description) and `triples.tsv`.
void write_kg_files(const std::filesystem::path& dir, const KnowledgeGraph& kg);

}  // namespace kgc

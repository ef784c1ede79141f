#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kgc/io.hpp"
#include "kgc/splits.hpp"

namespace kgc {

struct QueryScores {
  std::size_t triple_index = 0;
  Side side = Side::Head;
  double positive = 0;
  /// Scores of the fixed negatives, in NegativeSets order.
  std::vector<double> negatives;
};

/// One scoring model's scores for every query of one evaluation part.
/// Query q covers triple q / 2, head side when q is even.
struct ScoreSet {
  std::string model_name;
  std::string negatives_hash;
  std::vector<QueryScores> queries;
};

/// Empty ScoreSet shaped like `negs` (all scores zero).
ScoreSet make_score_skeleton(const NegativeSets& negs, std::string model_name, std::string negatives_hash);

/// Throws MisalignedScoreSets unless both sets have the same query order
/// and candidate counts, and bind to the same negatives manifest.
void check_aligned(const ScoreSet& a, const ScoreSet& b);
void check_aligned(const ScoreSet& scores, const NegativeSets& negs);

/// TSV `query_index \t side \t candidate_rank_position \t is_positive \t score`
/// where position 0 is the positive and 1..n follow NegativeSets order;
/// query_index is the evaluation triple's index. The manifest binds the file
/// to a NegativeSets manifest hash.
io::Json save_score_set(const std::filesystem::path& dir, const std::string& stem, const ScoreSet& scores);

/// Loads and verifies a ScoreSet. Throws HashMismatch when its data hash is
/// stale or when `expected_negatives_hash` is non-empty and differs from
/// the manifest's binding.
ScoreSet load_score_set(const std::filesystem::path& dir, const std::string& stem,
                        const std::string& expected_negatives_hash = {});

}  // namespace kgc

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgc/io.hpp"
#include "kgc/kg.hpp"
#include "kgc/scoreset.hpp"

namespace kgc {

struct Metrics {
  double mrr = 0;
  double hits3 = 0;
  double hits10 = 0;
  std::size_t n_queries = 0;
  /// Queries left out because their negative pool was empty.
  std::size_t n_excluded = 0;
};

/// Pessimistic ties: 1 + #{neg > pos} + #{neg == pos}.
std::size_t rank_of_positive(double positive, std::span<const double> negatives);

/// Per-query ranks; nullopt for queries without negatives. Parallel over
/// queries; the serial routine is the reference it is tested against.
std::vector<std::optional<std::size_t>> compute_ranks(const ScoreSet& scores);
std::vector<std::optional<std::size_t>> compute_ranks_serial(const ScoreSet& scores);

/// Pairwise summation, so the result does not depend on thread count.
double pairwise_sum(std::span<const double> values);

Metrics metrics_from_ranks(std::span<const std::optional<std::size_t>> ranks);
Metrics compute_metrics(const NegativeSets& negs, const ScoreSet& scores);

std::map<std::string, Metrics> per_relation_breakdown(const NegativeSets& negs, const ScoreSet& scores,
                                                      const KnowledgeGraph& kg);

/// Buckets "none", "one", "both" by how many endpoints of the positive
/// carry a description. Empty buckets are omitted.
std::map<std::string, Metrics> description_breakdown(const NegativeSets& negs, const ScoreSet& scores,
                                                     const KnowledgeGraph& kg);

struct Comparison {
  double a_better = 0;
  double b_better = 0;
  double tie = 0;
  std::size_t n_queries = 0;
};
/// Per-query rank comparison over queries with a non-empty pool.
Comparison compare_models(const ScoreSet& a, const ScoreSet& b);

io::Json to_json(const Metrics& m);
Metrics metrics_from_json(const io::Json& j);

/// Aligned-column table; metrics printed on the x100 scale.
std::string format_metrics_table(const std::vector<std::pair<std::string, Metrics>>& rows);

}  // namespace kgc

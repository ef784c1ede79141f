#include "kgc/evaluate.hpp"

#include <algorithm>
#include <cstdint>

#include <fmt/format.h>

#include "kgc/error.hpp"

namespace kgc {

std::size_t rank_of_positive(double positive, std::span<const double> negatives) {
  std::size_t rank = 1;
  for (double s : negatives) rank += s >= positive;
  return rank;
}

std::vector<std::optional<std::size_t>> compute_ranks_serial(const ScoreSet& scores) {
  std::vector<std::optional<std::size_t>> ranks(scores.queries.size());
  for (std::size_t q = 0; q < scores.queries.size(); ++q) {
    const auto& query = scores.queries[q];
    if (!query.negatives.empty()) ranks[q] = rank_of_positive(query.positive, query.negatives);
  }
  return ranks;
}

std::vector<std::optional<std::size_t>> compute_ranks(const ScoreSet& scores) {
  std::vector<std::optional<std::size_t>> ranks(scores.queries.size());
  const auto n = static_cast<std::int64_t>(scores.queries.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t q = 0; q < n; ++q) {
    const auto& query = scores.queries[q];
    if (!query.negatives.empty()) ranks[q] = rank_of_positive(query.positive, query.negatives);
  }
  return ranks;
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

Metrics metrics_from_ranks(std::span<const std::optional<std::size_t>> ranks) {
  std::vector<double> reciprocal;
  std::vector<double> h3;
  std::vector<double> h10;
  Metrics m;
  for (const auto& r : ranks) {
    if (!r) {
      ++m.n_excluded;
      continue;
    }
    reciprocal.push_back(1.0 / static_cast<double>(*r));
    h3.push_back(*r <= 3 ? 1.0 : 0.0);
    h10.push_back(*r <= 10 ? 1.0 : 0.0);
  }
  m.n_queries = reciprocal.size();
  if (m.n_queries > 0) {
    const auto n = static_cast<double>(m.n_queries);
    m.mrr = pairwise_sum(reciprocal) / n;
    m.hits3 = pairwise_sum(h3) / n;
    m.hits10 = pairwise_sum(h10) / n;
  }
  return m;
}

Metrics compute_metrics(const NegativeSets& negs, const ScoreSet& scores) {
  check_aligned(scores, negs);
  return metrics_from_ranks(compute_ranks(scores));
}

namespace {

template <typename KeyFn>
std::map<std::string, Metrics> breakdown(const NegativeSets& negs, const ScoreSet& scores, KeyFn key_of) {
  check_aligned(scores, negs);
  const auto ranks = compute_ranks(scores);
  std::map<std::string, std::vector<std::optional<std::size_t>>> cells;
  for (std::size_t q = 0; q < ranks.size(); ++q) cells[key_of(negs.triples[q / 2])].push_back(ranks[q]);
  std::map<std::string, Metrics> out;
  for (const auto& [key, cell] : cells) {
    Metrics m = metrics_from_ranks(cell);
    if (m.n_queries > 0) out.emplace(key, m);
  }
  return out;
}

}  // namespace

std::map<std::string, Metrics> per_relation_breakdown(const NegativeSets& negs, const ScoreSet& scores,
                                                      const KnowledgeGraph& kg) {
  return breakdown(negs, scores, [&](const Triple& t) { return kg.relations()[t.rel]; });
}

std::map<std::string, Metrics> description_breakdown(const NegativeSets& negs, const ScoreSet& scores,
                                                     const KnowledgeGraph& kg) {
  return breakdown(negs, scores, [&](const Triple& t) -> std::string {
    const int described =
        static_cast<int>(kg.entity(t.head).description.has_value()) + static_cast<int>(kg.entity(t.tail).description.has_value());
    return described == 0 ? "none" : described == 1 ? "one" : "both";
  });
}

Comparison compare_models(const ScoreSet& a, const ScoreSet& b) {
  check_aligned(a, b);
  const auto ra = compute_ranks(a);
  const auto rb = compute_ranks(b);
  std::size_t a_better = 0;
  std::size_t b_better = 0;
  std::size_t ties = 0;
  for (std::size_t q = 0; q < ra.size(); ++q) {
    if (!ra[q]) continue;
    if (*ra[q] < *rb[q]) {
      ++a_better;
    } else if (*rb[q] < *ra[q]) {
      ++b_better;
    } else {
      ++ties;
    }
  }
  Comparison c;
  c.n_queries = a_better + b_better + ties;
  if (c.n_queries > 0) {
    const auto n = static_cast<double>(c.n_queries);
    c.a_better = static_cast<double>(a_better) / n;
    c.b_better = static_cast<double>(b_better) / n;
    c.tie = static_cast<double>(ties) / n;
  }
  return c;
}

io::Json to_json(const Metrics& m) {
  return {{"mrr", m.mrr}, {"hits3", m.hits3}, {"hits10", m.hits10}, {"n_queries", m.n_queries},
          {"n_excluded", m.n_excluded}};
}

Metrics metrics_from_json(const io::Json& j) {
  Metrics m;
  m.mrr = j.at("mrr").get<double>();
  m.hits3 = j.at("hits3").get<double>();
  m.hits10 = j.at("hits10").get<double>();
  m.n_queries = j.at("n_queries").get<std::size_t>();
  m.n_excluded = j.at("n_excluded").get<std::size_t>();
  return m;
}

std::string format_metrics_table(const std::vector<std::pair<std::string, Metrics>>& rows) {
  std::size_t width = 5;
  for (const auto& [name, m] : rows) width = std::max(width, name.size());
  std::string out = fmt::format("{:<{}}  {:>7}  {:>7}  {:>7}  {:>9}  {:>8}\n", "model", width, "MRR", "H@3", "H@10",
                                "queries", "excluded");
  for (const auto& [name, m] : rows) {
    out += fmt::format("{:<{}}  {:>7.1f}  {:>7.1f}  {:>7.1f}  {:>9}  {:>8}\n", name, width, 100 * m.mrr, 100 * m.hits3,
                       100 * m.hits10, m.n_queries, m.n_excluded);
  }
  return out;
}

}  // namespace kgc

#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "../support.hpp"
#include "kgc/error.hpp"
#include "kgc/evaluate.hpp"

using namespace kgc;

namespace {

// Sort-based rank: position of the positive after sorting all candidates by
// descending score with the positive placed after every tied negative.
std::size_t sorted_rank(double pos, const std::vector<double>& negs) {
  std::vector<std::pair<double, int>> all;  // (score, is_positive)
  all.emplace_back(pos, 1);
  for (double n : negs) all.emplace_back(n, 0);
  std::sort(all.begin(), all.end(), [](auto a, auto b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i].second == 1) return i + 1;
  }
  return 0;
}

ScoreSet from_ranks_like(const std::vector<std::size_t>& ranks, std::size_t candidates) {
  // Positive scored 0; the first rank-1 negatives score 1, the rest -1.
  ScoreSet s;
  s.model_name = "m";
  for (std::size_t q = 0; q < ranks.size(); ++q) {
    QueryScores qs;
    qs.triple_index = q / 2;
    qs.side = static_cast<Side>(q % 2);
    for (std::size_t j = 0; j < candidates; ++j) qs.negatives.push_back(j + 1 < ranks[q] ? 1.0 : -1.0);
    s.queries.push_back(qs);
  }
  return s;
}

NegativeSets shaped_negatives(const ScoreSet& s) {
  NegativeSets negs;
  negs.triples.resize(s.queries.size() / 2);
  negs.head_negatives.resize(negs.triples.size());
  negs.tail_negatives.resize(negs.triples.size());
  for (std::size_t q = 0; q < s.queries.size(); ++q) {
    auto& list = q % 2 == 0 ? negs.head_negatives[q / 2] : negs.tail_negatives[q / 2];
    list.assign(s.queries[q].negatives.size(), 0);
  }
  return negs;
}

}  // namespace

TEST_CASE("rank_of_positive examples") {
  CHECK(rank_of_positive(1.0, std::vector<double>{0.1, 0.2}) == 1);
  CHECK(rank_of_positive(0.5, std::vector<double>{0.9, 0.5, 0.1}) == 3);
  const std::vector<double> constant(7, 0.3);
  CHECK(rank_of_positive(0.3, constant) == 8);
  CHECK(metrics_from_ranks(std::vector<std::optional<std::size_t>>{8, 8, 8}).mrr == doctest::Approx(1.0 / 8));
}

TEST_CASE("metrics from ranks [1, 2, 4]") {
  const std::vector<std::optional<std::size_t>> ranks = {1, 2, 4};
  const Metrics m = metrics_from_ranks(ranks);
  CHECK(m.mrr == doctest::Approx(0.58333).epsilon(1e-5));
  CHECK(m.mrr == doctest::Approx(1.75 / 3));
  CHECK(m.hits3 == doctest::Approx(2.0 / 3));
  CHECK(m.hits10 == 1.0);
  CHECK(m.n_queries == 3);
  const Metrics ones = metrics_from_ranks(std::vector<std::optional<std::size_t>>{1, 1, 1, 1});
  CHECK(ones.mrr == 1.0);
  CHECK(ones.hits3 == 1.0);
  CHECK(ones.hits10 == 1.0);
}

TEST_CASE("queries without negatives are excluded and counted") {
  const Metrics m = metrics_from_ranks(std::vector<std::optional<std::size_t>>{1, std::nullopt, 2});
  CHECK(m.n_queries == 2);
  CHECK(m.n_excluded == 1);
  CHECK(m.mrr == doctest::Approx(0.75));
}

TEST_CASE("ranks and metrics agree with a sort-based oracle") {
  Rng rng(5);
  for (int instance = 0; instance < 300; ++instance) {
    const std::size_t nq = 1 + rng.uniform_index(10);
    const std::size_t nc = 1 + rng.uniform_index(10);
    const ScoreSet s = test::random_score_set(nq, nc, rng, 1 + static_cast<int>(rng.uniform_index(6)));
    const auto ranks = compute_ranks(s);
    std::size_t h3 = 0, h10 = 0;
    long long numer = 0;
    const long long lcm = 27720;  // lcm(1..11)
    for (std::size_t q = 0; q < nq; ++q) {
      const std::size_t r = sorted_rank(s.queries[q].positive, s.queries[q].negatives);
      REQUIRE(ranks[q].has_value());
      CHECK(*ranks[q] == r);
      h3 += r <= 3;
      h10 += r <= 10;
      numer += lcm / static_cast<long long>(r);
    }
    const Metrics m = metrics_from_ranks(ranks);
    CHECK(m.hits3 == static_cast<double>(h3) / nq);
    CHECK(m.hits10 == static_cast<double>(h10) / nq);
    CHECK(std::abs(m.mrr - static_cast<double>(numer) / (lcm * static_cast<double>(nq))) <= 1e-15);
    CHECK(m.hits3 <= m.hits10);
  }
}

TEST_CASE("rank is monotone in the positive score and invariant to candidate order") {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> negs(8);
    for (double& x : negs) x = rng.uniform(-1, 1);
    const double pos = rng.uniform(-1, 1);
    CHECK(rank_of_positive(pos + 0.1, negs) <= rank_of_positive(pos, negs));
    const std::size_t r = rank_of_positive(pos, negs);
    rng.shuffle(std::span(negs));
    CHECK(rank_of_positive(pos, negs) == r);
  }
}

TEST_CASE("parallel and serial ranks agree; pairwise sum") {
  Rng rng(12);
  const ScoreSet s = test::random_score_set(501, 40, rng, 10);
  CHECK(compute_ranks(s) == compute_ranks_serial(s));
  std::vector<double> v(1000, 0.1);
  CHECK(pairwise_sum(v) == doctest::Approx(100.0).epsilon(1e-14));
  CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
}

TEST_CASE("per-relation and description breakdowns") {
  // Four triples: two per relation, descriptions on e0 and e1 only.
  auto kg = test::make_kg({{"e0", "t", "a", "described"}, {"e1", "t", "b", "described"}, {"e2", "t", "c", ""},
                           {"e3", "t", "d", ""}},
                          {{"e0", "r", "e1"}, {"e0", "r", "e2"}, {"e2", "s", "e3"}, {"e1", "s", "e3"}});
  NegativeSets negs;
  negs.triples = kg.triples();
  negs.head_negatives.assign(4, {0});
  negs.tail_negatives.assign(4, {0});
  // Ranks per query (head, tail) for triples 0..3.
  const std::vector<std::size_t> ranks = {1, 2, 2, 2, 1, 1, 2, 1};
  ScoreSet s = from_ranks_like(ranks, 1);
  const auto rel = per_relation_breakdown(negs, s, kg);
  REQUIRE(rel.size() == 2);
  CHECK(rel.at("r").mrr == doctest::Approx((1 + 0.5 + 0.5 + 0.5) / 4));
  CHECK(rel.at("s").mrr == doctest::Approx((1 + 1 + 0.5 + 1) / 4));
  const auto desc = description_breakdown(negs, s, kg);
  // Triple 0: both described; 1 and 3: one; 2: none.
  CHECK(desc.at("both").n_queries == 2);
  CHECK(desc.at("one").n_queries == 4);
  CHECK(desc.at("none").n_queries == 2);
  CHECK(desc.at("none").mrr == doctest::Approx(1.0));
  // Count-weighted reaggregation equals the overall MRR.
  const Metrics all = compute_metrics(negs, s);
  for (const auto* cells : {&rel, &desc}) {
    double acc = 0;
    std::size_t n = 0;
    for (const auto& [k, m] : *cells) {
      acc += m.mrr * m.n_queries;
      n += m.n_queries;
    }
    CHECK(n == all.n_queries);
    CHECK(std::abs(acc / n - all.mrr) < 1e-12);
  }
}

TEST_CASE("single-relation and fully described graphs give one cell") {
  auto kg = test::make_kg({{"e0", "t", "a", "x"}, {"e1", "t", "b", "y"}, {"e2", "t", "c", "z"}},
                          {{"e0", "r", "e1"}, {"e1", "r", "e2"}});
  NegativeSets negs;
  negs.triples = kg.triples();
  negs.head_negatives.assign(2, {0, 0});
  negs.tail_negatives.assign(2, {0, 0});
  const ScoreSet s = from_ranks_like({1, 3, 2, 1}, 2);
  const Metrics all = compute_metrics(negs, s);
  const auto rel = per_relation_breakdown(negs, s, kg);
  const auto desc = description_breakdown(negs, s, kg);
  REQUIRE(rel.size() == 1);
  REQUIRE(desc.size() == 1);
  CHECK(rel.begin()->second.mrr == all.mrr);
  CHECK(desc.at("both").mrr == all.mrr);
}

TEST_CASE("compare_models") {
  const ScoreSet a = from_ranks_like({1, 2, 1, 3, 1, 2, 2, 2, 2, 2}, 4);
  const ScoreSet b = from_ranks_like({2, 1, 2, 1, 2, 1, 1, 1, 1, 1}, 4);
  const Comparison c = compare_models(a, b);
  CHECK(c.a_better == doctest::Approx(0.3));
  CHECK(c.b_better == doctest::Approx(0.7));
  CHECK(c.tie == 0.0);
  const Comparison same = compare_models(a, a);
  CHECK(same.tie == 1.0);
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const ScoreSet x = test::random_score_set(20, 5, rng), y = test::random_score_set(20, 5, rng);
    const Comparison r = compare_models(x, y);
    CHECK(std::abs(r.a_better + r.b_better + r.tie - 1.0) < 1e-12);
  }
}

TEST_CASE("misaligned score sets are refused") {
  Rng rng(1);
  const ScoreSet a = test::random_score_set(4, 3, rng);
  ScoreSet b = test::random_score_set(4, 2, rng);
  CHECK_THROWS_AS(compare_models(a, b), Error);
  NegativeSets negs = shaped_negatives(a);
  CHECK_NOTHROW(compute_metrics(negs, a));
  try {
    compute_metrics(negs, b);
    FAIL("expected MisalignedScoreSets");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MisalignedScoreSets);
  }
}

TEST_CASE("metrics JSON and table") {
  const Metrics m = metrics_from_ranks(std::vector<std::optional<std::size_t>>{1, 2, 4});
  const Metrics back = metrics_from_json(to_json(m));
  CHECK(back.mrr == m.mrr);
  CHECK(back.n_queries == 3);
  const std::string table = format_metrics_table({{"complex", m}});
  CHECK(table.find("58.3") != std::string::npos);
  CHECK(table.find("complex") != std::string::npos);
}

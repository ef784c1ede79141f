#include <doctest.h>

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <set>

#include "../oracles.hpp"
#include "../support.hpp"
#include "kgc/error.hpp"
#include "kgc/evaluate.hpp"
#include "kgc/kge.hpp"
#include "kgc/synthetic.hpp"

using namespace kgc;

namespace {

KgeConfig small_config(KgeKind kind, std::size_t dim) {
  KgeConfig c;
  c.kind = kind;
  c.dim = dim;
  return c;
}

// Direct complex-number evaluation of Re(<h, r, conj(t)>).
double complex_oracle(std::span<const double> h, std::span<const double> r, std::span<const double> t,
                      std::size_t dim) {
  std::complex<double> s = 0;
  for (std::size_t i = 0; i < dim; ++i) {
    s += std::complex<double>(h[i], h[dim + i]) * std::complex<double>(r[i], r[dim + i]) *
         std::conj(std::complex<double>(t[i], t[dim + i]));
  }
  return s.real();
}

double rotate_oracle(std::span<const double> h, std::span<const double> r, std::span<const double> t,
                     std::size_t dim) {
  double sq = 0;
  for (std::size_t i = 0; i < dim; ++i) {
    const auto d = std::complex<double>(h[i], h[dim + i]) * std::polar(1.0, r[i]) -
                   std::complex<double>(t[i], t[dim + i]);
    sq += std::norm(d);
  }
  return -std::sqrt(sq);
}

}  // namespace

TEST_CASE("score examples") {
  {
    KgeModel m(small_config(KgeKind::DistMult, 4), 2, 1);
    CHECK(m.score({0, 0, 1}) == 0.0);
  }
  {
    KgeModel m(small_config(KgeKind::TransE, 3), 2, 1);
    const std::vector<double> h = {0.5, -1, 2}, r = {0.25, 3, -1};
    for (int i = 0; i < 3; ++i) {
      m.entity(0)[i] = h[i];
      m.relation(0)[i] = r[i];
      m.entity(1)[i] = h[i] + r[i];
    }
    CHECK(m.score({0, 0, 1}) == 0.0);
    CHECK(m.score({1, 0, 0}) < 0.0);
  }
  {
    KgeModel m(small_config(KgeKind::ComplEx, 1), 2, 1);
    m.entity(0)[0] = 1;
    m.entity(1)[0] = 1;
    m.relation(0)[0] = 1;
    CHECK(m.score({0, 0, 1}) == 1.0);
  }
}

TEST_CASE("ComplEx and RotatE agree with std::complex arithmetic") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t dim = 1 + rng.uniform_index(6);
    std::vector<double> h(2 * dim), r(2 * dim), t(2 * dim);
    for (auto* v : {&h, &r, &t}) {
      for (auto& x : *v) x = rng.uniform(-2, 2);
    }
    CHECK(score_rows(KgeKind::ComplEx, dim, h, r, t) == doctest::Approx(complex_oracle(h, r, t, dim)).epsilon(1e-12));
    CHECK(score_rows(KgeKind::RotatE, dim, h, r, t) == doctest::Approx(rotate_oracle(h, r, t, dim)).epsilon(1e-12));
  }
}

TEST_CASE("DistMult is symmetric, ComplEx is not") {
  Rng rng(5);
  for (KgeKind kind : {KgeKind::DistMult, KgeKind::ComplEx}) {
    KgeModel m(small_config(kind, 5), 2, 1);
    for (auto& x : m.entity_table()) x = rng.uniform(-1, 1);
    for (auto& x : m.relation_table()) x = rng.uniform(-1, 1);
    const double ab = m.score({0, 0, 1}), ba = m.score({1, 0, 0});
    if (kind == KgeKind::DistMult) {
      CHECK(ab == doctest::Approx(ba).epsilon(1e-14));
    } else {
      CHECK(std::abs(ab - ba) > 1e-6);
    }
  }
}

TEST_CASE("RotatE rotation preserves modulus") {
  // Rotating h onto t gives score 0 for any phases.
  Rng rng(8);
  const std::size_t dim = 4;
  KgeModel m(small_config(KgeKind::RotatE, dim), 2, 1);
  for (std::size_t i = 0; i < dim; ++i) {
    const std::complex<double> h(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double phase = rng.uniform(0, 2 * std::numbers::pi);
    const auto t = h * std::polar(1.0, phase);
    m.entity(0)[i] = h.real();
    m.entity(0)[dim + i] = h.imag();
    m.entity(1)[i] = t.real();
    m.entity(1)[dim + i] = t.imag();
    m.relation(0)[i] = phase;
  }
  CHECK(m.score({0, 0, 1}) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("rank_loss examples") {
  CHECK(rank_loss(0.0, std::vector<double>{0.0}, 1.0) == 1.0);
  CHECK(rank_loss(5.0, std::vector<double>{1.0, 2.0}, 1.0) == 0.0);
  CHECK(rank_loss(1.0, std::vector<double>{0.9, 0.0, 0.0}, 1.0) == doctest::Approx((0.9 + 0.0 + 0.0) / 3));
  CHECK(rank_loss(0.2, std::vector<double>{0.5, 0.1, 0.3}, 1.0) == doctest::Approx((1.3 + 0.9 + 1.1) / 3));
  CHECK_THROWS_AS(rank_loss(0.0, std::vector<double>{}, 1.0), Error);
}

TEST_CASE("rank_loss is non-negative and zero once every margin holds") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> negs(1 + rng.uniform_index(6));
    for (auto& x : negs) x = rng.uniform(-3, 3);
    const double pos = rng.uniform(-3, 3);
    CHECK(rank_loss(pos, negs, 1.0) >= 0.0);
    CHECK(rank_loss(*std::max_element(negs.begin(), negs.end()) + 1.0, negs, 1.0) == 0.0);
  }
}

TEST_CASE("analytic gradients match central differences") {
  for (KgeKind kind : {KgeKind::TransE, KgeKind::DistMult, KgeKind::ComplEx, KgeKind::RotatE}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      for (double l3 : {0.0, 0.05}) {
        const auto res = test::gradient_check(kind, 1 + seed % 4, l3, seed * 7 + 1);
        INFO(to_string(kind), " seed ", seed, " l3 ", l3);
        CHECK(res.checked > 0);
        CHECK(res.max_rel_error < 1e-4);
      }
    }
  }
}

TEST_CASE("L3 term is non-negative and leaves RotatE phases alone") {
  for (KgeKind kind : {KgeKind::TransE, KgeKind::DistMult, KgeKind::ComplEx, KgeKind::RotatE}) {
    auto p = test::make_grad_problem(kind, 3, 21);
    const double base = batch_objective(p.model, p.batch, 0.0);
    const double reg = batch_objective(p.model, p.batch, 0.1);
    CHECK(reg >= base);
    if (kind == KgeKind::RotatE) {
      std::vector<double> eg0(p.model.entity_table().size()), rg0(p.model.relation_table().size());
      std::vector<double> eg1 = eg0, rg1 = rg0;
      batch_objective(p.model, p.batch, 0.0, &eg0, &rg0);
      batch_objective(p.model, p.batch, 0.1, &eg1, &rg1);
      CHECK(rg0 == rg1);
    }
  }
}

TEST_CASE("corruption of a size-2 type class is forced") {
  const auto kg = test::make_kg({{"a", "drug", "", ""}, {"b", "drug", "", ""}, {"x", "disease", "", ""}},
                                {{"a", "treats", "x"}});
  const CorruptionSampler sampler(kg);
  Rng rng(1);
  for (const Triple& c : sampler.sample(kg.triples()[0], 50, rng)) {
    // disease class has one member, so only the head can move, and only to b
    CHECK(c.head == 1);
    CHECK(c.tail == 2);
  }
}

TEST_CASE("corruptions stay within the type class and never return the original entity") {
  std::vector<test::EntitySpec> ents = test::uniform_entities(100, "gene", "g");
  for (auto& e : test::uniform_entities(3, "other", "o")) ents.push_back(e);
  const auto kg = test::make_kg(ents, {{"g0", "r", "g1"}, {"g2", "r", "g3"}, {"o0", "s", "o1"}});
  const CorruptionSampler sampler(kg);
  Rng rng(2);
  for (const Triple& t : kg.triples()) {
    const auto out = sampler.sample(t, 128, rng);
    REQUIRE(out.size() == 128);
    for (const Triple& c : out) {
      CHECK(c.rel == t.rel);
      const bool head_moved = c.head != t.head;
      const bool tail_moved = c.tail != t.tail;
      CHECK(head_moved != tail_moved);
      CHECK(kg.type_of(c.head) == kg.type_of(t.head));
      CHECK(kg.type_of(c.tail) == kg.type_of(t.tail));
    }
  }
}

TEST_CASE("corruption without any same-type alternative throws NoCandidates") {
  const auto kg = test::make_kg({{"a", "drug", "", ""}, {"x", "disease", "", ""}}, {{"a", "treats", "x"}});
  const CorruptionSampler sampler(kg);
  Rng rng(1);
  try {
    sampler.sample(kg.triples()[0], 4, rng);
    FAIL("expected NoCandidates");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoCandidates);
  }
}

TEST_CASE("initialization ranges") {
  for (KgeKind kind : {KgeKind::TransE, KgeKind::ComplEx, KgeKind::RotatE}) {
    KgeConfig c = small_config(kind, 10);
    c.seed = 4;
    const KgeModel m = KgeModel::initialize(c, 20, 3);
    for (double x : m.entity_table()) CHECK(std::abs(x) < 0.05);
    for (double x : m.relation_table()) {
      if (kind == KgeKind::RotatE) {
        CHECK(x >= 0.0);
        CHECK(x < 2 * std::numbers::pi);
      } else {
        CHECK(std::abs(x) < 0.05);
      }
    }
  }
}

TEST_CASE("zero training steps return the initialization") {
  const auto kg = make_synthetic_kg({}, 2);
  KgeConfig c = small_config(KgeKind::DistMult, 6);
  c.max_steps = 0;
  c.seed = 9;
  const KgeModel trained = train_kge(kg, nullptr, c);
  const KgeModel init = KgeModel::initialize(c, kg.num_entities(), kg.num_relations());
  CHECK(trained.entity_table() == init.entity_table());
  CHECK(trained.relation_table() == init.relation_table());
}

TEST_CASE("training is deterministic and lowers the loss") {
  const auto kg = make_synthetic_kg({}, 2);
  const Split split = make_transductive_split(kg, 0.1, 0.1, 2);
  const auto train = kg.with_triples(split.train);
  const auto negs = generate_negatives(kg, split, 20, 2);
  KgeConfig c = small_config(KgeKind::ComplEx, 8);
  c.lr = 0.01;
  c.negatives = 8;
  c.batch_size = 32;
  c.max_steps = 200;
  c.eval_every = 50;
  c.seed = 3;
  std::vector<TrainingEvent> events;
  const KgeModel a = train_kge(train, &negs.valid, c, [&](const TrainingEvent& e) { events.push_back(e); });
  const KgeModel b = train_kge(train, &negs.valid, c);
  CHECK(a.entity_table() == b.entity_table());
  CHECK(a.best_step == b.best_step);
  REQUIRE(events.size() == 5);
  CHECK(events.back().loss < 1.0);
  CHECK(a.best_valid_mrr >= events.front().valid_mrr);
}

TEST_CASE("a diverging loss raises NonFiniteLoss") {
  const auto kg = make_synthetic_kg({}, 2);
  KgeConfig c = small_config(KgeKind::DistMult, 4);
  c.margin = std::numeric_limits<double>::infinity();
  c.max_steps = 5;
  c.batch_size = 4;
  c.negatives = 2;
  try {
    train_kge(kg, nullptr, c);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteLoss);
  }
}

TEST_CASE("parallel scoring equals serial scoring and the one-triple scorer") {
  const auto kg = make_synthetic_kg({}, 6);
  const Split split = make_transductive_split(kg, 0.1, 0.1, 6);
  const auto negs = generate_negatives(kg, split, 30, 6);
  for (KgeKind kind : {KgeKind::TransE, KgeKind::DistMult, KgeKind::ComplEx, KgeKind::RotatE}) {
    KgeConfig c = small_config(kind, 8);
    c.seed = 1;
    const KgeModel m = KgeModel::initialize(c, kg.num_entities(), kg.num_relations());
    const ScoreSet p = score_queries(m, negs.test, "m", "h");
    const ScoreSet s = score_queries_serial(m, negs.test, "m", "h");
    REQUIRE(p.queries.size() == s.queries.size());
    for (std::size_t q = 0; q < p.queries.size(); ++q) {
      CHECK(p.queries[q].positive == s.queries[q].positive);
      CHECK(p.queries[q].negatives == s.queries[q].negatives);
      const Triple& t = negs.test.triples[p.queries[q].triple_index];
      CHECK(p.queries[q].positive == m.score(t));
    }
  }
}

TEST_CASE("model persistence round-trips and detects tampering") {
  test::TempDir dir;
  const auto kg = make_synthetic_kg({}, 2);
  KgeConfig c = small_config(KgeKind::ComplEx, 4);
  KgeModel m = KgeModel::initialize(c, kg.num_entities(), kg.num_relations());
  m.round_to_float32();
  save_model(dir.path(), "m", m, kg);
  const KgeModel back = load_model(dir.path(), "m", kg);
  CHECK(back.entity_table() == m.entity_table());
  CHECK(back.relation_table() == m.relation_table());
  CHECK(back.config().kind == KgeKind::ComplEx);
  {
    std::fstream f(dir / "m.entities.f32", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('\x7f');
  }
  try {
    load_model(dir.path(), "m", kg);
    FAIL("expected HashMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::HashMismatch);
  }
}

TEST_CASE("config json round-trip") {
  KgeConfig c;
  c.kind = KgeKind::RotatE;
  c.dim = 12;
  c.lr = 0.25;
  c.seed = 77;
  const KgeConfig back = kge_config_from_json(to_json(c));
  CHECK(back.kind == c.kind);
  CHECK(back.dim == c.dim);
  CHECK(back.lr == c.lr);
  CHECK(back.seed == c.seed);
  CHECK(parse_kge_kind(to_string(KgeKind::TransE)) == KgeKind::TransE);
  CHECK_THROWS_AS(parse_kge_kind("hole"), Error);
}

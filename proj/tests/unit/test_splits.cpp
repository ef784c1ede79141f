#include <doctest.h>

#include <set>

#include "../support.hpp"
#include "kgc/error.hpp"
#include "kgc/splits.hpp"
#include "kgc/synthetic.hpp"

using namespace kgc;

namespace {

KnowledgeGraph cycle(std::size_t n) {
  std::vector<std::tuple<std::string, std::string, std::string>> ts;
  for (std::size_t i = 0; i < n; ++i) ts.emplace_back("e" + std::to_string(i), "r", "e" + std::to_string((i + 1) % n));
  return test::make_kg(test::uniform_entities(n), ts);
}

std::vector<std::size_t> brute_degrees(std::size_t n, const std::vector<Triple>& ts) {
  std::vector<std::size_t> deg(n, 0);
  for (const Triple& t : ts) {
    ++deg[t.head];
    ++deg[t.tail];
  }
  return deg;
}

// Exhaustive membership scan against every known triple.
bool is_known(const Split& s, const Triple& t) {
  for (const auto* part : {&s.train, &s.valid, &s.test}) {
    if (std::find(part->begin(), part->end(), t) != part->end()) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("held-out sizes reproduce the published split sizes") {
  auto check = [](std::size_t total, std::size_t train, std::size_t valid, std::size_t test) {
    const auto s = held_out_sizes(total, 0.1, 0.1);
    CHECK(s.valid == valid);
    CHECK(s.test == test);
    CHECK(total - s.valid - s.test == train);
  };
  check(5342 + 667 + 668, 5342, 667, 668);
  check(124544 + 15567 + 15568, 124544, 15567, 15568);
  check(387724 + 48465 + 48465, 387724, 48465, 48465);
}

TEST_CASE("transductive split on a star is infeasible") {
  auto kg = test::make_kg(test::uniform_entities(5), {{"e0", "r", "e1"}, {"e0", "r", "e2"}, {"e0", "r", "e3"},
                                                     {"e0", "r", "e4"}});
  // 10%/10% of 4 edges rounds to zero held-out edges.
  const Split zero = make_transductive_split(kg, 0.1, 0.1, 1);
  CHECK(zero.valid.empty());
  CHECK(zero.test.empty());
  try {
    make_transductive_split(kg, 0.25, 0.25, 1);
    FAIL("expected SplitInfeasible");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SplitInfeasible);
  }
}

TEST_CASE("transductive split of a 10-cycle keeps every node connected") {
  const KnowledgeGraph kg = cycle(10);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Split s = make_transductive_split(kg, 0.1, 0.1, seed);
    CHECK(s.valid.size() == 1);
    CHECK(s.test.size() == 1);
    CHECK(s.train.size() == 8);
    for (std::size_t d : brute_degrees(10, s.train)) CHECK(d >= 1);
  }
}

TEST_CASE("transductive invariants on random graphs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SyntheticSpec spec;
    spec.entities = 40;
    spec.triples = 300;
    const KnowledgeGraph kg = make_synthetic_kg(spec, seed);
    const Split s = make_transductive_split(kg, 0.1, 0.1, seed);
    const auto deg = brute_degrees(kg.num_entities(), s.train);
    for (const auto* part : {&s.valid, &s.test}) {
      for (const Triple& t : *part) {
        CHECK(deg[t.head] >= 1);
        CHECK(deg[t.tail] >= 1);
      }
    }
    std::set<Triple> all(s.train.begin(), s.train.end());
    all.insert(s.valid.begin(), s.valid.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == kg.triples().size());
    const auto sizes = held_out_sizes(kg.triples().size(), 0.1, 0.1);
    CHECK(s.valid.size() == sizes.valid);
    CHECK(s.test.size() == sizes.test);
  }
}

TEST_CASE("inductive split removes every triple of a held-out entity") {
  SyntheticSpec spec;
  spec.entities = 120;
  spec.triples = 1000;
  const KnowledgeGraph kg = make_synthetic_kg(spec, 11);
  REQUIRE(kg.triples().size() == 1000);
  const Split s = make_inductive_split(kg, 0.1, 0.1, 5);
  const auto deg = brute_degrees(kg.num_entities(), s.train);
  // Every test triple has an endpoint without training edges (exhaustive scan).
  for (const Triple& t : s.test) CHECK((deg[t.head] == 0 || deg[t.tail] == 0));
  // Entities without training edges keep none of their triples in train.
  for (EntityId e = 0; e < kg.num_entities(); ++e) {
    if (deg[e] != 0) continue;
    for (const Triple& t : s.train) CHECK((t.head != e && t.tail != e));
  }
  const double held = static_cast<double>(s.valid.size() + s.test.size());
  CHECK(held >= 200 - 10);
  CHECK(held <= 200 + 10);
  CHECK(s.train.size() + held == 1000);
}

TEST_CASE("splits are deterministic per seed") {
  const KnowledgeGraph kg = make_synthetic_kg({}, 2);
  for (auto maker : {make_transductive_split, make_inductive_split}) {
    const Split a = maker(kg, 0.1, 0.1, 9);
    const Split b = maker(kg, 0.1, 0.1, 9);
    CHECK(a.train == b.train);
    CHECK(a.valid == b.valid);
    CHECK(a.test == b.test);
    const Split c = maker(kg, 0.1, 0.1, 10);
    CHECK((a.valid != c.valid || a.test != c.test));
  }
}

TEST_CASE("toy negatives match the hand-enumerated filtered pool") {
  // 3 drugs, 2 diseases; d1 treats s1 and s2 is known via d2.
  auto kg = test::make_kg({{"d1", "drug", "", ""},
                           {"d2", "drug", "", ""},
                           {"d3", "drug", "", ""},
                           {"s1", "disease", "", ""},
                           {"s2", "disease", "", ""}},
                          {{"d1", "treats", "s1"}, {"d2", "treats", "s2"}, {"d3", "treats", "s1"}});
  Split split;
  split.train = {kg.triples()[1], kg.triples()[2]};
  split.test = {kg.triples()[0]};
  const FilterIndex filter(kg, split);
  // Tail side of (d1, treats, s1): diseases minus s1 minus known d1 partners.
  CHECK(filter.pool(kg.triples()[0], Side::Tail) == std::vector<EntityId>{4});
  // Head side: drugs minus d1 minus d3 (d3 treats s1 is known).
  CHECK(filter.pool(kg.triples()[0], Side::Head) == std::vector<EntityId>{1});
  const auto negs = generate_negatives(kg, split, 500, 3);
  CHECK(negs.test.negatives(0, Side::Tail) == std::vector<EntityId>{4});
  CHECK(negs.test.negatives(0, Side::Head) == std::vector<EntityId>{1});
  CHECK(negs.test.num_short() == 2);
  CHECK(negs.test.num_empty() == 0);
}

TEST_CASE("a query whose pool is all positives is flagged empty") {
  auto kg = test::make_kg({{"d1", "drug", "", ""}, {"s1", "disease", "", ""}, {"s2", "disease", "", ""}},
                          {{"d1", "treats", "s1"}, {"d1", "treats", "s2"}});
  Split split;
  split.train = {kg.triples()[1]};
  split.test = {kg.triples()[0]};
  const auto negs = generate_negatives(kg, split, 10, 1);
  CHECK(negs.test.negatives(0, Side::Tail).empty());
  CHECK(negs.test.negatives(0, Side::Head).empty());
  CHECK(negs.test.num_empty() == 2);
}

TEST_CASE("negative sets are type preserving, filtered and sized") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    SyntheticSpec spec;
    spec.entities = 45;
    spec.triples = 250;
    const KnowledgeGraph kg = make_synthetic_kg(spec, seed);
    const Split s = make_transductive_split(kg, 0.1, 0.1, seed);
    const std::size_t m = 6;
    const auto pair = generate_negatives(kg, s, m, seed);
    const FilterIndex filter(kg, s);
    for (const NegativeSets* negs : {&pair.valid, &pair.test}) {
      for (std::size_t i = 0; i < negs->triples.size(); ++i) {
        const Triple& t = negs->triples[i];
        for (Side side : {Side::Head, Side::Tail}) {
          const auto& list = negs->negatives(i, side);
          const EntityId replaced = side == Side::Head ? t.head : t.tail;
          CHECK(list.size() == std::min(m, filter.pool(t, side).size()));
          CHECK(std::set<EntityId>(list.begin(), list.end()).size() == list.size());
          for (EntityId e : list) {
            CHECK(kg.type_of(e) == kg.type_of(replaced));
            CHECK(e != replaced);
            const Triple c = side == Side::Head ? Triple{e, t.rel, t.tail} : Triple{t.head, t.rel, e};
            CHECK_FALSE(is_known(s, c));
          }
        }
      }
    }
  }
}

TEST_CASE("parallel and serial negative generation agree") {
  const KnowledgeGraph kg = make_synthetic_kg({}, 4);
  const Split s = make_transductive_split(kg, 0.1, 0.1, 4);
  for (std::size_t m : {3, 50}) {
    const auto a = generate_negatives(kg, s, m, 77);
    const auto b = generate_negatives_serial(kg, s, m, 77);
    CHECK(a.valid.head_negatives == b.valid.head_negatives);
    CHECK(a.test.tail_negatives == b.test.tail_negatives);
    const auto c = generate_negatives(kg, s, m, 77);
    CHECK(a.test.head_negatives == c.test.head_negatives);
  }
}

TEST_CASE("split and negatives persistence") {
  test::TempDir dir;
  const KnowledgeGraph kg = make_synthetic_kg({}, 6);
  const Split s = make_inductive_split(kg, 0.1, 0.1, 6);
  save_split(dir / "split", s, kg);
  const Split back = load_split(dir / "split", kg);
  CHECK(back.train == s.train);
  CHECK(back.valid == s.valid);
  CHECK(back.test == s.test);
  CHECK(back.mode == SplitMode::Inductive);
  CHECK(back.seed == 6);

  const auto negs = generate_negatives(kg, s, 7, 1);
  save_negatives(dir / "neg", "test", negs.test, kg);
  const NegativeSets nb = load_negatives(dir / "neg", "test", s.test, kg);
  CHECK(nb.head_negatives == negs.test.head_negatives);
  CHECK(nb.tail_negatives == negs.test.tail_negatives);
  CHECK(nb.m_eval == 7);
  const io::Json manifest = io::read_json(dir / "neg" / "test.manifest.json");
  CHECK(manifest.at("shortfalls").size() == negs.test.num_short());

  io::write_text(dir / "split" / "test.tsv", io::read_text(dir / "split" / "test.tsv") + "\n");
  try {
    load_split(dir / "split", kg);
    FAIL("expected HashMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::HashMismatch);
  }
}

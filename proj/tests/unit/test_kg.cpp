#include <doctest.h>

#include <numeric>
#include <set>

#include "../support.hpp"
#include "kgc/error.hpp"
#include "kgc/io.hpp"
#include "kgc/kg.hpp"
#include "kgc/synthetic.hpp"

using namespace kgc;

namespace {

void write_files(const test::TempDir& dir, const std::string& meta, const std::string& triples) {
  io::write_text(dir / "entities.tsv", meta);
  io::write_text(dir / "triples.tsv", triples);
}

}  // namespace

TEST_CASE("load_graph on a 3-triple file over 4 entities") {
  test::TempDir dir;
  write_files(dir,
              "a\tdrug\taspirin\tanalgesic drug\n"
              "b\tdrug\tibuprofen\t\n"
              "c\tdisease\tpain\t\n"
              "d\tdisease\tfever\tbody temperature\n",
              "a\ttreats\tc\n"
              "b\ttreats\tc\n"
              "a\ttreats\td\n");
  const KnowledgeGraph kg = load_graph(dir / "triples.tsv", dir / "entities.tsv");
  CHECK(kg.num_entities() == 4);
  CHECK(kg.num_relations() == 1);
  REQUIRE(kg.triples().size() == 3);
  // Hand-built index: ids follow metadata order, triples keep file order.
  CHECK(kg.out_edges(0) == std::vector<std::uint32_t>{0, 2});
  CHECK(kg.out_edges(1) == std::vector<std::uint32_t>{1});
  CHECK(kg.out_edges(2).empty());
  CHECK(kg.in_edges(2) == std::vector<std::uint32_t>{0, 1});
  CHECK(kg.in_edges(3) == std::vector<std::uint32_t>{2});
  CHECK(kg.entity(1).description == std::nullopt);
  CHECK(kg.types() == std::vector<std::string>{"drug", "disease"});
  CHECK(kg.entities_of_type(1) == std::vector<EntityId>{2, 3});
}

TEST_CASE("load_graph errors") {
  test::TempDir dir;
  SUBCASE("unknown head key") {
    write_files(dir, "a\tt\tA\t\nb\tt\tB\t\n", "a\tr\tb\nz\tr\tb\n");
    try {
      load_graph(dir / "triples.tsv", dir / "entities.tsv");
      FAIL("expected MissingEntityMetadata");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingEntityMetadata);
    }
  }
  SUBCASE("wrong column count") {
    write_files(dir, "a\tt\tA\t\nb\tt\tB\t\n", "a\tr\tb\na\tr\n");
    try {
      load_graph(dir / "triples.tsv", dir / "entities.tsv");
      FAIL("expected MalformedLine");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedLine);
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
  SUBCASE("empty name") {
    write_files(dir, "a\tt\t  \t\n", "");
    CHECK_THROWS_AS(load_graph(dir / "triples.tsv", dir / "entities.tsv"), Error);
  }
  SUBCASE("duplicate key") {
    write_files(dir, "a\tt\tA\t\na\tt\tB\t\n", "");
    CHECK_THROWS_AS(load_graph(dir / "triples.tsv", dir / "entities.tsv"), Error);
  }
}

TEST_CASE("duplicate triples are dropped and counted") {
  auto kg = test::make_kg(test::uniform_entities(3), {{"e0", "r", "e1"}, {"e0", "r", "e1"}, {"e1", "r", "e2"},
                                                     {"e0", "r", "e1"}});
  CHECK(kg.triples().size() == 2);
  CHECK(kg.duplicates_dropped() == 2);
}

TEST_CASE("entity_text") {
  EntityRecord rec;
  rec.name = "aspirin";
  CHECK(entity_text(rec) == "aspirin");
  rec.description = "analgesic drug";
  CHECK(entity_text(rec) == "aspirin analgesic drug");
  rec.name = "  x ";
  rec.description.reset();
  CHECK(entity_text(rec) == "x");
}

TEST_CASE("neighbors") {
  auto kg = test::make_kg(test::uniform_entities(5), {{"e0", "r", "e1"}, {"e1", "r", "e2"}, {"e3", "r", "e2"},
                                                     {"e3", "s", "e2"}});
  CHECK(kg.neighbors(1, Direction::Out) == std::vector<EntityId>{2});
  CHECK(kg.neighbors(1, Direction::In) == std::vector<EntityId>{0});
  CHECK(kg.neighbors(1, Direction::Both) == std::vector<EntityId>{0, 2});
  CHECK(kg.neighbors(4, Direction::Both).empty());
  CHECK(kg.neighbors(3, Direction::Out) == std::vector<EntityId>{2});
  try {
    kg.neighbors(9, Direction::Out);
    FAIL("expected UnknownEntity");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownEntity);
  }
}

TEST_CASE("adjacency is consistent with the triple list on random graphs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SyntheticSpec spec;
    spec.entities = 30;
    spec.triples = 120;
    const KnowledgeGraph kg = make_synthetic_kg(spec, seed);
    std::size_t out_sum = 0, in_sum = 0;
    for (EntityId e = 0; e < kg.num_entities(); ++e) {
      out_sum += kg.out_degree(e);
      in_sum += kg.in_degree(e);
    }
    CHECK(out_sum == kg.triples().size());
    CHECK(in_sum == kg.triples().size());
    for (std::uint32_t i = 0; i < kg.triples().size(); ++i) {
      const Triple& t = kg.triples()[i];
      const auto& out = kg.out_edges(t.head);
      const auto& in = kg.in_edges(t.tail);
      CHECK(std::count(out.begin(), out.end(), i) == 1);
      CHECK(std::count(in.begin(), in.end(), i) == 1);
    }
    for (const auto& rec : kg.entities()) CHECK(!entity_text(rec).empty());
  }
}

TEST_CASE("load_graph is deterministic and round-trips through the TSV writer") {
  test::TempDir dir;
  const KnowledgeGraph kg = make_synthetic_kg({}, 3);
  write_kg_files(dir.path(), kg);
  const KnowledgeGraph a = load_graph(dir / "triples.tsv", dir / "entities.tsv");
  const KnowledgeGraph b = load_graph(dir / "triples.tsv", dir / "entities.tsv");
  CHECK(a.triples() == b.triples());
  REQUIRE(a.triples().size() == kg.triples().size());
  for (std::size_t i = 0; i < a.triples().size(); ++i) {
    CHECK(a.triples()[i].head == kg.triples()[i].head);
    CHECK(a.triples()[i].tail == kg.triples()[i].tail);
    CHECK(a.relations()[a.triples()[i].rel] == kg.relations()[kg.triples()[i].rel]);
  }
  for (EntityId e = 0; e < kg.num_entities(); ++e) {
    CHECK(a.entity(e).key == kg.entity(e).key);
    CHECK(a.entity(e).description == kg.entity(e).description);
  }
}

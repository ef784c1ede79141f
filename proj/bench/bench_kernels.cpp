// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include "kgc/evaluate.hpp"
#include "kgc/features.hpp"
#include "kgc/inductive.hpp"
#include "kgc/kge.hpp"
#include "kgc/rng.hpp"
#include "kgc/splits.hpp"
#include "kgc/synthetic.hpp"

using namespace kgc;

namespace {

struct Fixture {
  KnowledgeGraph kg;
  Split split;
  NegativeSetPair negs;
  KgeModel model;
  ScoreSet scores;
  TextEmbeddingFile text;
  std::vector<EntityId> seen, unseen;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture f;
    SyntheticSpec spec;
    spec.entities = 3000;
    spec.types = 3;
    spec.relations = 8;
    spec.triples = 30000;
    spec.clusters = 20;
    f.kg = make_synthetic_kg(spec, 1);
    f.split = make_transductive_split(f.kg, 0.05, 0.05, 2);
    f.negs = generate_negatives(f.kg, f.split, 200, 3);
    KgeConfig c;
    c.kind = KgeKind::ComplEx;
    c.dim = 64;
    f.model = KgeModel::initialize(c, f.kg.num_entities(), f.kg.num_relations());
    f.scores = score_queries(f.model, f.negs.test, "complex", "");

    f.text.encoder = "bench";
    f.text.width = 128;
    Rng rng(4);
    for (const auto& e : f.kg.entities()) {
      f.text.keys.push_back(e.key);
      for (std::size_t i = 0; i < f.text.width; ++i) f.text.values.push_back(rng.normal());
    }
    f.text.reindex();
    for (EntityId e = 0; e < f.kg.num_entities(); ++e) (e % 10 == 0 ? f.unseen : f.seen).push_back(e);
    return f;
  }();
  return f;
}

void BM_compute_ranks(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(compute_ranks(f.scores));
}
void BM_compute_ranks_serial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(compute_ranks_serial(f.scores));
}

void BM_score_queries(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(score_queries(f.model, f.negs.test, "m", ""));
}
void BM_score_queries_serial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(score_queries_serial(f.model, f.negs.test, "m", ""));
}

void BM_pagerank(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(pagerank(f.kg));
}
void BM_pagerank_serial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(pagerank_serial(f.kg));
}

void BM_generate_negatives(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(generate_negatives(f.kg, f.split, 200, 5));
}
void BM_generate_negatives_serial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(generate_negatives_serial(f.kg, f.split, 200, 5));
}

void BM_impute(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(impute_embeddings(f.model, f.kg, f.text, f.seen, f.unseen));
}
void BM_impute_serial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(impute_embeddings_serial(f.model, f.kg, f.text, f.seen, f.unseen));
}

}  // namespace

BENCHMARK(BM_compute_ranks)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_compute_ranks_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_score_queries)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_score_queries_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_pagerank)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_pagerank_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_generate_negatives)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_generate_negatives_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_impute)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_impute_serial)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();

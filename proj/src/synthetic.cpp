#include "kgc/synthetic.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>

#include "kgc/error.hpp"
#include "kgc/io.hpp"
#include "kgc/rng.hpp"

namespace kgc {

namespace {

constexpr std::array<const char*, 16> kWords = {"alpha",  "kinase",   "receptor", "protein", "binding", "domain",
                                                "factor", "inhibitor", "channel", "type-2",  "syndrome", "acute",
                                                "renal",  "cardiac",  "gamma",    "(HLA)"};

std::string random_words(Rng& rng, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += kWords[rng.uniform_index(kWords.size())];
  }
  return out;
}

}  // namespace

KnowledgeGraph make_synthetic_kg(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.types == 0 || spec.relations == 0 || spec.clusters == 0 || spec.entities < 2 * spec.types) {
    fail(ErrorCode::InvalidArgument, "synthetic KG needs at least two entities per type");
  }
  Rng rng(seed);
  std::vector<EntityRecord> entities;
  std::vector<std::vector<EntityId>> by_type(spec.types);
  std::vector<std::size_t> cluster(spec.entities);
  for (std::size_t i = 0; i < spec.entities; ++i) {
    EntityRecord rec;
    rec.id = static_cast<EntityId>(i);
    const std::size_t type = i % spec.types;
    rec.key = "E" + std::to_string(i);
    rec.etype = "type" + std::to_string(type);
    rec.name = random_words(rng, 1 + rng.uniform_index(3)) + " " + std::to_string(i);
    if (rng.uniform01() < spec.described) rec.description = random_words(rng, 3 + rng.uniform_index(8)) + ".";
    cluster[i] = rng.uniform_index(spec.clusters);
    by_type[type].push_back(rec.id);
    entities.push_back(std::move(rec));
  }
  std::vector<std::string> relations;
  for (std::size_t r = 0; r < spec.relations; ++r) relations.push_back("rel" + std::to_string(r));

  std::vector<Triple> triples;
  std::unordered_set<Triple, TripleHash> seen;
  const std::size_t max_attempts = 100 * spec.triples + 1000;
  for (std::size_t attempt = 0; attempt < max_attempts && triples.size() < spec.triples; ++attempt) {
    const auto r = static_cast<RelationId>(rng.uniform_index(spec.relations));
    const auto& heads = by_type[r % spec.types];
    const auto& tails = by_type[(r + 1) % spec.types];
    const EntityId h = heads[rng.uniform_index(heads.size())];
    EntityId t = tails[rng.uniform_index(tails.size())];
    if (rng.uniform01() < spec.signal) {
      const std::size_t want = (cluster[h] + r) % spec.clusters;
      std::vector<EntityId> pool;
      for (EntityId e : tails) {
        if (cluster[e] == want) pool.push_back(e);
      }
      if (!pool.empty()) t = pool[rng.uniform_index(pool.size())];
    }
    if (h == t) continue;
    const Triple tr{h, r, t};
    if (seen.insert(tr).second) triples.push_back(tr);
  }
  return KnowledgeGraph::build(std::move(entities), std::move(relations), triples);
}

void write_kg_files(const std::filesystem::path& dir, const KnowledgeGraph& kg) {
  std::string body;
  for (const auto& e : kg.entities()) {
    body += e.key + '\t' + e.etype + '\t' + e.name + '\t' + e.description.value_or("") + '\n';
  }
  io::write_text(dir / "entities.tsv", body);
  io::write_text(dir / "triples.tsv", format_triples(kg.triples(), kg));
}

}  // namespace kgc

#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "kgc/kg.hpp"
#include "kgc/rng.hpp"
#include "kgc/scoreset.hpp"

namespace kgc::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("kgc-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct EntitySpec {
  std::string key;
  std::string type;
  std::string name;
  std::string description;
};

/// Builds a graph from keys; relations are numbered in first-seen order.
inline KnowledgeGraph make_kg(const std::vector<EntitySpec>& entities,
                              const std::vector<std::tuple<std::string, std::string, std::string>>& triples) {
  std::vector<EntityRecord> recs;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    EntityRecord r;
    r.id = static_cast<EntityId>(i);
    r.key = entities[i].key;
    r.etype = entities[i].type;
    r.name = entities[i].name.empty() ? entities[i].key : entities[i].name;
    if (!entities[i].description.empty()) r.description = entities[i].description;
    recs.push_back(r);
  }
  auto id_of = [&](const std::string& key) {
    for (std::size_t i = 0; i < entities.size(); ++i) {
      if (entities[i].key == key) return static_cast<EntityId>(i);
    }
    throw std::runtime_error("unknown key " + key);
  };
  std::vector<std::string> relations;
  std::vector<Triple> ts;
  for (const auto& [h, r, t] : triples) {
    auto it = std::find(relations.begin(), relations.end(), r);
    if (it == relations.end()) {
      relations.push_back(r);
      it = relations.end() - 1;
    }
    ts.push_back({id_of(h), static_cast<RelationId>(it - relations.begin()), id_of(t)});
  }
  return KnowledgeGraph::build(recs, relations, ts);
}

/// Entities named "<prefix><i>" of one type.
inline std::vector<EntitySpec> uniform_entities(std::size_t n, const std::string& type = "t",
                                                const std::string& prefix = "e") {
  std::vector<EntitySpec> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({prefix + std::to_string(i), type, "", ""});
  return out;
}

/// ScoreSet with `queries` queries of `candidates` negatives each, scores
/// drawn from a small integer range so ties occur.
inline ScoreSet random_score_set(std::size_t queries, std::size_t candidates, Rng& rng, int levels = 5,
                                 std::string name = "m") {
  ScoreSet s;
  s.model_name = std::move(name);
  s.negatives_hash = "h";
  for (std::size_t q = 0; q < queries; ++q) {
    QueryScores qs;
    qs.triple_index = q / 2;
    qs.side = static_cast<Side>(q % 2);
    qs.positive = static_cast<double>(rng.uniform_index(levels));
    for (std::size_t j = 0; j < candidates; ++j) qs.negatives.push_back(static_cast<double>(rng.uniform_index(levels)));
    s.queries.push_back(std::move(qs));
  }
  return s;
}

}  // namespace kgc::test

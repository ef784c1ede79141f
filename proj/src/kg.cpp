#include "kgc/kg.hpp"

#include <algorithm>

#include "kgc/error.hpp"
#include "kgc/io.hpp"

namespace kgc {
namespace {

std::string trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

std::string entity_text(const EntityRecord& rec) {
  std::string text = trim(rec.name);
  if (rec.description) {
    const std::string desc = trim(*rec.description);
    if (!desc.empty()) {
      text += ' ';
      text += desc;
    }
  }
  return text;
}

KnowledgeGraph KnowledgeGraph::build(std::vector<EntityRecord> entities, std::vector<std::string> relations,
                                     std::span<const Triple> triples) {
  KnowledgeGraph kg;
  kg.entities_ = std::move(entities);
  kg.relations_ = std::move(relations);
  std::unordered_map<std::string, TypeId> type_index;
  for (std::size_t i = 0; i < kg.entities_.size(); ++i) {
    EntityRecord& rec = kg.entities_[i];
    rec.id = static_cast<EntityId>(i);
    rec.name = trim(rec.name);
    if (rec.name.empty()) fail(ErrorCode::MalformedLine, "entity '" + rec.key + "' has an empty name");
    if (rec.description) {
      *rec.description = trim(*rec.description);
      if (rec.description->empty()) rec.description.reset();
    }
    if (!kg.key_index_.emplace(rec.key, rec.id).second) {
      fail(ErrorCode::MalformedLine, "duplicate entity key '" + rec.key + "'");
    }
    auto [it, inserted] = type_index.emplace(rec.etype, static_cast<TypeId>(kg.types_.size()));
    if (inserted) kg.types_.push_back(rec.etype);
    kg.entity_type_.push_back(it->second);
  }
  kg.by_type_.assign(kg.types_.size(), {});
  for (std::size_t i = 0; i < kg.entities_.size(); ++i) {
    kg.by_type_[kg.entity_type_[i]].push_back(static_cast<EntityId>(i));
  }
  for (std::size_t r = 0; r < kg.relations_.size(); ++r) {
    if (!kg.relation_index_.emplace(kg.relations_[r], static_cast<RelationId>(r)).second) {
      fail(ErrorCode::MalformedLine, "duplicate relation label '" + kg.relations_[r] + "'");
    }
  }
  kg.triples_.reserve(triples.size());
  for (const Triple& t : triples) {
    if (t.head >= kg.entities_.size() || t.tail >= kg.entities_.size()) {
      fail(ErrorCode::UnknownEntity, "triple references entity outside the graph");
    }
    if (t.rel >= kg.relations_.size()) fail(ErrorCode::InvalidArgument, "triple references unknown relation");
    if (kg.triple_set_.emplace(t, static_cast<std::uint32_t>(kg.triples_.size())).second) {
      kg.triples_.push_back(t);
    } else {
      ++kg.duplicates_dropped_;
    }
  }
  kg.index();
  return kg;
}

KnowledgeGraph KnowledgeGraph::with_triples(std::span<const Triple> triples) const {
  KnowledgeGraph kg = *this;
  kg.triples_.clear();
  kg.triple_set_.clear();
  kg.duplicates_dropped_ = 0;
  for (const Triple& t : triples) {
    if (kg.triple_set_.emplace(t, static_cast<std::uint32_t>(kg.triples_.size())).second) {
      kg.triples_.push_back(t);
    } else {
      ++kg.duplicates_dropped_;
    }
  }
  kg.index();
  return kg;
}

void KnowledgeGraph::index() {
  out_adj_.assign(entities_.size(), {});
  in_adj_.assign(entities_.size(), {});
  for (std::size_t i = 0; i < triples_.size(); ++i) {
    out_adj_[triples_[i].head].push_back(static_cast<std::uint32_t>(i));
    in_adj_[triples_[i].tail].push_back(static_cast<std::uint32_t>(i));
  }
}

const EntityRecord& KnowledgeGraph::entity(EntityId e) const {
  if (e >= entities_.size()) fail(ErrorCode::UnknownEntity, "entity id " + std::to_string(e));
  return entities_[e];
}

std::optional<EntityId> KnowledgeGraph::find_entity(std::string_view key) const {
  auto it = key_index_.find(std::string(key));
  if (it == key_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> KnowledgeGraph::find_relation(std::string_view label) const {
  auto it = relation_index_.find(std::string(label));
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<EntityId> KnowledgeGraph::neighbors(EntityId e, Direction direction) const {
  if (e >= entities_.size()) fail(ErrorCode::UnknownEntity, "entity id " + std::to_string(e));
  std::vector<EntityId> out;
  if (direction != Direction::In) {
    for (auto i : out_adj_[e]) out.push_back(triples_[i].tail);
  }
  if (direction != Direction::Out) {
    for (auto i : in_adj_[e]) out.push_back(triples_[i].head);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<EntityRecord> load_entity_metadata(const std::filesystem::path& metadata_path) {
  std::vector<EntityRecord> entities;
  io::for_each_row(metadata_path, 4, [&](std::span<const std::string_view> f, std::size_t line) {
    EntityRecord rec;
    rec.key = std::string(f[0]);
    rec.etype = std::string(f[1]);
    rec.name = std::string(f[2]);
    if (!f[3].empty()) rec.description = std::string(f[3]);
    if (rec.key.empty() || rec.etype.empty()) {
      fail(ErrorCode::MalformedLine,
           metadata_path.string() + ":" + std::to_string(line) + ": empty key or type");
    }
    if (trim(rec.name).empty()) {
      fail(ErrorCode::MalformedLine, metadata_path.string() + ":" + std::to_string(line) + ": empty name");
    }
    entities.push_back(std::move(rec));
  });
  return entities;
}

KnowledgeGraph load_graph(const std::filesystem::path& triples_path,
                          const std::filesystem::path& metadata_path) {
  std::vector<EntityRecord> entities = load_entity_metadata(metadata_path);
  std::unordered_map<std::string, EntityId> keys;
  for (std::size_t i = 0; i < entities.size(); ++i) keys.emplace(entities[i].key, static_cast<EntityId>(i));

  std::vector<std::string> relations;
  std::unordered_map<std::string, RelationId> relation_ids;
  std::vector<Triple> triples;
  io::for_each_row(triples_path, 3, [&](std::span<const std::string_view> f, std::size_t line) {
    auto resolve = [&](std::string_view key) {
      auto it = keys.find(std::string(key));
      if (it == keys.end()) {
        fail(ErrorCode::MissingEntityMetadata, triples_path.string() + ":" + std::to_string(line) +
                                                   ": entity '" + std::string(key) + "' not in metadata");
      }
      return it->second;
    };
    Triple t;
    t.head = resolve(f[0]);
    t.tail = resolve(f[2]);
    auto [it, inserted] = relation_ids.emplace(std::string(f[1]), static_cast<RelationId>(relations.size()));
    if (inserted) relations.emplace_back(f[1]);
    t.rel = it->second;
    triples.push_back(t);
  });
  return KnowledgeGraph::build(std::move(entities), std::move(relations), triples);
}

std::vector<Triple> read_triples(const std::filesystem::path& path, const KnowledgeGraph& kg) {
  std::vector<Triple> triples;
  io::for_each_row(path, 3, [&](std::span<const std::string_view> f, std::size_t line) {
    const auto where = path.string() + ":" + std::to_string(line);
    auto h = kg.find_entity(f[0]);
    auto t = kg.find_entity(f[2]);
    if (!h || !t) fail(ErrorCode::MissingEntityMetadata, where + ": unknown entity key");
    auto r = kg.find_relation(f[1]);
    if (!r) fail(ErrorCode::MalformedLine, where + ": unknown relation '" + std::string(f[1]) + "'");
    triples.push_back({*h, *r, *t});
  });
  return triples;
}

std::string format_triples(std::span<const Triple> triples, const KnowledgeGraph& kg) {
  std::string out;
  for (const Triple& t : triples) {
    out += kg.entity(t.head).key;
    out += '\t';
    out += kg.relations()[t.rel];
    out += '\t';
    out += kg.entity(t.tail).key;
    out += '\n';
  }
  return out;
}

}  // namespace kgc

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgc {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using TypeId = std::uint32_t;

struct EntityRecord {
  EntityId id = 0;
  std::string key;
  std::string etype;
  std::string name;
  std::optional<std::string> description;
};

struct Triple {
  EntityId head = 0;
  RelationId rel = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t x = (static_cast<std::uint64_t>(t.head) << 32) ^ t.tail;
    x ^= static_cast<std::uint64_t>(t.rel) * 0x9e3779b97f4a7c15ULL;
    x ^= x >> 29;
    return static_cast<std::size_t>(x * 0xbf58476d1ce4e5b9ULL);
  }
};

enum class Direction { Out, In, Both };

/// Name, then a single space and the description when one is present.
std::string entity_text(const EntityRecord& rec);

/// Typed multi-relational graph. Immutable once built; safe to share
/// between threads.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  /// Assembles a graph from already-resolved parts. Duplicate triples are
  /// dropped (see duplicates_dropped()); names/descriptions are trimmed
  /// and empty descriptions become absent.
  static KnowledgeGraph build(std::vector<EntityRecord> entities, std::vector<std::string> relations,
                              std::span<const Triple> triples);

  /// Same entities and relations, different triple list. Used for the
  /// training graph of a split.
  KnowledgeGraph with_triples(std::span<const Triple> triples) const;

  std::size_t num_entities() const { return entities_.size(); }
  std::size_t num_relations() const { return relations_.size(); }
  std::size_t num_types() const { return types_.size(); }

  const std::vector<EntityRecord>& entities() const { return entities_; }
  const EntityRecord& entity(EntityId e) const;
  const std::vector<std::string>& relations() const { return relations_; }
  const std::vector<std::string>& types() const { return types_; }
  const std::vector<Triple>& triples() const { return triples_; }

  TypeId type_of(EntityId e) const { return entity_type_[e]; }
  /// Entities of one type, ascending id.
  const std::vector<EntityId>& entities_of_type(TypeId t) const { return by_type_[t]; }

  std::optional<EntityId> find_entity(std::string_view key) const;
  std::optional<RelationId> find_relation(std::string_view label) const;

  /// Triple indices leaving / entering `e`.
  const std::vector<std::uint32_t>& out_edges(EntityId e) const { return out_adj_[e]; }
  const std::vector<std::uint32_t>& in_edges(EntityId e) const { return in_adj_[e]; }

  std::size_t out_degree(EntityId e) const { return out_adj_[e].size(); }
  std::size_t in_degree(EntityId e) const { return in_adj_[e].size(); }

  /// Distinct neighbour ids, ascending. Throws UnknownEntity.
  std::vector<EntityId> neighbors(EntityId e, Direction direction) const;

  bool contains(const Triple& t) const { return triple_set_.count(t) != 0; }

  std::size_t duplicates_dropped() const { return duplicates_dropped_; }

 private:
  void index();

  std::vector<EntityRecord> entities_;
  std::vector<std::string> relations_;
  std::vector<std::string> types_;
  std::vector<TypeId> entity_type_;
  std::vector<std::vector<EntityId>> by_type_;
  std::vector<Triple> triples_;
  std::vector<std::vector<std::uint32_t>> out_adj_;
  std::vector<std::vector<std::uint32_t>> in_adj_;
  std::unordered_map<std::string, EntityId> key_index_;
  std::unordered_map<std::string, RelationId> relation_index_;
  std::unordered_map<Triple, std::uint32_t, TripleHash> triple_set_;
  std::size_t duplicates_dropped_ = 0;
};

/// Metadata TSV: key, type, name, description (may be empty).
std::vector<EntityRecord> load_entity_metadata(const std::filesystem::path& metadata_path);

/// Loads triples `head_key \t relation \t tail_key` against the metadata.
/// Entity ids follow metadata order; relation ids follow first appearance.
KnowledgeGraph load_graph(const std::filesystem::path& triples_path,
                          const std::filesystem::path& metadata_path);

/// Reads a triple TSV resolving keys against an existing graph (e.g. a
/// split file against the full graph). Unknown relations are an error.
std::vector<Triple> read_triples(const std::filesystem::path& path, const KnowledgeGraph& kg);
std::string format_triples(std::span<const Triple> triples, const KnowledgeGraph& kg);

}  // namespace kgc

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgc/io.hpp"
#include "kgc/kg.hpp"
#include "kgc/kge.hpp"

namespace kgc {

/// Text-encoder vectors keyed by external entity key. On disk: a JSON
/// manifest plus a little-endian float32 block of count x width values.
struct TextEmbeddingFile {
  std::string encoder;
  std::string pooling;
  std::string mode;  // "frozen" or "fine-tuned"; informational
  std::size_t width = 0;
  std::vector<std::string> keys;
  std::vector<double> values;

  std::size_t count() const { return keys.size(); }
  std::span<const double> vector(std::size_t i) const { return std::span(values).subspan(i * width, width); }
  std::optional<std::size_t> find(std::string_view key) const;

  /// Must be called after keys change; load() does it.
  void reindex();

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr const char* kTextEmbeddingFormat = "kgc-text-embeddings-v1";

/// Writes `<stem>.json` and `<stem>.f32`; returns the manifest.
io::Json save_text_embeddings(const std::filesystem::path& dir, const std::string& stem, const TextEmbeddingFile& f);
/// `manifest` is the path of the JSON file. HashMismatch when the block
/// does not match; MalformedLine on size or duplicate-key problems.
TextEmbeddingFile load_text_embeddings(const std::filesystem::path& manifest);

/// a.b / (|a| |b|). Throws ZeroVector, and InvalidArgument on a width mismatch.
double cosine_sim(std::span<const double> a, std::span<const double> b);

struct ImputationEntry {
  EntityId entity = 0;
  EntityId neighbor = 0;
  double similarity = 0;
};

struct ImputationReport {
  std::vector<ImputationEntry> entries;  // ascending entity id
};

io::Json to_json(const ImputationReport& report, const KnowledgeGraph& kg);

/// Entities with at least one edge in `train`, ascending.
std::vector<EntityId> seen_entities(const KnowledgeGraph& kg, std::span<const Triple> train);
/// Entities of `eval` triples with no edge in `train`, ascending.
std::vector<EntityId> unseen_entities(const KnowledgeGraph& kg, std::span<const Triple> train,
                                      std::span<const Triple> eval);

/// Copies into each unseen row the row of the most cosine-similar seen
/// entity of the same type (lowest id on ties). Seen rows are untouched.
/// Parallel over unseen entities.
std::pair<KgeModel, ImputationReport> impute_embeddings(const KgeModel& model, const KnowledgeGraph& kg,
                                                        const TextEmbeddingFile& text,
                                                        std::span<const EntityId> seen,
                                                        std::span<const EntityId> unseen);
std::pair<KgeModel, ImputationReport> impute_embeddings_serial(const KgeModel& model, const KnowledgeGraph& kg,
                                                               const TextEmbeddingFile& text,
                                                               std::span<const EntityId> seen,
                                                               std::span<const EntityId> unseen);

/// Unseen rows redrawn from the initialization distribution.
KgeModel random_baseline(const KgeModel& model, std::span<const EntityId> unseen, std::uint64_t seed);

}  // namespace kgc

#include "kgc/inductive.hpp"

#include <algorithm>
#include <cmath>

#include "kgc/error.hpp"
#include "kgc/io.hpp"
#include "kgc/rng.hpp"

namespace kgc {

std::optional<std::size_t> TextEmbeddingFile::find(std::string_view key) const {
  const auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void TextEmbeddingFile::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (!index_.emplace(keys[i], i).second) fail(ErrorCode::MalformedLine, "duplicate text embedding key '" + keys[i] + "'");
  }
}

io::Json save_text_embeddings(const std::filesystem::path& dir, const std::string& stem, const TextEmbeddingFile& f) {
  if (f.values.size() != f.width * f.keys.size()) {
    fail(ErrorCode::InvalidArgument, "text embedding values do not match count x width");
  }
  const auto block = dir / (stem + ".f32");
  io::write_f32(block, f.values);
  io::Json j;
  j["format"] = kTextEmbeddingFormat;
  j["encoder"] = f.encoder;
  j["pooling"] = f.pooling;
  j["mode"] = f.mode;
  j["width"] = f.width;
  j["count"] = f.keys.size();
  j["keys"] = f.keys;
  j["data_file"] = block.filename().string();
  j["data_sha256"] = io::sha256_file(block);
  io::write_json(dir / (stem + ".json"), j);
  return j;
}

TextEmbeddingFile load_text_embeddings(const std::filesystem::path& manifest) {
  const io::Json j = io::read_json(manifest);
  if (j.value("format", std::string()) != kTextEmbeddingFormat) {
    fail(ErrorCode::SchemaMismatch, manifest.string() + " is not a text embedding manifest");
  }
  TextEmbeddingFile f;
  f.encoder = j.value("encoder", std::string());
  f.pooling = j.value("pooling", std::string());
  f.mode = j.value("mode", std::string());
  f.width = j.at("width").get<std::size_t>();
  f.keys = j.at("keys").get<std::vector<std::string>>();
  if (j.at("count").get<std::size_t>() != f.keys.size()) {
    fail(ErrorCode::MalformedLine, manifest.string() + ": count does not match the key list");
  }
  const auto block = manifest.parent_path() / j.at("data_file").get<std::string>();
  if (io::sha256_file(block) != j.at("data_sha256").get<std::string>()) {
    fail(ErrorCode::HashMismatch, block.string() + " does not match its manifest");
  }
  f.values = io::read_f32(block);
  if (f.values.size() != f.width * f.keys.size()) {
    fail(ErrorCode::MalformedLine, block.string() + " holds " + std::to_string(f.values.size()) +
                                       " values, expected count x width");
  }
  f.reindex();
  return f;
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::InvalidArgument, "cosine similarity of vectors of different widths");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) fail(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

io::Json to_json(const ImputationReport& report, const KnowledgeGraph& kg) {
  io::Json rows = io::Json::array();
  for (const auto& e : report.entries) {
    rows.push_back({{"entity", kg.entity(e.entity).key},
                    {"type", kg.entity(e.entity).etype},
                    {"neighbor", kg.entity(e.neighbor).key},
                    {"similarity", e.similarity}});
  }
  return {{"imputed", report.entries.size()}, {"entries", rows}};
}

std::vector<EntityId> seen_entities(const KnowledgeGraph& kg, std::span<const Triple> train) {
  std::vector<char> seen(kg.num_entities(), 0);
  for (const Triple& t : train) seen[t.head] = seen[t.tail] = 1;
  std::vector<EntityId> out;
  for (EntityId e = 0; e < kg.num_entities(); ++e) {
    if (seen[e]) out.push_back(e);
  }
  return out;
}

std::vector<EntityId> unseen_entities(const KnowledgeGraph& kg, std::span<const Triple> train,
                                      std::span<const Triple> eval) {
  std::vector<char> seen(kg.num_entities(), 0), wanted(kg.num_entities(), 0);
  for (const Triple& t : train) seen[t.head] = seen[t.tail] = 1;
  for (const Triple& t : eval) wanted[t.head] = wanted[t.tail] = 1;
  std::vector<EntityId> out;
  for (EntityId e = 0; e < kg.num_entities(); ++e) {
    if (wanted[e] && !seen[e]) out.push_back(e);
  }
  return out;
}

namespace {

struct Prepared {
  std::vector<std::size_t> row;                     // text row per entity id, for seen and unseen
  std::vector<std::vector<EntityId>> seen_by_type;  // ascending
};

Prepared prepare(const KgeModel& model, const KnowledgeGraph& kg, const TextEmbeddingFile& text,
                 std::span<const EntityId> seen, std::span<const EntityId> unseen) {
  if (model.num_entities() != kg.num_entities()) {
    fail(ErrorCode::SchemaMismatch, "model and graph disagree on the entity count");
  }
  Prepared p;
  p.row.assign(kg.num_entities(), 0);
  p.seen_by_type.resize(kg.num_types());
  auto lookup = [&](EntityId e) {
    const auto& key = kg.entity(e).key;
    const auto row = text.find(key);
    if (!row) fail(ErrorCode::MissingVector, "no text vector for entity '" + key + "'");
    const auto v = text.vector(*row);
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0; })) {
      fail(ErrorCode::ZeroVector, "text vector of entity '" + key + "' is zero");
    }
    p.row[e] = *row;
  };
  std::vector<EntityId> sorted_seen(seen.begin(), seen.end());
  std::sort(sorted_seen.begin(), sorted_seen.end());
  for (EntityId e : sorted_seen) {
    lookup(e);
    p.seen_by_type[kg.type_of(e)].push_back(e);
  }
  for (EntityId u : unseen) {
    lookup(u);
    if (p.seen_by_type[kg.type_of(u)].empty()) {
      fail(ErrorCode::NoSameTypeNeighbor,
           "no trained entity of type '" + kg.entity(u).etype + "' for '" + kg.entity(u).key + "'");
    }
  }
  return p;
}

ImputationEntry nearest(const Prepared& p, const KnowledgeGraph& kg, const TextEmbeddingFile& text, EntityId u) {
  const auto vu = text.vector(p.row[u]);
  ImputationEntry best{u, 0, -2.0};
  for (EntityId e : p.seen_by_type[kg.type_of(u)]) {
    const double s = cosine_sim(text.vector(p.row[e]), vu);
    if (s > best.similarity) {
      best.neighbor = e;
      best.similarity = s;
    }
  }
  return best;
}

std::pair<KgeModel, ImputationReport> finish(const KgeModel& model, std::vector<ImputationEntry> entries) {
  KgeModel out = model;
  // Read neighbour rows from the original model so the result does not
  // depend on the order of the copies.
  for (const auto& entry : entries) {
    const auto src = model.entity(entry.neighbor);
    std::copy(src.begin(), src.end(), out.entity(entry.entity).begin());
  }
  std::sort(entries.begin(), entries.end(),
            [](const ImputationEntry& a, const ImputationEntry& b) { return a.entity < b.entity; });
  return {std::move(out), ImputationReport{std::move(entries)}};
}

}  // namespace

std::pair<KgeModel, ImputationReport> impute_embeddings(const KgeModel& model, const KnowledgeGraph& kg,
                                                        const TextEmbeddingFile& text,
                                                        std::span<const EntityId> seen,
                                                        std::span<const EntityId> unseen) {
  const Prepared p = prepare(model, kg, text, seen, unseen);
  std::vector<ImputationEntry> entries(unseen.size());
  const auto n = static_cast<std::int64_t>(unseen.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) entries[i] = nearest(p, kg, text, unseen[i]);
  return finish(model, std::move(entries));
}

std::pair<KgeModel, ImputationReport> impute_embeddings_serial(const KgeModel& model, const KnowledgeGraph& kg,
                                                               const TextEmbeddingFile& text,
                                                               std::span<const EntityId> seen,
                                                               std::span<const EntityId> unseen) {
  const Prepared p = prepare(model, kg, text, seen, unseen);
  std::vector<ImputationEntry> entries;
  for (EntityId u : unseen) entries.push_back(nearest(p, kg, text, u));
  return finish(model, std::move(entries));
}

KgeModel random_baseline(const KgeModel& model, std::span<const EntityId> unseen, std::uint64_t seed) {
  KgeModel out = model;
  std::vector<EntityId> order(unseen.begin(), unseen.end());
  std::sort(order.begin(), order.end());
  Rng rng(derive_seed(seed, 0x7a4d));
  const double bound = 0.5 / static_cast<double>(model.config().dim);
  for (EntityId u : order) {
    for (double& x : out.entity(u)) x = io::to_float32(rng.uniform(-bound, bound));
  }
  return out;
}

}  // namespace kgc

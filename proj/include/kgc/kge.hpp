#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kgc/io.hpp"
#include "kgc/kg.hpp"
#include "kgc/rng.hpp"
#include "kgc/scoreset.hpp"
#include "kgc/splits.hpp"

namespace kgc {

enum class KgeKind { TransE, DistMult, ComplEx, RotatE };

std::string to_string(KgeKind kind);
KgeKind parse_kge_kind(std::string_view text);

struct KgeConfig {
  KgeKind kind = KgeKind::ComplEx;
  std::size_t dim = 500;
  double margin = 1.0;
  double lr = 1e-3;
  std::size_t negatives = 128;
  double l3 = 1e-5;
  std::size_t batch_size = 512;
  std::size_t max_steps = 10000;
  std::size_t eval_every = 500;
  std::uint64_t seed = 0;
};

io::Json to_json(const KgeConfig& config);
KgeConfig kge_config_from_json(const io::Json& j);

/// Entity rows hold dim reals (TransE, DistMult) or dim real parts followed
/// by dim imaginary parts (ComplEx, RotatE). Relation rows hold dim reals,
/// 2*dim for ComplEx, and dim phase angles for RotatE.
std::size_t entity_width(KgeKind kind, std::size_t dim);
std::size_t relation_width(KgeKind kind, std::size_t dim);

/// Score of one triple from raw rows.
double score_rows(KgeKind kind, std::size_t dim, std::span<const double> h, std::span<const double> r,
                  std::span<const double> t);

/// Adds coeff * d(score)/d(row) into the three gradient rows.
void add_score_gradient(KgeKind kind, std::size_t dim, std::span<const double> h, std::span<const double> r,
                        std::span<const double> t, double coeff, std::span<double> gh, std::span<double> gr,
                        std::span<double> gt);

class KgeModel {
 public:
  KgeModel() = default;
  KgeModel(KgeConfig config, std::size_t num_entities, std::size_t num_relations);

  /// Real parts uniform in (-0.5/dim, 0.5/dim); RotatE phases uniform in [0, 2pi).
  static KgeModel initialize(const KgeConfig& config, std::size_t num_entities, std::size_t num_relations);

  const KgeConfig& config() const { return config_; }
  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_relations() const { return num_relations_; }
  std::size_t entity_width() const { return kgc::entity_width(config_.kind, config_.dim); }
  std::size_t relation_width() const { return kgc::relation_width(config_.kind, config_.dim); }

  std::span<const double> entity(EntityId e) const;
  std::span<double> entity(EntityId e);
  std::span<const double> relation(RelationId r) const;
  std::span<double> relation(RelationId r);

  std::vector<double>& entity_table() { return entity_emb_; }
  const std::vector<double>& entity_table() const { return entity_emb_; }
  std::vector<double>& relation_table() { return relation_emb_; }
  const std::vector<double>& relation_table() const { return relation_emb_; }

  double score(const Triple& t) const;

  /// Rounds every parameter to float32 so the in-memory model equals its
  /// persisted form.
  void round_to_float32();

  double best_valid_mrr = 0;
  std::size_t best_step = 0;

 private:
  KgeConfig config_;
  std::size_t num_entities_ = 0;
  std::size_t num_relations_ = 0;
  std::vector<double> entity_emb_;
  std::vector<double> relation_emb_;
};

/// (1/N) * sum max(0, margin - pos + neg_i).
double rank_loss(double positive, std::span<const double> negatives, double margin);

/// Uniform same-type corruption of head or tail, resampling collisions with
/// known training triples up to ten times.
class CorruptionSampler {
 public:
  explicit CorruptionSampler(const KnowledgeGraph& train);

  /// Throws NoCandidates when neither side of `t` has another entity of
  /// the same type.
  std::vector<Triple> sample(const Triple& t, std::size_t n, Rng& rng) const;

  /// Corruptions kept despite colliding with a training triple.
  std::size_t collisions_kept() const { return collisions_kept_; }

 private:
  Triple corrupt_once(const Triple& t, Side side, Rng& rng) const;
  const KnowledgeGraph& train_;
  mutable std::size_t collisions_kept_ = 0;
};

struct TrainingExample {
  Triple positive;
  std::vector<Triple> negatives;
};

/// Mini-batch objective: mean rank loss over the examples plus
/// l3 * sum |x|^3 over the distinct entity and relation rows the batch
/// touches (RotatE phases excluded). When gradients are given they are
/// accumulated (not overwritten) with the objective's gradient.
double batch_objective(const KgeModel& model, std::span<const TrainingExample> batch, double l3,
                       std::vector<double>* entity_grad = nullptr, std::vector<double>* relation_grad = nullptr);

struct TrainingEvent {
  std::size_t step = 0;
  double loss = 0;
  double valid_mrr = 0;
};

/// Adam on the objective above; evaluates validation MRR on the fixed
/// negatives every eval_every steps and returns the best checkpoint.
/// `valid` may be null, in which case the last step is returned.
KgeModel train_kge(const KnowledgeGraph& train, const NegativeSets* valid, const KgeConfig& config,
                   const std::function<void(const TrainingEvent&)>& on_eval = {});

/// Scores every query of `negs`. Parallel over queries.
ScoreSet score_queries(const KgeModel& model, const NegativeSets& negs, std::string model_name,
                       std::string negatives_hash);
ScoreSet score_queries_serial(const KgeModel& model, const NegativeSets& negs, std::string model_name,
                              std::string negatives_hash);

/// `<stem>.json` manifest plus `<stem>.entities.f32` / `<stem>.relations.f32`.
io::Json save_model(const std::filesystem::path& dir, const std::string& stem, const KgeModel& model,
                    const KnowledgeGraph& kg);
KgeModel load_model(const std::filesystem::path& dir, const std::string& stem, const KnowledgeGraph& kg);

}  // namespace kgc

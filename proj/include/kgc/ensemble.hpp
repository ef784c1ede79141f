#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "kgc/classifiers.hpp"
#include "kgc/io.hpp"
#include "kgc/scoreset.hpp"

namespace kgc {

/// Combined ScoreSet from per-query weights: candidate score = sum_i a_i s_i,
/// with one weight vector per query shared by its positive and negatives.
ScoreSet combine_scores(const std::vector<const ScoreSet*>& score_sets, const std::vector<std::vector<double>>& alphas,
                        std::string model_name);

/// One model per query (index into score_sets).
ScoreSet route_scores(const std::vector<const ScoreSet*>& score_sets, const std::vector<int>& choice,
                      std::string model_name);

// --- global weighted average ------------------------------------------------

/// Every alpha with entries in {step, 2*step, ...} summing to 1, in
/// lexicographic order. step must divide 1.
std::vector<std::vector<double>> simplex_grid(std::size_t k, double step = 0.05);

struct GlobalWeights {
  std::vector<double> alpha;
  double valid_mrr = 0;
};

/// Grid search maximizing MRR over the aligned ScoreSets; ties keep the
/// lexicographically smallest alpha. Grid points are evaluated in parallel.
GlobalWeights fit_global_average(const std::vector<const ScoreSet*>& score_sets, double step = 0.05);

// --- router -------------------------------------------------------------------

/// Per query: index of the model with the strictly best (lowest) rank, the
/// lowest index among tied best models, or k ("all-same") when every model
/// gives the same rank. Queries without ranks get -1.
std::vector<int> label_router_targets(const std::vector<std::vector<std::optional<std::size_t>>>& ranks);

enum class RouterKind { LogisticRegression, DecisionTree, Gbdt, Mlp };
std::string to_string(RouterKind kind);
RouterKind parse_router_kind(std::string_view text);

/// One point of a router hyperparameter grid.
struct RouterHyper {
  ml::LogRegParams logreg;
  ml::GbdtParams gbdt;
  ml::MlpParams mlp;
};

io::Json hyper_to_json(RouterKind kind, const RouterHyper& h);

/// The grids searched by default (logreg: 2 penalties x 9 strengths; tree:
/// 3 depths x 3 rates; gbdt: 3 rounds x 3 depths x 3 rates; mlp: 2 x 2 x 3 x 3).
std::vector<RouterHyper> default_router_grid(RouterKind kind);
/// Grid from JSON: object of arrays per hyperparameter, expanded as a
/// Cartesian product. Absent keys take the default grid's values.
std::vector<RouterHyper> router_grid_from_json(RouterKind kind, const io::Json& j);

struct ConstantClassifier {
  std::size_t num_classes = 0;
  int label = 0;
  std::vector<double> predict_proba(std::span<const double>) const;
};

using Classifier = std::variant<ConstantClassifier, ml::LogisticRegression, ml::Gbdt, ml::MlpClassifier>;

struct RouterModel {
  RouterKind kind = RouterKind::Gbdt;
  Classifier classifier;
  std::vector<std::string> model_names;
  std::vector<std::string> feature_names;
  std::string schema_version;
  /// Model used when the router predicts "all-same".
  int all_same_model = 0;
  double cv_accuracy = 0;
  io::Json hyper;
  std::string warning;

  std::size_t num_classes() const { return model_names.size() + 1; }
  std::vector<double> predict_proba(std::span<const double> features) const;
  /// Argmax class (lowest index on ties, so a model beats "all-same" when
  /// they tie), with "all-same" mapped to all_same_model.
  int route(std::span<const double> features) const;
};

struct RouterTrainingData {
  ml::Matrix features;     // one row per query
  std::vector<int> labels;  // from label_router_targets
  std::vector<std::string> model_names;
  std::vector<std::string> feature_names;
  std::string schema_version;
  /// Validation MRR of each model; the best one serves "all-same".
  std::vector<double> model_mrr;
};

struct CvResult {
  io::Json hyper;
  double accuracy = 0;
};

/// 5-fold CV over the grid (configurations x folds in parallel, each fit
/// single-threaded), then a refit of the best configuration on all rows.
/// A single distinct label yields a constant router with a warning.
RouterModel train_router(const RouterTrainingData& data, RouterKind kind, const std::vector<RouterHyper>& grid,
                         std::uint64_t seed, std::vector<CvResult>* cv_log = nullptr, std::size_t folds = 5);

/// Per-feature total gain, descending (ties by column order).
std::vector<std::pair<std::string, double>> feature_importance(const RouterModel& router);

// --- input-dependent weighted average ----------------------------------------------

struct WeighterHyper {
  std::size_t hidden_layers = 1;
  std::size_t width = 128;
  std::size_t batch_size = 128;
  double lr = 1e-2;
  std::size_t negatives = 16;
  double margin = 1.0;
  double l2 = 1e-4;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  double tol = 1e-4;
};

io::Json to_json(const WeighterHyper& h);
/// 2 x 2 x 3 x 3 x 2 grid over layers, width, batch, lr {1e-1, 1e-2, 1e-4} and negatives.
std::vector<WeighterHyper> default_weighter_grid();
std::vector<WeighterHyper> weighter_grid_from_json(const io::Json& j);

struct WeightModel {
  ml::Standardizer standardizer;
  ml::MlpNet net;
  std::vector<std::string> model_names;
  std::vector<std::string> feature_names;
  std::string schema_version;
  io::Json hyper;
  double holdout_mrr = 0;

  /// Softmax weights over the models.
  std::vector<double> weights(std::span<const double> features) const;
};

/// Trains the softmax-output MLP with the max-margin loss over combined
/// scores. Hyperparameters are chosen by MRR on a held-out 20% of the
/// triples, then the chosen configuration is refit on all queries.
/// `features` has one row per query.
WeightModel train_weighter(const ml::Matrix& features, const std::vector<const ScoreSet*>& score_sets,
                           const std::vector<std::string>& feature_names, const std::string& schema_version,
                           const std::vector<WeighterHyper>& grid, std::uint64_t seed);

/// Fits one configuration (no selection).
WeightModel fit_weighter(const ml::Matrix& features, const std::vector<const ScoreSet*>& score_sets,
                         const std::vector<std::size_t>& queries, const WeighterHyper& hyper, std::uint64_t seed);

// --- integration ----------------------------------------------------------------------

ScoreSet integrate_global(const GlobalWeights& weights, const std::vector<const ScoreSet*>& score_sets);
/// `features` has one row per query. SchemaMismatch when the router was
/// trained on different columns or models.
ScoreSet integrate_router(const RouterModel& router, const std::vector<const ScoreSet*>& score_sets,
                          const ml::Matrix& features, const std::vector<std::string>& feature_names);
ScoreSet integrate_weighter(const WeightModel& model, const std::vector<const ScoreSet*>& score_sets,
                            const ml::Matrix& features, const std::vector<std::string>& feature_names);

/// Routes every query to the model with its best rank (lowest index on ties).
ScoreSet oracle_route(const std::vector<const ScoreSet*>& score_sets);

// --- persistence: JSON structure plus a float32 block --------------------------------

void save_router(const std::filesystem::path& dir, const std::string& stem, const RouterModel& router);
RouterModel load_router(const std::filesystem::path& dir, const std::string& stem);
void save_weighter(const std::filesystem::path& dir, const std::string& stem, const WeightModel& model);
WeightModel load_weighter(const std::filesystem::path& dir, const std::string& stem);
void save_global(const std::filesystem::path& dir, const std::string& stem, const GlobalWeights& weights,
                 const std::vector<std::string>& model_names);
GlobalWeights load_global(const std::filesystem::path& dir, const std::string& stem,
                          std::vector<std::string>* model_names = nullptr);

/// Rounds the trainable parameters to float32 so saved and in-memory
/// models predict identically.
void round_to_float32(RouterModel& router);
void round_to_float32(WeightModel& model);

/// Rows of a per-triple feature matrix expanded to one row per query.
ml::Matrix rows_per_query(const std::vector<std::vector<double>>& per_triple);

}  // namespace kgc

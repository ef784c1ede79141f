#include "kgc/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kgc/error.hpp"
#include "kgc/evaluate.hpp"
#include "kgc/io.hpp"
#include "kgc/rng.hpp"

namespace kgc {

namespace {

void check_all_aligned(const std::vector<const ScoreSet*>& score_sets) {
  if (score_sets.empty()) fail(ErrorCode::InvalidArgument, "no score sets to integrate");
  for (const ScoreSet* s : score_sets) check_aligned(*score_sets.front(), *s);
}

template <typename AlphaFn>
std::size_t rank_combined(const std::vector<const ScoreSet*>& sets, std::size_t q, AlphaFn alpha) {
  const std::size_t k = sets.size();
  double pos = 0;
  for (std::size_t i = 0; i < k; ++i) pos += alpha(i) * sets[i]->queries[q].positive;
  std::size_t rank = 1;
  const std::size_t m = sets.front()->queries[q].negatives.size();
  for (std::size_t j = 0; j < m; ++j) {
    double neg = 0;
    for (std::size_t i = 0; i < k; ++i) neg += alpha(i) * sets[i]->queries[q].negatives[j];
    rank += neg >= pos;
  }
  return rank;
}

std::vector<std::string> names_of(const std::vector<const ScoreSet*>& sets) {
  std::vector<std::string> names;
  for (const ScoreSet* s : sets) names.push_back(s->model_name);
  return names;
}

}  // namespace

ScoreSet combine_scores(const std::vector<const ScoreSet*>& score_sets, const std::vector<std::vector<double>>& alphas,
                        std::string model_name) {
  check_all_aligned(score_sets);
  const ScoreSet& first = *score_sets.front();
  if (alphas.size() != first.queries.size()) {
    fail(ErrorCode::MisalignedScoreSets, "need one weight vector per query");
  }
  ScoreSet out;
  out.model_name = std::move(model_name);
  out.negatives_hash = first.negatives_hash;
  out.queries.resize(first.queries.size());
  const auto nq = static_cast<std::int64_t>(first.queries.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t q = 0; q < nq; ++q) {
    const auto& a = alphas[q];
    QueryScores& dst = out.queries[q];
    dst.triple_index = first.queries[q].triple_index;
    dst.side = first.queries[q].side;
    dst.positive = 0;
    dst.negatives.assign(first.queries[q].negatives.size(), 0.0);
    for (std::size_t i = 0; i < score_sets.size(); ++i) {
      const QueryScores& src = score_sets[i]->queries[q];
      dst.positive += a[i] * src.positive;
      for (std::size_t j = 0; j < src.negatives.size(); ++j) dst.negatives[j] += a[i] * src.negatives[j];
    }
  }
  return out;
}

ScoreSet route_scores(const std::vector<const ScoreSet*>& score_sets, const std::vector<int>& choice,
                      std::string model_name) {
  std::vector<std::vector<double>> alphas(choice.size(), std::vector<double>(score_sets.size(), 0.0));
  for (std::size_t q = 0; q < choice.size(); ++q) {
    if (choice[q] < 0 || static_cast<std::size_t>(choice[q]) >= score_sets.size()) {
      fail(ErrorCode::InvalidArgument, "routing choice out of range");
    }
    alphas[q][choice[q]] = 1.0;
  }
  return combine_scores(score_sets, alphas, std::move(model_name));
}

std::vector<std::vector<double>> simplex_grid(std::size_t k, double step) {
  const auto units = static_cast<int>(std::lround(1.0 / step));
  if (k == 0 || std::abs(units * step - 1.0) > 1e-9) fail(ErrorCode::InvalidArgument, "step must divide 1");
  std::vector<std::vector<double>> grid;
  std::vector<int> parts(k, 0);
  // Enumerate compositions of `units` into k positive parts, first part
  // varying slowest, so the output is lexicographically ascending.
  auto recurse = [&](auto&& self, std::size_t i, int remaining) -> void {
    if (i + 1 == k) {
      if (remaining < 1) return;
      parts[i] = remaining;
      std::vector<double> alpha(k);
      for (std::size_t j = 0; j < k; ++j) alpha[j] = static_cast<double>(parts[j]) / units;
      grid.push_back(std::move(alpha));
      return;
    }
    const int slots_after = static_cast<int>(k - i - 1);
    for (int c = 1; c <= remaining - slots_after; ++c) {
      parts[i] = c;
      self(self, i + 1, remaining - c);
    }
  };
  if (k == 1) return {{1.0}};
  recurse(recurse, 0, units);
  return grid;
}

GlobalWeights fit_global_average(const std::vector<const ScoreSet*>& score_sets, double step) {
  check_all_aligned(score_sets);
  const auto grid = simplex_grid(score_sets.size(), step);
  const std::size_t nq = score_sets.front()->queries.size();
  std::vector<double> mrr(grid.size());
  const auto ng = static_cast<std::int64_t>(grid.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t g = 0; g < ng; ++g) {
    std::vector<std::optional<std::size_t>> ranks(nq);
    for (std::size_t q = 0; q < nq; ++q) {
      if (score_sets.front()->queries[q].negatives.empty()) continue;
      ranks[q] = rank_combined(score_sets, q, [&](std::size_t i) { return grid[g][i]; });
    }
    mrr[g] = metrics_from_ranks(ranks).mrr;
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (mrr[g] > mrr[best]) best = g;
  }
  return {grid[best], mrr[best]};
}

std::vector<int> label_router_targets(const std::vector<std::vector<std::optional<std::size_t>>>& ranks) {
  if (ranks.empty()) return {};
  const std::size_t k = ranks.size();
  const std::size_t nq = ranks.front().size();
  std::vector<int> labels(nq, -1);
  for (std::size_t q = 0; q < nq; ++q) {
    if (!ranks[0][q]) continue;
    std::size_t best = 0;
    bool all_same = true;
    for (std::size_t i = 1; i < k; ++i) {
      if (*ranks[i][q] != *ranks[0][q]) all_same = false;
      if (*ranks[i][q] < *ranks[best][q]) best = i;
    }
    labels[q] = all_same ? static_cast<int>(k) : static_cast<int>(best);
  }
  return labels;
}

std::string to_string(RouterKind kind) {
  switch (kind) {
    case RouterKind::LogisticRegression: return "logistic-regression";
    case RouterKind::DecisionTree: return "decision-tree";
    case RouterKind::Gbdt: return "gbdt";
    case RouterKind::Mlp: return "mlp";
  }
  return "unknown";
}

RouterKind parse_router_kind(std::string_view text) {
  if (text == "logistic-regression" || text == "logreg") return RouterKind::LogisticRegression;
  if (text == "decision-tree" || text == "tree") return RouterKind::DecisionTree;
  if (text == "gbdt") return RouterKind::Gbdt;
  if (text == "mlp") return RouterKind::Mlp;
  fail(ErrorCode::UnsupportedRouterKind, "unknown router kind '" + std::string(text) + "'");
}

io::Json hyper_to_json(RouterKind kind, const RouterHyper& h) {
  switch (kind) {
    case RouterKind::LogisticRegression:
      return {{"penalty", h.logreg.penalty == ml::Penalty::L1 ? "l1" : "l2"}, {"c", h.logreg.c}};
    case RouterKind::DecisionTree:
      return {{"max_depth", h.gbdt.max_depth}, {"learning_rate", h.gbdt.learning_rate}};
    case RouterKind::Gbdt:
      return {{"rounds", h.gbdt.rounds}, {"max_depth", h.gbdt.max_depth}, {"learning_rate", h.gbdt.learning_rate}};
    case RouterKind::Mlp:
      return {{"hidden_layers", h.mlp.hidden_layers},
              {"width", h.mlp.width},
              {"batch_size", h.mlp.batch_size},
              {"lr", h.mlp.lr}};
  }
  return {};
}

namespace {

template <typename T>
std::vector<T> values_or(const io::Json& j, const char* key, std::vector<T> fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<std::vector<T>>();
}

std::vector<RouterHyper> expand_grid(RouterKind kind, const io::Json& j) {
  std::vector<RouterHyper> grid;
  switch (kind) {
    case RouterKind::LogisticRegression: {
      std::vector<double> cs;
      for (int e = -5; e <= 3; ++e) cs.push_back(std::pow(10.0, e));
      for (const auto& p : values_or<std::string>(j, "penalty", {"l1", "l2"})) {
        for (double c : values_or<double>(j, "c", cs)) {
          RouterHyper h;
          h.logreg.penalty = p == "l1" ? ml::Penalty::L1 : ml::Penalty::L2;
          h.logreg.c = c;
          grid.push_back(h);
        }
      }
      break;
    }
    case RouterKind::DecisionTree:
    case RouterKind::Gbdt: {
      const std::vector<std::size_t> rounds =
          kind == RouterKind::DecisionTree ? std::vector<std::size_t>{1}
                                           : values_or<std::size_t>(j, "rounds", {100, 500, 1000});
      for (auto r : rounds) {
        for (auto depth : values_or<std::size_t>(j, "max_depth", {2, 4, 8})) {
          for (double lr : values_or<double>(j, "learning_rate", {1e-1, 1e-2, 1e-3})) {
            RouterHyper h;
            h.gbdt.rounds = r;
            h.gbdt.max_depth = depth;
            h.gbdt.learning_rate = lr;
            grid.push_back(h);
          }
        }
      }
      break;
    }
    case RouterKind::Mlp:
      for (auto layers : values_or<std::size_t>(j, "hidden_layers", {1, 2})) {
        for (auto width : values_or<std::size_t>(j, "width", {128, 256})) {
          for (auto batch : values_or<std::size_t>(j, "batch_size", {64, 128, 256})) {
            for (double lr : values_or<double>(j, "lr", {1e-1, 1e-2, 1e-3})) {
              RouterHyper h;
              h.mlp.hidden_layers = layers;
              h.mlp.width = width;
              h.mlp.batch_size = batch;
              h.mlp.lr = lr;
              if (j.contains("max_epochs")) h.mlp.max_epochs = j.at("max_epochs").get<std::size_t>();
              grid.push_back(h);
            }
          }
        }
      }
      break;
  }
  if (grid.empty()) fail(ErrorCode::InvalidArgument, "empty hyperparameter grid");
  return grid;
}

}  // namespace

std::vector<RouterHyper> default_router_grid(RouterKind kind) { return expand_grid(kind, io::Json::object()); }

std::vector<RouterHyper> router_grid_from_json(RouterKind kind, const io::Json& j) { return expand_grid(kind, j); }

std::vector<double> ConstantClassifier::predict_proba(std::span<const double>) const {
  std::vector<double> p(num_classes, 0.0);
  p[label] = 1.0;
  return p;
}

std::vector<double> RouterModel::predict_proba(std::span<const double> features) const {
  return std::visit([&](const auto& c) { return c.predict_proba(features); }, classifier);
}

int RouterModel::route(std::span<const double> features) const {
  const auto p = predict_proba(features);
  const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  return best == model_names.size() ? all_same_model : static_cast<int>(best);
}

namespace {

Classifier fit_classifier(RouterKind kind, const RouterHyper& h, const ml::Matrix& x, std::span<const int> y,
                          std::size_t num_classes, std::uint64_t seed) {
  switch (kind) {
    case RouterKind::LogisticRegression: return ml::LogisticRegression::fit(x, y, num_classes, h.logreg);
    case RouterKind::DecisionTree:
    case RouterKind::Gbdt: return ml::Gbdt::fit(x, y, num_classes, h.gbdt);
    case RouterKind::Mlp: return ml::MlpClassifier::fit(x, y, num_classes, h.mlp, seed);
  }
  fail(ErrorCode::UnsupportedRouterKind, "unknown router kind");
}

int argmax(const std::vector<double>& p) {
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace

RouterModel train_router(const RouterTrainingData& data, RouterKind kind, const std::vector<RouterHyper>& grid,
                         std::uint64_t seed, std::vector<CvResult>* cv_log, std::size_t folds) {
  // Queries without a label (empty pools) do not take part.
  ml::Matrix x;
  std::vector<int> y;
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    if (data.labels[i] < 0) continue;
    x.push_back(data.features[i]);
    y.push_back(data.labels[i]);
  }
  RouterModel router;
  router.kind = kind;
  router.model_names = data.model_names;
  router.feature_names = data.feature_names;
  router.schema_version = data.schema_version;
  const std::size_t num_classes = data.model_names.size() + 1;
  if (!data.model_mrr.empty()) {
    router.all_same_model = static_cast<int>(std::max_element(data.model_mrr.begin(), data.model_mrr.end()) -
                                             data.model_mrr.begin());
  }
  if (x.empty()) fail(ErrorCode::InvalidArgument, "no labelled queries to train a router on");
  if (grid.empty()) fail(ErrorCode::InvalidArgument, "empty hyperparameter grid");

  std::vector<int> distinct = y;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() == 1) {
    router.classifier = ConstantClassifier{num_classes, distinct.front()};
    router.cv_accuracy = 1.0;
    router.hyper = io::Json::object();
    router.warning = "DegenerateLabels: every query has label " + std::to_string(distinct.front()) +
                     "; using a constant router";
    return router;
  }

  folds = std::min(folds, x.size());
  const auto fold_of = ml::kfold_assignment(x.size(), folds, seed);
  std::vector<double> fold_accuracy(grid.size() * folds, 0.0);
  const auto jobs = static_cast<std::int64_t>(grid.size() * folds);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t job = 0; job < jobs; ++job) {
    const std::size_t g = static_cast<std::size_t>(job) / folds;
    const int f = static_cast<int>(static_cast<std::size_t>(job) % folds);
    ml::Matrix train_x, test_x;
    std::vector<int> train_y, test_y;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (fold_of[i] == f) {
        test_x.push_back(x[i]);
        test_y.push_back(y[i]);
      } else {
        train_x.push_back(x[i]);
        train_y.push_back(y[i]);
      }
    }
    if (test_x.empty() || train_x.empty()) continue;
    const Classifier c = fit_classifier(kind, grid[g], train_x, train_y, num_classes, derive_seed(seed, g, f));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test_x.size(); ++i) {
      const auto p = std::visit([&](const auto& m) { return m.predict_proba(test_x[i]); }, c);
      correct += argmax(p) == test_y[i];
    }
    fold_accuracy[job] = static_cast<double>(correct) / static_cast<double>(test_x.size());
  }

  std::size_t best = 0;
  std::vector<double> mean_accuracy(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t f = 0; f < folds; ++f) mean_accuracy[g] += fold_accuracy[g * folds + f];
    mean_accuracy[g] /= static_cast<double>(folds);
    if (cv_log) cv_log->push_back({hyper_to_json(kind, grid[g]), mean_accuracy[g]});
    if (mean_accuracy[g] > mean_accuracy[best]) best = g;
  }
  router.classifier = fit_classifier(kind, grid[best], x, y, num_classes, derive_seed(seed, 0xf1f1));
  router.cv_accuracy = mean_accuracy[best];
  router.hyper = hyper_to_json(kind, grid[best]);
  round_to_float32(router);
  return router;
}

std::vector<std::pair<std::string, double>> feature_importance(const RouterModel& router) {
  if (router.kind != RouterKind::Gbdt && router.kind != RouterKind::DecisionTree) {
    fail(ErrorCode::UnsupportedRouterKind, "feature importance needs a tree router, got " + to_string(router.kind));
  }
  std::vector<double> gain(router.feature_names.size(), 0.0);
  if (const auto* g = std::get_if<ml::Gbdt>(&router.classifier)) gain = g->feature_gain();
  std::vector<std::size_t> order(gain.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return gain[a] > gain[b]; });
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i : order) out.emplace_back(router.feature_names[i], gain[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Input-dependent weighted average

io::Json to_json(const WeighterHyper& h) {
  return {{"hidden_layers", h.hidden_layers}, {"width", h.width},   {"batch_size", h.batch_size},
          {"lr", h.lr},                       {"negatives", h.negatives}, {"margin", h.margin}};
}

std::vector<WeighterHyper> weighter_grid_from_json(const io::Json& j) {
  std::vector<WeighterHyper> grid;
  for (auto layers : values_or<std::size_t>(j, "hidden_layers", {1, 2})) {
    for (auto width : values_or<std::size_t>(j, "width", {128, 256})) {
      for (auto batch : values_or<std::size_t>(j, "batch_size", {64, 128, 256})) {
        for (double lr : values_or<double>(j, "lr", {1e-1, 1e-2, 1e-4})) {
          for (auto negs : values_or<std::size_t>(j, "negatives", {16, 32})) {
            WeighterHyper h;
            h.hidden_layers = layers;
            h.width = width;
            h.batch_size = batch;
            h.lr = lr;
            h.negatives = negs;
            if (j.contains("max_epochs")) h.max_epochs = j.at("max_epochs").get<std::size_t>();
            grid.push_back(h);
          }
        }
      }
    }
  }
  if (grid.empty()) fail(ErrorCode::InvalidArgument, "empty hyperparameter grid");
  return grid;
}

std::vector<WeighterHyper> default_weighter_grid() { return weighter_grid_from_json(io::Json::object()); }

std::vector<double> WeightModel::weights(std::span<const double> features) const {
  return ml::softmax(net.logits(standardizer.apply(features)));
}

WeightModel fit_weighter(const ml::Matrix& features, const std::vector<const ScoreSet*>& score_sets,
                         const std::vector<std::size_t>& queries, const WeighterHyper& hyper, std::uint64_t seed) {
  check_all_aligned(score_sets);
  const std::size_t k = score_sets.size();
  std::vector<std::size_t> usable;
  for (std::size_t q : queries) {
    if (!score_sets.front()->queries[q].negatives.empty()) usable.push_back(q);
  }
  if (usable.empty()) fail(ErrorCode::InvalidArgument, "no queries with negatives to train the weighter on");

  WeightModel model;
  model.model_names = names_of(score_sets);
  model.hyper = to_json(hyper);
  ml::Matrix train_rows;
  for (std::size_t q : usable) train_rows.push_back(features[q]);
  model.standardizer = ml::Standardizer::fit(train_rows);
  ml::Matrix z(features.size());
  for (std::size_t q : usable) z[q] = model.standardizer.apply(features[q]);
  const std::vector<std::size_t> hidden(hyper.hidden_layers, hyper.width);
  model.net = ml::MlpNet(features.front().size(), hidden, k, derive_seed(seed, 0x3e1));

  Rng rng(derive_seed(seed, 0x3e2));
  ml::MlpAdam adam(model.net, hyper.lr);
  std::vector<ml::Row> acts;
  std::vector<std::size_t> picks;
  const std::size_t batch = std::min(hyper.batch_size, usable.size());
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    rng.shuffle(std::span(usable));
    double epoch_loss = 0;
    for (std::size_t start = 0; start < usable.size(); start += batch) {
      const std::size_t end = std::min(usable.size(), start + batch);
      const auto bs = static_cast<double>(end - start);
      auto grads = model.net.zero_like();
      double loss = 0;
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t q = usable[b];
        model.net.forward(z[q], acts);
        const auto alpha = ml::softmax(acts.back());
        const std::size_t m = score_sets.front()->queries[q].negatives.size();
        const std::size_t take = std::min(hyper.negatives, m);
        picks.resize(m);
        std::iota(picks.begin(), picks.end(), std::size_t{0});
        for (std::size_t i = 0; i < take; ++i) std::swap(picks[i], picks[i + rng.uniform_index(m - i)]);

        double pos = 0;
        for (std::size_t i = 0; i < k; ++i) pos += alpha[i] * score_sets[i]->queries[q].positive;
        std::vector<double> galpha(k, 0.0);
        for (std::size_t s = 0; s < take; ++s) {
          const std::size_t j = picks[s];
          double neg = 0;
          for (std::size_t i = 0; i < k; ++i) neg += alpha[i] * score_sets[i]->queries[q].negatives[j];
          const double hinge = hyper.margin - pos + neg;
          if (hinge <= 0) continue;
          loss += hinge / static_cast<double>(take);
          for (std::size_t i = 0; i < k; ++i) {
            galpha[i] += (score_sets[i]->queries[q].negatives[j] - score_sets[i]->queries[q].positive) /
                         static_cast<double>(take);
          }
        }
        double dot = 0;
        for (std::size_t i = 0; i < k; ++i) dot += alpha[i] * galpha[i];
        std::vector<double> dlogits(k);
        for (std::size_t i = 0; i < k; ++i) dlogits[i] = alpha[i] * (galpha[i] - dot) / bs;
        model.net.backward(acts, dlogits, grads);
      }
      double sq = 0;
      auto& layers = model.net.layers();
      for (std::size_t li = 0; li < layers.size(); ++li) {
        for (std::size_t j = 0; j < layers[li].w.size(); ++j) {
          sq += layers[li].w[j] * layers[li].w[j];
          grads[li].w[j] += hyper.l2 * layers[li].w[j] / bs;
        }
      }
      loss = loss / bs + 0.5 * hyper.l2 * sq / bs;
      if (!std::isfinite(loss)) fail(ErrorCode::NonFiniteLoss, "weighter loss diverged in epoch " + std::to_string(epoch));
      epoch_loss += loss * bs;
      adam.step(model.net, grads);
    }
    epoch_loss /= static_cast<double>(usable.size());
    stale = epoch_loss > best_loss - hyper.tol ? stale + 1 : 0;
    best_loss = std::min(best_loss, epoch_loss);
    if (stale > hyper.patience) break;
  }
  round_to_float32(model);
  return model;
}

namespace {

double weighter_mrr(const WeightModel& model, const ml::Matrix& features,
                    const std::vector<const ScoreSet*>& score_sets, const std::vector<std::size_t>& queries) {
  std::vector<std::optional<std::size_t>> ranks;
  for (std::size_t q : queries) {
    if (score_sets.front()->queries[q].negatives.empty()) continue;
    const auto alpha = model.weights(features[q]);
    ranks.push_back(rank_combined(score_sets, q, [&](std::size_t i) { return alpha[i]; }));
  }
  return metrics_from_ranks(ranks).mrr;
}

}  // namespace

WeightModel train_weighter(const ml::Matrix& features, const std::vector<const ScoreSet*>& score_sets,
                           const std::vector<std::string>& feature_names, const std::string& schema_version,
                           const std::vector<WeighterHyper>& grid, std::uint64_t seed) {
  check_all_aligned(score_sets);
  const std::size_t nq = score_sets.front()->queries.size();
  if (features.size() != nq) fail(ErrorCode::SchemaMismatch, "need one feature row per query");
  if (grid.empty()) fail(ErrorCode::InvalidArgument, "empty hyperparameter grid");

  // Hold out 20% of the triples (both sides of a triple stay together).
  const std::size_t triples = nq / 2;
  std::vector<std::size_t> perm(triples);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x401d));
  rng.shuffle(std::span(perm));
  const std::size_t n_hold = triples >= 2 ? std::max<std::size_t>(1, triples / 5) : 0;
  std::vector<char> held(triples, 0);
  for (std::size_t i = 0; i < n_hold; ++i) held[perm[i]] = 1;
  std::vector<std::size_t> fit_q, hold_q, all_q;
  for (std::size_t q = 0; q < nq; ++q) {
    (held[q / 2] ? hold_q : fit_q).push_back(q);
    all_q.push_back(q);
  }

  std::size_t best = 0;
  double best_mrr = -1;
  if (grid.size() > 1 && !hold_q.empty()) {
    std::vector<double> mrr(grid.size(), -1.0);
    const auto ng = static_cast<std::int64_t>(grid.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t g = 0; g < ng; ++g) {
      const WeightModel m = fit_weighter(features, score_sets, fit_q, grid[g], derive_seed(seed, g));
      mrr[g] = weighter_mrr(m, features, score_sets, hold_q);
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
      if (mrr[g] > best_mrr) {
        best_mrr = mrr[g];
        best = g;
      }
    }
  }
  WeightModel model = fit_weighter(features, score_sets, all_q, grid[best], derive_seed(seed, 0xf1f1));
  model.feature_names = feature_names;
  model.schema_version = schema_version;
  model.holdout_mrr = best_mrr < 0 ? 0.0 : best_mrr;
  return model;
}

// ---------------------------------------------------------------------------
// Integration

namespace {

void check_schema(const std::vector<std::string>& expected_models, const std::vector<std::string>& expected_features,
                  const std::vector<const ScoreSet*>& score_sets, const ml::Matrix& features,
                  const std::vector<std::string>& feature_names) {
  if (names_of(score_sets) != expected_models) {
    fail(ErrorCode::SchemaMismatch, "score sets do not match the integrator's model list");
  }
  if (feature_names != expected_features) {
    fail(ErrorCode::SchemaMismatch, "feature columns differ from those the integrator was trained on");
  }
  if (features.size() != score_sets.front()->queries.size()) {
    fail(ErrorCode::SchemaMismatch, "need one feature row per query");
  }
}

}  // namespace

ScoreSet integrate_global(const GlobalWeights& weights, const std::vector<const ScoreSet*>& score_sets) {
  check_all_aligned(score_sets);
  if (weights.alpha.size() != score_sets.size()) fail(ErrorCode::SchemaMismatch, "weight count differs from model count");
  std::vector<std::vector<double>> alphas(score_sets.front()->queries.size(), weights.alpha);
  return combine_scores(score_sets, alphas, "global-average");
}

ScoreSet integrate_router(const RouterModel& router, const std::vector<const ScoreSet*>& score_sets,
                          const ml::Matrix& features, const std::vector<std::string>& feature_names) {
  check_all_aligned(score_sets);
  check_schema(router.model_names, router.feature_names, score_sets, features, feature_names);
  std::vector<int> choice(features.size());
  const auto n = static_cast<std::int64_t>(features.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t q = 0; q < n; ++q) choice[q] = router.route(features[q]);
  return route_scores(score_sets, choice, "router-" + to_string(router.kind));
}

ScoreSet integrate_weighter(const WeightModel& model, const std::vector<const ScoreSet*>& score_sets,
                            const ml::Matrix& features, const std::vector<std::string>& feature_names) {
  check_all_aligned(score_sets);
  check_schema(model.model_names, model.feature_names, score_sets, features, feature_names);
  std::vector<std::vector<double>> alphas(features.size());
  const auto n = static_cast<std::int64_t>(features.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t q = 0; q < n; ++q) alphas[q] = model.weights(features[q]);
  return combine_scores(score_sets, alphas, "weighted-average");
}

ScoreSet oracle_route(const std::vector<const ScoreSet*>& score_sets) {
  check_all_aligned(score_sets);
  std::vector<std::vector<std::optional<std::size_t>>> ranks;
  for (const ScoreSet* s : score_sets) ranks.push_back(compute_ranks(*s));
  std::vector<int> choice(ranks.front().size(), 0);
  for (std::size_t q = 0; q < choice.size(); ++q) {
    if (!ranks[0][q]) continue;
    for (std::size_t i = 1; i < ranks.size(); ++i) {
      if (*ranks[i][q] < *ranks[choice[q]][q]) choice[q] = static_cast<int>(i);
    }
  }
  return route_scores(score_sets, choice, "oracle-router");
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

template <typename Model>
std::vector<double> flatten(Model& m) {
  std::vector<double> out;
  m.visit([&](double& v) { out.push_back(v); });
  return out;
}

template <typename Model>
void unflatten(Model& m, const std::vector<double>& values, const std::string& what) {
  std::size_t i = 0;
  m.visit([&](double& v) {
    if (i < values.size()) v = values[i];
    ++i;
  });
  if (i != values.size()) fail(ErrorCode::MalformedLine, what + ": parameter block has the wrong size");
}

template <typename Model>
void round_model(Model& m) {
  m.visit([](double& v) { v = io::to_float32(v); });
}

}  // namespace

void round_to_float32(RouterModel& router) {
  std::visit(
      [](auto& c) {
        if constexpr (!std::is_same_v<std::decay_t<decltype(c)>, ConstantClassifier>) round_model(c);
      },
      router.classifier);
}

void round_to_float32(WeightModel& model) {
  model.standardizer.visit([](double& v) { v = io::to_float32(v); });
  round_model(model.net);
}

void save_router(const std::filesystem::path& dir, const std::string& stem, const RouterModel& router) {
  RouterModel copy = router;
  io::Json classifier;
  std::vector<double> params;
  std::visit(
      [&](auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ConstantClassifier>) {
          classifier = {{"type", "constant"}, {"num_classes", c.num_classes}, {"label", c.label}};
        } else {
          const char* type = std::is_same_v<T, ml::LogisticRegression> ? "logistic-regression"
                             : std::is_same_v<T, ml::Gbdt>             ? "gbdt"
                                                                       : "mlp";
          classifier = {{"type", type}, {"structure", c.structure()}};
          params = flatten(c);
        }
      },
      copy.classifier);
  const auto block = dir / (stem + ".f32");
  io::write_f32(block, params);
  io::Json j;
  j["kind"] = to_string(router.kind);
  j["model_names"] = router.model_names;
  j["classes"] = router.model_names;
  j["classes"].push_back("all-same");
  j["feature_names"] = router.feature_names;
  j["schema_version"] = router.schema_version;
  j["all_same_model"] = router.all_same_model;
  j["cv_accuracy"] = router.cv_accuracy;
  j["hyper"] = router.hyper;
  j["warning"] = router.warning;
  j["classifier"] = classifier;
  j["params_sha256"] = io::sha256_file(block);
  io::write_json(dir / (stem + ".json"), j);
}

RouterModel load_router(const std::filesystem::path& dir, const std::string& stem) {
  const io::Json j = io::read_json(dir / (stem + ".json"));
  const auto block = dir / (stem + ".f32");
  if (io::sha256_file(block) != j.at("params_sha256").get<std::string>()) {
    fail(ErrorCode::HashMismatch, block.string() + " does not match its manifest");
  }
  RouterModel router;
  router.kind = parse_router_kind(j.at("kind").get<std::string>());
  router.model_names = j.at("model_names").get<std::vector<std::string>>();
  router.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  router.schema_version = j.at("schema_version").get<std::string>();
  router.all_same_model = j.at("all_same_model").get<int>();
  router.cv_accuracy = j.at("cv_accuracy").get<double>();
  router.hyper = j.at("hyper");
  router.warning = j.value("warning", std::string());
  const auto& c = j.at("classifier");
  const auto type = c.at("type").get<std::string>();
  const auto params = io::read_f32(block);
  if (type == "constant") {
    router.classifier = ConstantClassifier{c.at("num_classes").get<std::size_t>(), c.at("label").get<int>()};
  } else if (type == "logistic-regression") {
    auto m = ml::LogisticRegression::from_structure(c.at("structure"));
    unflatten(m, params, stem);
    router.classifier = std::move(m);
  } else if (type == "gbdt") {
    auto m = ml::Gbdt::from_structure(c.at("structure"));
    unflatten(m, params, stem);
    router.classifier = std::move(m);
  } else if (type == "mlp") {
    auto m = ml::MlpClassifier::from_structure(c.at("structure"));
    unflatten(m, params, stem);
    router.classifier = std::move(m);
  } else {
    fail(ErrorCode::UnsupportedRouterKind, "unknown classifier type '" + type + "'");
  }
  return router;
}

void save_weighter(const std::filesystem::path& dir, const std::string& stem, const WeightModel& model) {
  WeightModel copy = model;
  std::vector<double> params;
  copy.standardizer.visit([&](double& v) { params.push_back(v); });
  copy.net.visit([&](double& v) { params.push_back(v); });
  const auto block = dir / (stem + ".f32");
  io::write_f32(block, params);
  io::Json j;
  j["kind"] = "weighted-average";
  j["model_names"] = model.model_names;
  j["feature_names"] = model.feature_names;
  j["schema_version"] = model.schema_version;
  j["hyper"] = model.hyper;
  j["holdout_mrr"] = model.holdout_mrr;
  j["net"] = model.net.structure();
  j["num_features"] = model.standardizer.mean.size();
  j["params_sha256"] = io::sha256_file(block);
  io::write_json(dir / (stem + ".json"), j);
}

WeightModel load_weighter(const std::filesystem::path& dir, const std::string& stem) {
  const io::Json j = io::read_json(dir / (stem + ".json"));
  const auto block = dir / (stem + ".f32");
  if (io::sha256_file(block) != j.at("params_sha256").get<std::string>()) {
    fail(ErrorCode::HashMismatch, block.string() + " does not match its manifest");
  }
  WeightModel m;
  m.model_names = j.at("model_names").get<std::vector<std::string>>();
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.schema_version = j.at("schema_version").get<std::string>();
  m.hyper = j.at("hyper");
  m.holdout_mrr = j.at("holdout_mrr").get<double>();
  const auto d = j.at("num_features").get<std::size_t>();
  m.standardizer.mean.assign(d, 0.0);
  m.standardizer.scale.assign(d, 1.0);
  m.net = ml::MlpNet::from_structure(j.at("net"));
  const auto params = io::read_f32(block);
  std::size_t i = 0;
  auto fill = [&](double& v) {
    if (i < params.size()) v = params[i];
    ++i;
  };
  m.standardizer.visit(fill);
  m.net.visit(fill);
  if (i != params.size()) fail(ErrorCode::MalformedLine, stem + ": parameter block has the wrong size");
  return m;
}

void save_global(const std::filesystem::path& dir, const std::string& stem, const GlobalWeights& weights,
                 const std::vector<std::string>& model_names) {
  io::Json j;
  j["kind"] = "global-average";
  j["model_names"] = model_names;
  j["alpha"] = weights.alpha;
  j["valid_mrr"] = weights.valid_mrr;
  io::write_json(dir / (stem + ".json"), j);
}

GlobalWeights load_global(const std::filesystem::path& dir, const std::string& stem,
                          std::vector<std::string>* model_names) {
  const io::Json j = io::read_json(dir / (stem + ".json"));
  GlobalWeights w;
  w.alpha = j.at("alpha").get<std::vector<double>>();
  w.valid_mrr = j.at("valid_mrr").get<double>();
  if (model_names) *model_names = j.at("model_names").get<std::vector<std::string>>();
  return w;
}

ml::Matrix rows_per_query(const std::vector<std::vector<double>>& per_triple) {
  ml::Matrix out;
  out.reserve(2 * per_triple.size());
  for (const auto& row : per_triple) {
    out.push_back(row);
    out.push_back(row);
  }
  return out;
}

}  // namespace kgc

#include "kgc/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kgc/error.hpp"
#include "kgc/rng.hpp"

namespace kgc::ml {

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  if (x.empty()) return s;
  const std::size_t d = x.front().size();
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 0.0);
  const auto n = static_cast<double>(x.size());
  for (const Row& r : x) {
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
  }
  for (double& m : s.mean) m /= n;
  for (const Row& r : x) {
    for (std::size_t j = 0; j < d; ++j) s.scale[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
  }
  for (double& v : s.scale) {
    v = std::sqrt(v / n);
    if (!(v > 1e-12)) v = 1.0;
  }
  return s;
}

Row Standardizer::apply(std::span<const double> x) const {
  Row out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / scale[j];
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  const double mx = *std::max_element(p.begin(), p.end());
  double z = 0;
  for (double& v : p) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : p) v /= z;
  return p;
}

namespace {

void check_training_data(const Matrix& x, std::span<const int> y, std::size_t num_classes) {
  if (x.empty() || x.size() != y.size()) fail(ErrorCode::InvalidArgument, "empty or mismatched training data");
  const std::size_t d = x.front().size();
  for (const Row& r : x) {
    if (r.size() != d) fail(ErrorCode::SchemaMismatch, "ragged feature matrix");
  }
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
      fail(ErrorCode::InvalidArgument, "label out of range");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Logistic regression

LogisticRegression LogisticRegression::fit(const Matrix& x, std::span<const int> y, std::size_t num_classes,
                                           const LogRegParams& params) {
  check_training_data(x, y, num_classes);
  LogisticRegression model;
  model.num_classes_ = num_classes;
  model.num_features_ = x.front().size();
  model.standardizer_ = Standardizer::fit(x);
  Matrix z;
  z.reserve(x.size());
  for (const Row& r : x) z.push_back(model.standardizer_.apply(r));

  const std::size_t k = num_classes;
  const std::size_t d = model.num_features_;
  const std::size_t nw = k * d;
  const std::size_t np = nw + k;
  const auto n = static_cast<double>(z.size());
  const double reg = 1.0 / (params.c * n);

  // Smooth part: mean cross-entropy, plus the L2 term when penalty is L2.
  auto smooth = [&](const std::vector<double>& theta, std::vector<double>* grad) {
    double loss = 0;
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
    std::vector<double> logits(k);
    for (std::size_t i = 0; i < z.size(); ++i) {
      for (std::size_t c = 0; c < k; ++c) {
        double s = theta[nw + c];
        for (std::size_t j = 0; j < d; ++j) s += theta[c * d + j] * z[i][j];
        logits[c] = s;
      }
      const auto p = softmax(logits);
      loss -= std::log(std::max(p[y[i]], 1e-300)) / n;
      if (grad) {
        for (std::size_t c = 0; c < k; ++c) {
          const double g = (p[c] - (static_cast<int>(c) == y[i] ? 1.0 : 0.0)) / n;
          for (std::size_t j = 0; j < d; ++j) (*grad)[c * d + j] += g * z[i][j];
          (*grad)[nw + c] += g;
        }
      }
    }
    if (params.penalty == Penalty::L2) {
      for (std::size_t j = 0; j < nw; ++j) {
        loss += 0.5 * reg * theta[j] * theta[j];
        if (grad) (*grad)[j] += reg * theta[j];
      }
    }
    return loss;
  };
  auto prox = [&](std::vector<double>& theta, double step) {
    if (params.penalty != Penalty::L1) return;
    const double thr = step * reg;
    for (std::size_t j = 0; j < nw; ++j) {
      const double v = theta[j];
      theta[j] = v > thr ? v - thr : v < -thr ? v + thr : 0.0;
    }
  };

  std::vector<double> current(np, 0.0);
  std::vector<double> extrapolated = current;
  std::vector<double> grad(np);
  std::vector<double> candidate(np);
  double lipschitz = 1.0;
  double momentum = 1.0;
  for (std::size_t iter = 0; iter < params.max_iter; ++iter) {
    const double fy = smooth(extrapolated, &grad);
    while (true) {
      for (std::size_t j = 0; j < np; ++j) candidate[j] = extrapolated[j] - grad[j] / lipschitz;
      prox(candidate, 1.0 / lipschitz);
      double lin = 0;
      double sq = 0;
      for (std::size_t j = 0; j < np; ++j) {
        const double diff = candidate[j] - extrapolated[j];
        lin += grad[j] * diff;
        sq += diff * diff;
      }
      if (smooth(candidate, nullptr) <= fy + lin + 0.5 * lipschitz * sq + 1e-15 || lipschitz > 1e12) break;
      lipschitz *= 2;
    }
    const double next_momentum = 0.5 * (1 + std::sqrt(1 + 4 * momentum * momentum));
    double change = 0;
    double norm = 0;
    for (std::size_t j = 0; j < np; ++j) {
      const double diff = candidate[j] - current[j];
      change += diff * diff;
      norm += candidate[j] * candidate[j];
      extrapolated[j] = candidate[j] + ((momentum - 1) / next_momentum) * diff;
    }
    current = candidate;
    momentum = next_momentum;
    if (std::sqrt(change) <= 1e-9 * std::max(1.0, std::sqrt(norm))) break;
  }
  model.weights_.assign(current.begin(), current.begin() + static_cast<std::ptrdiff_t>(nw));
  model.bias_.assign(current.begin() + static_cast<std::ptrdiff_t>(nw), current.end());
  return model;
}

std::vector<double> LogisticRegression::predict_proba(std::span<const double> x) const {
  const Row z = standardizer_.apply(x);
  std::vector<double> logits(num_classes_);
  for (std::size_t c = 0; c < num_classes_; ++c) {
    double s = bias_[c];
    for (std::size_t j = 0; j < num_features_; ++j) s += weights_[c * num_features_ + j] * z[j];
    logits[c] = s;
  }
  return softmax(logits);
}

io::Json LogisticRegression::structure() const {
  return {{"num_classes", num_classes_}, {"num_features", num_features_}};
}

LogisticRegression LogisticRegression::from_structure(const io::Json& j) {
  LogisticRegression m;
  m.num_classes_ = j.at("num_classes").get<std::size_t>();
  m.num_features_ = j.at("num_features").get<std::size_t>();
  m.standardizer_.mean.assign(m.num_features_, 0.0);
  m.standardizer_.scale.assign(m.num_features_, 1.0);
  m.weights_.assign(m.num_classes_ * m.num_features_, 0.0);
  m.bias_.assign(m.num_classes_, 0.0);
  return m;
}

// ---------------------------------------------------------------------------
// Gradient-boosted trees

double Tree::predict(std::span<const double> x) const {
  int i = 0;
  while (nodes[i].feature >= 0) {
    i = x[nodes[i].feature] < nodes[i].threshold ? nodes[i].left : nodes[i].right;
  }
  return nodes[i].value;
}

namespace {

struct SplitCandidate {
  double gain = 0;
  int feature = -1;
  double threshold = 0;
};

struct NodeStats {
  double g = 0;
  double h = 0;
};

double leaf_score(double g, double h, double lambda) { return g * g / (h + lambda); }

/// Builds one regression tree level by level. Each level scans every
/// feature's presorted order once; features are scanned in parallel and
/// reduced in feature order, so the result does not depend on threads.
Tree build_tree(const Matrix& x, const std::vector<std::vector<std::uint32_t>>& sorted, std::span<const double> grad,
                std::span<const double> hess, const GbdtParams& params) {
  const std::size_t n = x.size();
  const std::size_t d = x.front().size();
  Tree tree;
  tree.nodes.push_back({});
  std::vector<int> node_of(n, 0);
  std::vector<int> frontier{0};
  NodeStats root;
  for (std::size_t i = 0; i < n; ++i) {
    root.g += grad[i];
    root.h += hess[i];
  }
  std::vector<NodeStats> stats{root};

  for (std::size_t depth = 0; depth < params.max_depth && !frontier.empty(); ++depth) {
    // slot of each frontier node, -1 for nodes not being split this level
    std::vector<int> slot(tree.nodes.size(), -1);
    for (std::size_t s = 0; s < frontier.size(); ++s) slot[frontier[s]] = static_cast<int>(s);
    const std::size_t m = frontier.size();
    std::vector<SplitCandidate> best_per_feature(d * m);

    const auto sd = static_cast<std::int64_t>(d);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t f = 0; f < sd; ++f) {
      std::vector<NodeStats> left(m);
      std::vector<double> prev(m, 0.0);
      std::vector<char> started(m, 0);
      SplitCandidate* best = &best_per_feature[static_cast<std::size_t>(f) * m];
      for (std::uint32_t i : sorted[f]) {
        const int node = node_of[i];
        if (node < 0 || slot[node] < 0) continue;
        const auto s = static_cast<std::size_t>(slot[node]);
        const double v = x[i][f];
        if (started[s] && v != prev[s]) {
          const NodeStats& total = stats[s];
          const double gr = total.g - left[s].g;
          const double hr = total.h - left[s].h;
          if (left[s].h >= params.min_child_weight && hr >= params.min_child_weight) {
            const double gain = 0.5 * (leaf_score(left[s].g, left[s].h, params.lambda) +
                                       leaf_score(gr, hr, params.lambda) -
                                       leaf_score(total.g, total.h, params.lambda)) -
                                params.gamma;
            if (gain > best[s].gain) best[s] = {gain, static_cast<int>(f), 0.5 * (prev[s] + v)};
          }
        }
        left[s].g += grad[i];
        left[s].h += hess[i];
        prev[s] = v;
        started[s] = 1;
      }
    }

    std::vector<int> next_frontier;
    std::vector<NodeStats> next_stats;
    for (std::size_t s = 0; s < m; ++s) {
      SplitCandidate best;
      for (std::size_t f = 0; f < d; ++f) {
        const SplitCandidate& c = best_per_feature[f * m + s];
        if (c.feature >= 0 && c.gain > best.gain) best = c;
      }
      if (best.feature < 0 || best.gain <= 1e-6) continue;
      const int node = frontier[s];
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      tree.nodes[node].feature = best.feature;
      tree.nodes[node].threshold = best.threshold;
      tree.nodes[node].left = l;
      tree.nodes[node].right = l + 1;
      tree.nodes[node].gain = best.gain;
      next_frontier.push_back(l);
      next_frontier.push_back(l + 1);
      next_stats.push_back({});
      next_stats.push_back({});
    }
    if (next_frontier.empty()) break;
    for (std::size_t i = 0; i < n; ++i) {
      const int node = node_of[i];
      if (node < 0) continue;
      const TreeNode& tn = tree.nodes[node];
      if (tn.feature < 0) {
        node_of[i] = -1;  // stays a leaf
        continue;
      }
      node_of[i] = x[i][tn.feature] < tn.threshold ? tn.left : tn.right;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (node_of[i] < 0) continue;
      const auto pos = static_cast<std::size_t>(
          std::find(next_frontier.begin(), next_frontier.end(), node_of[i]) - next_frontier.begin());
      next_stats[pos].g += grad[i];
      next_stats[pos].h += hess[i];
    }
    frontier.swap(next_frontier);
    stats.swap(next_stats);
  }

  // Leaf values from the gradient totals of the samples that reach them.
  std::vector<NodeStats> leaf(tree.nodes.size());
  for (std::size_t i = 0; i < n; ++i) {
    int node = 0;
    while (tree.nodes[node].feature >= 0) {
      node = x[i][tree.nodes[node].feature] < tree.nodes[node].threshold ? tree.nodes[node].left
                                                                         : tree.nodes[node].right;
    }
    leaf[node].g += grad[i];
    leaf[node].h += hess[i];
  }
  for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
    if (tree.nodes[k].feature < 0) {
      tree.nodes[k].value = -params.learning_rate * leaf[k].g / (leaf[k].h + params.lambda);
    }
  }
  return tree;
}

}  // namespace

Gbdt Gbdt::fit(const Matrix& x, std::span<const int> y, std::size_t num_classes, const GbdtParams& params) {
  check_training_data(x, y, num_classes);
  Gbdt model;
  model.num_classes_ = num_classes;
  model.num_features_ = x.front().size();
  const std::size_t n = x.size();
  const std::size_t d = model.num_features_;

  std::vector<std::vector<std::uint32_t>> sorted(d, std::vector<std::uint32_t>(n));
  for (std::size_t f = 0; f < d; ++f) {
    std::iota(sorted[f].begin(), sorted[f].end(), 0u);
    std::stable_sort(sorted[f].begin(), sorted[f].end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x[a][f] < x[b][f]; });
  }

  std::vector<std::vector<double>> margin(n, std::vector<double>(num_classes, 0.0));
  std::vector<double> grad(n);
  std::vector<double> hess(n);
  std::vector<std::vector<double>> prob(n);
  for (std::size_t round = 0; round < params.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) prob[i] = softmax(margin[i]);
    std::vector<Tree> trees;
    for (std::size_t c = 0; c < num_classes; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        const double p = prob[i][c];
        grad[i] = p - (static_cast<std::size_t>(y[i]) == c ? 1.0 : 0.0);
        hess[i] = std::max(p * (1 - p), 1e-16);
      }
      trees.push_back(build_tree(x, sorted, grad, hess, params));
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < num_classes; ++c) margin[i][c] += trees[c].predict(x[i]);
    }
    model.rounds_.push_back(std::move(trees));
  }
  return model;
}

std::vector<double> Gbdt::margins(std::span<const double> x) const {
  std::vector<double> m(num_classes_, 0.0);
  for (const auto& round : rounds_) {
    for (std::size_t c = 0; c < num_classes_; ++c) m[c] += round[c].predict(x);
  }
  return m;
}

std::vector<double> Gbdt::predict_proba(std::span<const double> x) const { return softmax(margins(x)); }

std::vector<double> Gbdt::feature_gain() const {
  std::vector<double> gain(num_features_, 0.0);
  for (const auto& round : rounds_) {
    for (const auto& tree : round) {
      for (const auto& node : tree.nodes) {
        if (node.feature >= 0) gain[node.feature] += node.gain;
      }
    }
  }
  return gain;
}

io::Json Gbdt::structure() const {
  io::Json rounds = io::Json::array();
  for (const auto& round : rounds_) {
    io::Json trees = io::Json::array();
    for (const auto& tree : round) {
      io::Json nodes = io::Json::array();
      for (const auto& node : tree.nodes) nodes.push_back({node.feature, node.left, node.right});
      trees.push_back(nodes);
    }
    rounds.push_back(trees);
  }
  return {{"num_classes", num_classes_}, {"num_features", num_features_}, {"rounds", rounds}};
}

Gbdt Gbdt::from_structure(const io::Json& j) {
  Gbdt m;
  m.num_classes_ = j.at("num_classes").get<std::size_t>();
  m.num_features_ = j.at("num_features").get<std::size_t>();
  for (const auto& round : j.at("rounds")) {
    std::vector<Tree> trees;
    for (const auto& nodes : round) {
      Tree tree;
      for (const auto& n : nodes) {
        TreeNode node;
        node.feature = n.at(0).get<int>();
        node.left = n.at(1).get<int>();
        node.right = n.at(2).get<int>();
        tree.nodes.push_back(node);
      }
      trees.push_back(std::move(tree));
    }
    if (trees.size() != m.num_classes_) fail(ErrorCode::MalformedLine, "GBDT round with wrong tree count");
    m.rounds_.push_back(std::move(trees));
  }
  return m;
}

// ---------------------------------------------------------------------------
// MLP

MlpNet::MlpNet(std::size_t inputs, std::span<const std::size_t> hidden, std::size_t outputs, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t in = inputs;
  auto add = [&](std::size_t out) {
    Layer l;
    l.in = in;
    l.out = out;
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    l.w.resize(in * out);
    for (double& v : l.w) v = rng.uniform(-bound, bound);
    l.b.assign(out, 0.0);
    layers_.push_back(std::move(l));
    in = out;
  };
  for (std::size_t h : hidden) add(h);
  add(outputs);
}

void MlpNet::forward(std::span<const double> x, std::vector<Row>& activations) const {
  activations.resize(layers_.size() + 1);
  activations[0].assign(x.begin(), x.end());
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& l = layers_[li];
    const Row& a = activations[li];
    Row& out = activations[li + 1];
    out.assign(l.out, 0.0);
    const bool hidden = li + 1 < layers_.size();
    for (std::size_t o = 0; o < l.out; ++o) {
      double s = l.b[o];
      const double* w = &l.w[o * l.in];
      for (std::size_t i = 0; i < l.in; ++i) s += w[i] * a[i];
      out[o] = hidden ? std::max(0.0, s) : s;
    }
  }
}

Row MlpNet::logits(std::span<const double> x) const {
  std::vector<Row> acts;
  forward(x, acts);
  return acts.back();
}

void MlpNet::backward(const std::vector<Row>& activations, std::span<const double> dlogits,
                      std::vector<Layer>& grads) const {
  Row delta(dlogits.begin(), dlogits.end());
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& l = layers_[li];
    Layer& g = grads[li];
    const Row& a = activations[li];
    for (std::size_t o = 0; o < l.out; ++o) {
      const double d = delta[o];
      if (d == 0) continue;
      g.b[o] += d;
      double* gw = &g.w[o * l.in];
      for (std::size_t i = 0; i < l.in; ++i) gw[i] += d * a[i];
    }
    if (li == 0) break;
    Row prev(l.in, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double d = delta[o];
      if (d == 0) continue;
      const double* w = &l.w[o * l.in];
      for (std::size_t i = 0; i < l.in; ++i) prev[i] += d * w[i];
    }
    for (std::size_t i = 0; i < l.in; ++i) {
      if (a[i] <= 0) prev[i] = 0;  // ReLU
    }
    delta.swap(prev);
  }
}

std::vector<MlpNet::Layer> MlpNet::zero_like() const {
  std::vector<Layer> out = layers_;
  for (auto& l : out) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
  return out;
}

io::Json MlpNet::structure() const {
  io::Json sizes = io::Json::array();
  for (const auto& l : layers_) sizes.push_back({l.in, l.out});
  return {{"layers", sizes}};
}

MlpNet MlpNet::from_structure(const io::Json& j) {
  MlpNet net;
  for (const auto& s : j.at("layers")) {
    Layer l;
    l.in = s.at(0).get<std::size_t>();
    l.out = s.at(1).get<std::size_t>();
    l.w.assign(l.in * l.out, 0.0);
    l.b.assign(l.out, 0.0);
    net.layers_.push_back(std::move(l));
  }
  return net;
}

MlpAdam::MlpAdam(const MlpNet& net, double lr) : lr_(lr), m_(net.zero_like()), v_(net.zero_like()) {}

void MlpAdam::step(MlpNet& net, const std::vector<MlpNet::Layer>& grads) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  ++t_;
  const double c1 = 1 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1 - std::pow(kBeta2, static_cast<double>(t_));
  auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1 - kBeta1) * g[i];
      v[i] = kBeta2 * v[i] + (1 - kBeta2) * g[i] * g[i];
      p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
  };
  auto& layers = net.layers();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    update(layers[li].w, grads[li].w, m_[li].w, v_[li].w);
    update(layers[li].b, grads[li].b, m_[li].b, v_[li].b);
  }
}

MlpClassifier MlpClassifier::fit(const Matrix& x, std::span<const int> y, std::size_t num_classes,
                                 const MlpParams& params, std::uint64_t seed) {
  check_training_data(x, y, num_classes);
  MlpClassifier model;
  model.num_classes_ = num_classes;
  model.standardizer_ = Standardizer::fit(x);
  Matrix z;
  z.reserve(x.size());
  for (const Row& r : x) z.push_back(model.standardizer_.apply(r));
  const std::vector<std::size_t> hidden(params.hidden_layers, params.width);
  model.net_ = MlpNet(z.front().size(), hidden, num_classes, derive_seed(seed, 0x3a1));

  Rng rng(derive_seed(seed, 0x5b2));
  MlpAdam adam(model.net_, params.lr);
  std::vector<std::uint32_t> order(z.size());
  std::iota(order.begin(), order.end(), 0u);
  std::vector<Row> acts;
  const std::size_t batch = std::min(params.batch_size, z.size());
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t epoch = 0; epoch < params.max_epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const auto bs = static_cast<double>(end - start);
      auto grads = model.net_.zero_like();
      double loss = 0;
      for (std::size_t k = start; k < end; ++k) {
        const auto i = order[k];
        model.net_.forward(z[i], acts);
        auto p = softmax(acts.back());
        loss -= std::log(std::max(p[y[i]], 1e-300));
        p[y[i]] -= 1.0;
        for (double& v : p) v /= bs;
        model.net_.backward(acts, p, grads);
      }
      double sq = 0;
      auto& layers = model.net_.layers();
      for (std::size_t li = 0; li < layers.size(); ++li) {
        for (std::size_t j = 0; j < layers[li].w.size(); ++j) {
          sq += layers[li].w[j] * layers[li].w[j];
          grads[li].w[j] += params.l2 * layers[li].w[j] / bs;
        }
      }
      loss = loss / bs + 0.5 * params.l2 * sq / bs;
      if (!std::isfinite(loss)) fail(ErrorCode::NonFiniteLoss, "MLP loss diverged in epoch " + std::to_string(epoch));
      epoch_loss += loss * bs;
      adam.step(model.net_, grads);
    }
    epoch_loss /= static_cast<double>(order.size());
    model.epochs_run_ = epoch + 1;
    stale = epoch_loss > best_loss - params.tol ? stale + 1 : 0;
    best_loss = std::min(best_loss, epoch_loss);
    if (stale > params.patience) break;
  }
  return model;
}

std::vector<double> MlpClassifier::predict_proba(std::span<const double> x) const {
  return softmax(net_.logits(standardizer_.apply(x)));
}

io::Json MlpClassifier::structure() const {
  return {{"num_classes", num_classes_}, {"num_features", standardizer_.mean.size()}, {"net", net_.structure()}};
}

MlpClassifier MlpClassifier::from_structure(const io::Json& j) {
  MlpClassifier m;
  m.num_classes_ = j.at("num_classes").get<std::size_t>();
  const auto d = j.at("num_features").get<std::size_t>();
  m.standardizer_.mean.assign(d, 0.0);
  m.standardizer_.scale.assign(d, 1.0);
  m.net_ = MlpNet::from_structure(j.at("net"));
  return m;
}

std::vector<int> kfold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed) {
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  Rng rng(derive_seed(seed, 0xcf01d));
  rng.shuffle(std::span(perm));
  std::vector<int> fold(n);
  for (std::size_t j = 0; j < n; ++j) fold[perm[j]] = static_cast<int>(j % folds);
  return fold;
}

}  // namespace kgc::ml

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kgc/io.hpp"

namespace kgc::ml {

using Row = std::vector<double>;
using Matrix = std::vector<Row>;

/// Per-feature z-scoring; constant features get scale 1.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Matrix& x);
  Row apply(std::span<const double> x) const;

  template <typename F>
  void visit(F&& f) {
    for (double& v : mean) f(v);
    for (double& v : scale) f(v);
  }
};

std::vector<double> softmax(std::span<const double> logits);

enum class Penalty { L1, L2 };

struct LogRegParams {
  Penalty penalty = Penalty::L2;
  /// Inverse regularization strength (larger = weaker penalty).
  double c = 1.0;
  std::size_t max_iter = 500;
};

/// Multinomial logistic regression fitted by proximal gradient descent
/// (FISTA with backtracking) on standardized inputs. The objective is the
/// mean cross-entropy plus penalty / (c * n); the bias is not penalized.
class LogisticRegression {
 public:
  static LogisticRegression fit(const Matrix& x, std::span<const int> y, std::size_t num_classes,
                                const LogRegParams& params);

  std::vector<double> predict_proba(std::span<const double> x) const;

  std::size_t num_classes() const { return num_classes_; }
  std::size_t num_features() const { return num_features_; }

  io::Json structure() const;
  static LogisticRegression from_structure(const io::Json& j);

  template <typename F>
  void visit(F&& f) {
    standardizer_.visit(f);
    for (double& v : weights_) f(v);
    for (double& v : bias_) f(v);
  }

 private:
  std::size_t num_classes_ = 0;
  std::size_t num_features_ = 0;
  Standardizer standardizer_;
  std::vector<double> weights_;  // classes x features
  std::vector<double> bias_;
};

struct GbdtParams {
  std::size_t rounds = 100;
  std::size_t max_depth = 4;
  double learning_rate = 0.1;
  double lambda = 1.0;
  double min_child_weight = 1.0;
  double gamma = 0.0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;
  int left = -1;
  int right = -1;
  double value = 0;  // leaf output, learning rate applied
  double gain = 0;   // split gain for internal nodes
};

struct Tree {
  std::vector<TreeNode> nodes;
  double predict(std::span<const double> x) const;
};

/// Multiclass softmax boosting with one tree per class per round, exact
/// greedy splits on the second-order gain, no row or column sampling.
/// A single round is the "decision tree" classifier.
class Gbdt {
 public:
  static Gbdt fit(const Matrix& x, std::span<const int> y, std::size_t num_classes, const GbdtParams& params);

  std::vector<double> predict_proba(std::span<const double> x) const;
  std::vector<double> margins(std::span<const double> x) const;

  /// Total split gain per feature over all trees.
  std::vector<double> feature_gain() const;

  std::size_t num_classes() const { return num_classes_; }
  std::size_t num_features() const { return num_features_; }
  const std::vector<std::vector<Tree>>& rounds() const { return rounds_; }

  io::Json structure() const;
  static Gbdt from_structure(const io::Json& j);

  template <typename F>
  void visit(F&& f) {
    for (auto& round : rounds_) {
      for (auto& tree : round) {
        for (auto& node : tree.nodes) {
          f(node.threshold);
          f(node.value);
          f(node.gain);
        }
      }
    }
  }

 private:
  std::size_t num_classes_ = 0;
  std::size_t num_features_ = 0;
  std::vector<std::vector<Tree>> rounds_;  // rounds x classes
};

/// Fully connected ReLU network with a linear output layer.
class MlpNet {
 public:
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;  // out x in
    std::vector<double> b;
  };

  MlpNet() = default;
  /// Glorot-uniform weights, zero biases.
  MlpNet(std::size_t inputs, std::span<const std::size_t> hidden, std::size_t outputs, std::uint64_t seed);

  /// activations[0] = input, activations.back() = output logits.
  void forward(std::span<const double> x, std::vector<Row>& activations) const;
  Row logits(std::span<const double> x) const;
  /// Accumulates parameter gradients for one sample given dLoss/dLogits.
  void backward(const std::vector<Row>& activations, std::span<const double> dlogits,
                std::vector<Layer>& grads) const;

  std::vector<Layer> zero_like() const;
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  io::Json structure() const;
  static MlpNet from_structure(const io::Json& j);

  template <typename F>
  void visit(F&& f) {
    for (auto& l : layers_) {
      for (double& v : l.w) f(v);
      for (double& v : l.b) f(v);
    }
  }

 private:
  std::vector<Layer> layers_;
};

/// Adam over every parameter of an MlpNet.
class MlpAdam {
 public:
  MlpAdam(const MlpNet& net, double lr);
  void step(MlpNet& net, const std::vector<MlpNet::Layer>& grads);

 private:
  double lr_;
  std::size_t t_ = 0;
  std::vector<MlpNet::Layer> m_;
  std::vector<MlpNet::Layer> v_;
};

struct MlpParams {
  std::size_t hidden_layers = 1;
  std::size_t width = 128;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  double l2 = 1e-4;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  double tol = 1e-4;
};

/// Softmax/cross-entropy classifier trained with Adam; stops when the
/// training loss fails to improve by tol for `patience` epochs.
class MlpClassifier {
 public:
  static MlpClassifier fit(const Matrix& x, std::span<const int> y, std::size_t num_classes, const MlpParams& params,
                           std::uint64_t seed);

  std::vector<double> predict_proba(std::span<const double> x) const;
  std::size_t num_classes() const { return num_classes_; }
  std::size_t epochs_run() const { return epochs_run_; }

  io::Json structure() const;
  static MlpClassifier from_structure(const io::Json& j);

  template <typename F>
  void visit(F&& f) {
    standardizer_.visit(f);
    net_.visit(f);
  }

 private:
  std::size_t num_classes_ = 0;
  std::size_t epochs_run_ = 0;
  Standardizer standardizer_;
  MlpNet net_;
};

/// Seeded k-fold assignment: a shuffled permutation dealt round-robin.
std::vector<int> kfold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed);

}  // namespace kgc::ml

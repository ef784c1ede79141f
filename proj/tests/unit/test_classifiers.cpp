#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "kgc/classifiers.hpp"
#include "kgc/error.hpp"
#include "kgc/rng.hpp"

using namespace kgc;
using namespace kgc::ml;

namespace {

struct Dataset {
  Matrix x;
  std::vector<int> y;
};

// Three classes split along feature 0 at 1/3 and 2/3; two noise features.
Dataset axis_separable(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    const double f0 = rng.uniform01();
    d.x.push_back({f0, rng.uniform(-1, 1), rng.uniform(-1, 1)});
    d.y.push_back(f0 < 1.0 / 3 ? 0 : (f0 < 2.0 / 3 ? 1 : 2));
  }
  return d;
}

template <typename Model>
double accuracy(const Model& m, const Dataset& d) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    const auto p = m.predict_proba(d.x[i]);
    ok += static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()) == d.y[i];
  }
  return static_cast<double>(ok) / static_cast<double>(d.x.size());
}

double cv_accuracy_gbdt(const Dataset& d, const GbdtParams& params, std::size_t folds, std::uint64_t seed) {
  const auto fold = kfold_assignment(d.x.size(), folds, seed);
  double sum = 0;
  for (int f = 0; f < static_cast<int>(folds); ++f) {
    Dataset train, test;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
      Dataset& dst = fold[i] == f ? test : train;
      dst.x.push_back(d.x[i]);
      dst.y.push_back(d.y[i]);
    }
    sum += accuracy(Gbdt::fit(train.x, train.y, 3, params), test);
  }
  return sum / static_cast<double>(folds);
}

template <typename Model>
std::vector<double> params_of(Model m) {
  std::vector<double> out;
  m.visit([&](double& v) { out.push_back(v); });
  return out;
}

// Rebuilds a model from its structure plus its parameter stream, the way
// the persisted form is read back.
template <typename Model>
Model rebuild(const Model& m) {
  Model back = Model::from_structure(m.structure());
  const auto values = params_of(m);
  std::size_t i = 0;
  back.visit([&](double& v) { v = values.at(i++); });
  REQUIRE(i == values.size());
  return back;
}

}  // namespace

TEST_CASE("softmax is a stable probability vector") {
  const auto p = softmax(std::vector<double>{1000.0, 1000.0, -1000.0});
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));
  CHECK(p[2] == doctest::Approx(0.0));
  const auto q = softmax(std::vector<double>{0.0, std::log(3.0)});
  CHECK(q[0] == doctest::Approx(0.25));
  CHECK(q[1] == doctest::Approx(0.75));
}

TEST_CASE("standardizer z-scores and keeps constant features finite") {
  const Matrix x = {{1, 5}, {3, 5}, {5, 5}};
  const Standardizer s = Standardizer::fit(x);
  const Row z = s.apply(x[2]);
  CHECK(z[0] == doctest::Approx(std::sqrt(1.5)));
  CHECK(z[1] == 0.0);
}

TEST_CASE("kfold assignment is balanced and seeded") {
  const auto a = kfold_assignment(23, 5, 1);
  const auto b = kfold_assignment(23, 5, 1);
  const auto c = kfold_assignment(23, 5, 2);
  CHECK(a == b);
  CHECK(a != c);
  std::vector<int> counts(5, 0);
  for (int f : a) ++counts[f];
  for (int k : counts) CHECK((k == 4 || k == 5));
}

TEST_CASE("logistic regression separates linearly separable data") {
  Rng rng(3);
  Dataset d;
  for (int i = 0; i < 200; ++i) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
    if (std::abs(a + b) < 0.1) continue;
    d.x.push_back({a, b});
    d.y.push_back(a + b > 0 ? 1 : 0);
  }
  for (Penalty pen : {Penalty::L1, Penalty::L2}) {
    const auto m = LogisticRegression::fit(d.x, d.y, 2, {pen, 100.0, 500});
    CHECK(accuracy(m, d) == 1.0);
  }
}

TEST_CASE("strong L1 penalty zeroes noise weights") {
  Rng rng(4);
  Dataset d;
  for (int i = 0; i < 300; ++i) {
    const double a = rng.uniform(-1, 1);
    d.x.push_back({a, rng.uniform(-1, 1), rng.uniform(-1, 1)});
    d.y.push_back(a > 0 ? 1 : 0);
  }
  const auto m = LogisticRegression::fit(d.x, d.y, 2, {Penalty::L1, 0.05, 1000});
  // visit order: mean (3), scale (3), class-major weights (2 x 3), bias
  const auto all = params_of(m);
  const std::vector<double> w(all.begin() + 6, all.begin() + 12);
  CHECK(std::abs(w[1]) < 1e-9);
  CHECK(std::abs(w[2]) < 1e-9);
  CHECK(std::abs(w[4]) < 1e-9);
  CHECK(std::abs(w[5]) < 1e-9);
  CHECK(std::abs(w[0]) > 1e-3);
}

TEST_CASE("GBDT reaches 0.95 CV accuracy on axis-separable classes") {
  const Dataset d = axis_separable(200, 7);
  GbdtParams p;
  p.rounds = 50;
  p.max_depth = 3;
  CHECK(cv_accuracy_gbdt(d, p, 5, 1) >= 0.95);
}

TEST_CASE("GBDT fit is deterministic") {
  const Dataset d = axis_separable(150, 8);
  GbdtParams p;
  p.rounds = 10;
  const Gbdt a = Gbdt::fit(d.x, d.y, 3, p);
  const Gbdt b = Gbdt::fit(d.x, d.y, 3, p);
  CHECK(a.structure() == b.structure());
  CHECK(params_of(a) == params_of(b));
}

TEST_CASE("stump gain matches a brute-force split search") {
  // Two classes, one round, depth one: every sample starts at p = 0.5 so
  // g = 0.5 - y and h = 0.25 for the class-1 tree.
  Rng rng(9);
  Dataset d;
  for (int i = 0; i < 60; ++i) {
    const double f3 = rng.uniform01();
    d.x.push_back({rng.uniform01(), rng.uniform01(), rng.uniform01(), f3});
    d.y.push_back(f3 > 0.6 ? 1 : 0);
  }
  GbdtParams p;
  p.rounds = 1;
  p.max_depth = 1;
  p.lambda = 1.0;
  p.min_child_weight = 0.0;
  const Gbdt m = Gbdt::fit(d.x, d.y, 2, p);

  double best = 0;
  int best_f = -1;
  for (int f = 0; f < 4; ++f) {
    std::set<double> values;
    for (const auto& row : d.x) values.insert(row[f]);
    for (double thr : values) {
      double gl = 0, hl = 0, gr = 0, hr = 0;
      for (std::size_t i = 0; i < d.x.size(); ++i) {
        const double g = 0.5 - d.y[i];
        (d.x[i][f] < thr ? gl : gr) += g;
        (d.x[i][f] < thr ? hl : hr) += 0.25;
      }
      if (hl == 0 || hr == 0) continue;
      const double gain = 0.5 * (gl * gl / (hl + 1) + gr * gr / (hr + 1) - (gl + gr) * (gl + gr) / (hl + hr + 1));
      if (gain > best) {
        best = gain;
        best_f = f;
      }
    }
  }
  REQUIRE(best_f == 3);
  const auto gain = m.feature_gain();
  CHECK(gain[0] == 0.0);
  CHECK(gain[1] == 0.0);
  CHECK(gain[2] == 0.0);
  // one identical stump per class
  CHECK(gain[3] == doctest::Approx(2 * best).epsilon(1e-12));
  const Tree& t = m.rounds()[0][1];
  REQUIRE(t.nodes[0].feature == 3);
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    CHECK((d.x[i][3] >= t.nodes[0].threshold) == (d.y[i] == 1));
  }
}

TEST_CASE("feature gains are non-negative") {
  const Dataset d = axis_separable(120, 10);
  GbdtParams p;
  p.rounds = 5;
  for (double g : Gbdt::fit(d.x, d.y, 3, p).feature_gain()) CHECK(g >= 0.0);
}

TEST_CASE("MLP backward agrees with finite differences") {
  const std::vector<std::size_t> hidden = {5, 4};
  MlpNet net(3, hidden, 2, 11);
  Rng rng(12);
  for (auto& l : net.layers()) {
    for (double& b : l.b) b = rng.uniform(-0.5, 0.5);
  }
  const Row x = {0.3, -0.7, 1.2};
  const Row weights = {0.8, -1.3};  // loss = weights . logits
  std::vector<Row> acts;
  net.forward(x, acts);
  auto grads = net.zero_like();
  net.backward(acts, weights, grads);
  auto loss = [&] {
    const Row z = net.logits(x);
    return weights[0] * z[0] + weights[1] * z[1];
  };
  double worst = 0;
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    auto& layer = net.layers()[li];
    for (std::size_t k = 0; k < layer.w.size(); ++k) {
      const double v = layer.w[k];
      layer.w[k] = v + 1e-6;
      const double up = loss();
      layer.w[k] = v - 1e-6;
      const double down = loss();
      layer.w[k] = v;
      const double num = (up - down) / 2e-6;
      worst = std::max(worst, std::abs(num - grads[li].w[k]) / std::max({std::abs(num), std::abs(grads[li].w[k]), 1e-5}));
    }
    for (std::size_t k = 0; k < layer.b.size(); ++k) {
      const double v = layer.b[k];
      layer.b[k] = v + 1e-6;
      const double up = loss();
      layer.b[k] = v - 1e-6;
      const double down = loss();
      layer.b[k] = v;
      const double num = (up - down) / 2e-6;
      worst = std::max(worst, std::abs(num - grads[li].b[k]) / std::max({std::abs(num), std::abs(grads[li].b[k]), 1e-5}));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("MLP classifier learns axis-separable classes deterministically") {
  const Dataset d = axis_separable(240, 13);
  MlpParams p;
  p.width = 32;
  p.batch_size = 32;
  p.lr = 1e-2;
  p.max_epochs = 200;
  const auto a = MlpClassifier::fit(d.x, d.y, 3, p, 5);
  const auto b = MlpClassifier::fit(d.x, d.y, 3, p, 5);
  CHECK(a.structure() == b.structure());
  CHECK(params_of(a) == params_of(b));
  CHECK(accuracy(a, d) >= 0.95);
  CHECK(a.epochs_run() <= p.max_epochs);
}

TEST_CASE("classifier structures round-trip") {
  const Dataset d = axis_separable(90, 14);
  const auto lr = LogisticRegression::fit(d.x, d.y, 3, {});
  GbdtParams gp;
  gp.rounds = 3;
  const auto gb = Gbdt::fit(d.x, d.y, 3, gp);
  MlpParams mp;
  mp.width = 8;
  mp.max_epochs = 5;
  const auto mlp = MlpClassifier::fit(d.x, d.y, 3, mp, 1);
  for (const auto& row : d.x) {
    CHECK(rebuild(lr).predict_proba(row) == lr.predict_proba(row));
    CHECK(rebuild(gb).predict_proba(row) == gb.predict_proba(row));
    CHECK(rebuild(mlp).predict_proba(row) == mlp.predict_proba(row));
  }
}

TEST_CASE("bad training data is rejected") {
  const Matrix x = {{1.0}, {2.0}};
  const std::vector<int> y = {0, 3};
  CHECK_THROWS_AS(Gbdt::fit(x, y, 2, {}), Error);
  CHECK_THROWS_AS(LogisticRegression::fit({}, std::vector<int>{}, 2, {}), Error);
}

#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "learn_data.hpp"
#include "vocstress/error.hpp"
#include "vocstress/learn.hpp"

using namespace vocstress;

namespace {

double accuracy(const std::vector<int>& y, const std::vector<int>& p) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < y.size(); ++i) ok += y[i] == p[i];
  return static_cast<double>(ok) / static_cast<double>(y.size());
}

std::vector<std::size_t> range(std::size_t a, std::size_t b) {
  std::vector<std::size_t> v(b - a);
  std::iota(v.begin(), v.end(), a);
  return v;
}

ModelSpec spec_of(ModelKind k) {
  ModelSpec s;
  s.kind = k;
  return s;
}

}  // namespace

TEST_CASE("random forest learns XOR") {
  const auto d = testing::xor_set(400, 2024);
  const auto tr = range(0, 200), te = range(200, 400);
  const Model m = train(spec_of(ModelKind::RandomForest), d.x.select_rows(tr), std::span(d.y).subspan(0, 200), 1);
  const std::vector<int> yt(d.y.begin() + 200, d.y.end());
  CHECK(accuracy(yt, predict_labels(m, d.x.select_rows(te))) >= 0.9);
}

TEST_CASE("forest is deterministic across thread counts") {
  const auto d = testing::xor_set(150, 3, 3);
  const Forest a = train_forest({}, d.x, d.y, 77, 1);
  const Forest b = train_forest({}, d.x, d.y, 77, 4);
  Model ma{ModelKind::RandomForest, a}, mb{ModelKind::RandomForest, b};
  CHECK(write_model(ma) == write_model(mb));
}

TEST_CASE("trees respect depth and split rules") {
  const auto d = testing::xor_set(300, 8, 4);
  ForestParams p;
  p.n_trees = 10;
  p.max_depth = 3;
  const Forest f = train_forest(p, d.x, d.y, 5);
  for (const auto& t : f.trees) {
    CHECK(t.depth() <= 3);
    for (const auto& n : t.nodes) {
      if (n.feature < 0) {
        CHECK((n.value == 0.0 || n.value == 1.0));
      } else {
        CHECK(n.cover == doctest::Approx(t.nodes[static_cast<std::size_t>(n.left)].cover +
                                         t.nodes[static_cast<std::size_t>(n.right)].cover));
      }
    }
  }
}

TEST_CASE("forest training partitions are invariant under increasing feature transforms") {
  const auto d = testing::xor_set(200, 12, 2);
  Matrix x2 = d.x;
  for (std::size_t i = 0; i < x2.rows; ++i) {
    x2(i, 0) = std::exp(3 * x2(i, 0));
    x2(i, 2) = x2(i, 2) * x2(i, 2) * x2(i, 2) + 5;
  }
  const Forest a = train_forest({}, d.x, d.y, 9);
  const Forest b = train_forest({}, x2, d.y, 9);
  REQUIRE(a.trees.size() == b.trees.size());
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
    for (std::size_t n = 0; n < a.trees[t].nodes.size(); ++n) {
      CHECK(a.trees[t].nodes[n].feature == b.trees[t].nodes[n].feature);
      CHECK(a.trees[t].nodes[n].cover == b.trees[t].nodes[n].cover);
    }
  }
}

TEST_CASE("linear SVM separates a separable set") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0, 0.3);
  Matrix x(80, 2);
  std::vector<int> y(80);
  for (std::size_t i = 0; i < 80; ++i) {
    y[i] = i % 2;
    x(i, 0) = (y[i] ? 2.0 : -2.0) + z(rng);
    x(i, 1) = z(rng);
  }
  const Model m = train(spec_of(ModelKind::SvmLinear), x, y, 0);
  const auto& svm = std::get<Svm>(m.impl);
  CHECK(svm.converged);
  CHECK(svm.w.size() == 2);
  CHECK(accuracy(y, predict_labels(m, x)) == 1.0);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(svm.decision(x.row(i)) == doctest::Approx(svm.w[0] * x(i, 0) + svm.w[1] * x(i, 1) - svm.bias));
  }
  const Model rbf = train(spec_of(ModelKind::SvmRbf), x, y, 0);
  // RBF decision equals its kernel expansion.
  const auto& k = std::get<Svm>(rbf.impl);
  for (std::size_t i = 0; i < 5; ++i) {
    double f = -k.bias;
    for (std::size_t s = 0; s < k.support.size(); ++s) {
      const double d0 = k.support[s][0] - x(i, 0), d1 = k.support[s][1] - x(i, 1);
      f += k.coef[s] * std::exp(-k.gamma * (d0 * d0 + d1 * d1));
    }
    CHECK(k.decision(x.row(i)) == doctest::Approx(f).epsilon(1e-9));
  }
  CHECK(accuracy(y, predict_labels(rbf, x)) == 1.0);
  const auto p = predict_proba(rbf, x);
  for (std::size_t i = 0; i < 80; ++i) CHECK((p[i] > 0.5) == (y[i] == 1));
}

TEST_CASE("equidistant point of a symmetric set scores one half") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0, 0.5);
  Matrix x(60, 2);
  std::vector<int> y(60);
  for (std::size_t i = 0; i < 30; ++i) {
    const double a = 1.5 + z(rng), b = z(rng);
    x(2 * i, 0) = a;
    x(2 * i, 1) = b;
    y[2 * i] = 1;
    x(2 * i + 1, 0) = -a;
    x(2 * i + 1, 1) = b;
    y[2 * i + 1] = 0;
  }
  Matrix mid(1, 2, 0.0);
  mid(0, 1) = 0.3;
  for (ModelKind k : {ModelKind::SvmRbf, ModelKind::SvmLinear}) {
    CAPTURE(model_kind_name(k));
    const auto p = predict_proba(train(spec_of(k), x, y, 0), mid);
    CHECK(std::fabs(p[0] - 0.5) <= 0.05);
  }
}

TEST_CASE("gamma scale uses the training variance") {
  Matrix x(4, 2);
  const double vals[] = {0, 1, 2, 3, 4, 5, 6, 7};
  std::copy(std::begin(vals), std::end(vals), x.data.begin());
  const std::vector<int> y = {0, 0, 1, 1};
  const Svm s = train_svm({}, false, x, y);
  // Population variance of 0..7 is 5.25.
  CHECK(s.gamma == doctest::Approx(1.0 / (2 * 5.25)));
  SvmParams explicit_gamma;
  explicit_gamma.gamma = 0.7;
  CHECK(train_svm(explicit_gamma, false, x, y).gamma == 0.7);
}

TEST_CASE("training preconditions") {
  Matrix x(4, 2, 1.0);
  x(1, 0) = 2;
  const std::vector<int> one = {1, 1, 1, 1};
  try {
    train(spec_of(ModelKind::SvmRbf), x, one, 0);
    FAIL("expected SingleClassTraining");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingleClassTraining);
  }
  const std::vector<int> y = {0, 1, 0, 1};
  const Model m = train(spec_of(ModelKind::RandomForest), x, y, 0);
  try {
    predict_proba(m, Matrix(2, 3, 0.0));
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
  Matrix holes = x;
  holes(2, 1) = kMissing;
  CHECK_THROWS_AS(train(spec_of(ModelKind::RandomForest), holes, y, 0), Error);
  ModelSpec bad;
  bad.rf.n_trees = 0;
  CHECK_THROWS_AS(validate(bad), Error);
}

TEST_CASE("model text format round-trips") {
  const auto d = testing::xor_set(120, 31, 1);
  for (ModelKind k : {ModelKind::RandomForest, ModelKind::SvmRbf, ModelKind::SvmLinear}) {
    CAPTURE(model_kind_name(k));
    const Model m = train(spec_of(k), d.x, d.y, 4);
    const std::string text = write_model(m);
    CHECK(text.rfind("vocstress-model 1\n", 0) == 0);
    const Model back = read_model(text);
    CHECK(write_model(back) == text);
    CHECK(predict_proba(back, d.x) == predict_proba(m, d.x));
  }
  CHECK_THROWS_AS(read_model("vocstress-model 2\n"), Error);
  CHECK_THROWS_AS(read_model("garbage"), Error);
}

TEST_CASE("AUC equals brute-force pair counting") {
  std::mt19937_64 rng(100);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 15)(rng);
    std::vector<int> y(n);
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = std::uniform_int_distribution<int>(0, 1)(rng);
      s[i] = std::uniform_int_distribution<int>(0, 5)(rng) / 5.0;
    }
    double pairs = 0, wins = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (y[i] != 1 || y[j] != 0) continue;
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
    }
    const double got = auc(y, s);
    if (pairs == 0) {
      CHECK(is_missing(got));
    } else {
      CHECK(got == doctest::Approx(wins / pairs).epsilon(1e-12));
    }
  }
}

TEST_CASE("metrics from confusion counts") {
  const std::vector<int> y = {1, 1, 1, 0, 0, 0, 0};
  const std::vector<int> p = {1, 1, 0, 1, 0, 0, 0};
  const Confusion c = confusion(y, p);
  CHECK(c.tp == 2);
  CHECK(c.fn == 1);
  CHECK(c.fp == 1);
  CHECK(c.tn == 3);
  const Metrics m = metrics_from(c);
  CHECK(m.accuracy == doctest::Approx(5.0 / 7));
  CHECK(m.precision == doctest::Approx(2.0 / 3));
  CHECK(m.recall == doctest::Approx(2.0 / 3));
  CHECK(m.f1 == doctest::Approx(2.0 / 3));
  const Metrics none = metrics_from(Confusion{0, 0, 5, 0});
  CHECK(none.precision == 0);
  CHECK(none.recall == 0);
  CHECK(none.f1 == 0);
  CHECK(none.accuracy == 1);
}

TEST_CASE("stratified folds follow the round-robin rule") {
  std::vector<int> y(834, 0);
  std::fill(y.begin(), y.begin() + 449, 1);
  std::shuffle(y.begin(), y.end(), std::mt19937_64(5));
  const auto folds = stratified_kfold(y, 5, 42);
  std::array<int, 5> size{}, stress{};
  for (std::size_t i = 0; i < y.size(); ++i) {
    ++size[folds[i]];
    stress[folds[i]] += y[i];
  }
  CHECK(size == std::array<int, 5>{167, 167, 167, 167, 166});
  for (int s : stress) CHECK((s == 89 || s == 90));
  CHECK(stratified_kfold(y, 5, 42) == folds);
  CHECK_FALSE(stratified_kfold(y, 5, 43) == folds);
  std::vector<int> few = {1, 1, 0, 0, 0, 0, 0};
  try {
    stratified_kfold(few, 5, 0);
    FAIL("expected TooFewPerClass");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewPerClass);
  }
}

TEST_CASE("leave-one-subject-out folds") {
  std::vector<std::string> g;
  for (int p = 24; p >= 1; --p) {
    for (int k = 0; k < 3; ++k) g.push_back(fmt::format("P{:02}", p));
  }
  const auto folds = loso_split(g);
  std::set<std::size_t> ids(folds.begin(), folds.end());
  CHECK(ids.size() == 24);
  CHECK(folds.front() == 23);  // P24 sorts last
  CHECK(folds.back() == 0);
  const std::vector<std::string> single(5, "P01");
  CHECK_THROWS_AS(loso_split(single), Error);
}

TEST_CASE("fold imputation never sees test rows") {
  auto d = testing::xor_set(100, 6, 1);
  for (std::size_t i = 0; i < 100; i += 7) d.x(i, 2) = kMissing;
  // Canary: test rows carry extreme values in the column with holes.
  const auto tr = range(0, 70), te = range(70, 100);
  for (std::size_t i : te) d.x(i, 2) = 1e6;
  const FoldOutcome f = train_fold(spec_of(ModelKind::SvmRbf), d.x, d.y, tr, te, 3);
  Matrix xtr = d.x.select_rows(tr);
  const Matrix filled = fill_missing(xtr, observed_column_means(xtr));
  const std::vector<int> ytr(d.y.begin(), d.y.begin() + 70);
  const Model ref = train(spec_of(ModelKind::SvmRbf), filled, ytr, 3);
  CHECK(write_model(f.model) == write_model(ref));
  CHECK(f.test == te);
  CHECK(f.confusion.total() == 30);
}

TEST_CASE("separable cohort is classified perfectly in both regimes") {
  const auto d = testing::separable_cohort(8, 10, 1);
  for (ModelKind k : {ModelKind::RandomForest, ModelKind::SvmRbf, ModelKind::SvmLinear}) {
    for (Regime r : {Regime::StratifiedKFold, Regime::Loso}) {
      CAPTURE(model_kind_name(k));
      CAPTURE(regime_name(r));
      const auto rep = evaluate(spec_of(k), d.x, d.y, d.groups, r, 11);
      CHECK(rep.pooled_metrics.accuracy == 1.0);
      CHECK(rep.mean.accuracy == 1.0);
      CHECK(rep.folds.size() == (r == Regime::Loso ? 8u : 5u));
    }
  }
}

TEST_CASE("evaluation summaries") {
  const auto d = testing::xor_set(200, 40, 2);
  std::vector<std::string> groups(200);
  for (std::size_t i = 0; i < 200; ++i) groups[i] = "P" + std::to_string(i % 5);
  const auto a = evaluate(spec_of(ModelKind::RandomForest), d.x, d.y, groups, Regime::StratifiedKFold, 2, 1);
  const auto b = evaluate(spec_of(ModelKind::RandomForest), d.x, d.y, groups, Regime::StratifiedKFold, 2, 3);
  CHECK(a.pooled_metrics.accuracy == b.pooled_metrics.accuracy);
  CHECK(a.pooled.total() == 200);
  double sum = 0, lo = 1, hi = 0;
  for (const auto& f : a.folds) {
    sum += f.metrics.accuracy;
    lo = std::min(lo, f.metrics.accuracy);
    hi = std::max(hi, f.metrics.accuracy);
  }
  CHECK(a.mean.accuracy == doctest::Approx(sum / 5));
  CHECK(a.min_accuracy == lo);
  CHECK(a.max_accuracy == hi);
  const auto& p = a.pooled_metrics;
  CHECK(p.f1 == doctest::Approx(2 * p.precision * p.recall / (p.precision + p.recall)));
}

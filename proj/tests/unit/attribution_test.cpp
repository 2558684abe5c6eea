#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "learn_data.hpp"
#include "vocstress/attribution.hpp"
#include "vocstress/error.hpp"

using namespace vocstress;

namespace {

// E[f | x_S] with unknown features averaged over children by cover.
double conditional(const Tree& t, std::span<const double> x, unsigned mask, int node = 0) {
  const TreeNode& n = t.nodes[static_cast<std::size_t>(node)];
  if (n.feature < 0) return n.value;
  if (mask >> n.feature & 1u) return conditional(t, x, mask, x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  const TreeNode& l = t.nodes[static_cast<std::size_t>(n.left)];
  const TreeNode& r = t.nodes[static_cast<std::size_t>(n.right)];
  return (l.cover * conditional(t, x, mask, n.left) + r.cover * conditional(t, x, mask, n.right)) / (l.cover + r.cover);
}

// Shapley values by enumerating every coalition.
std::vector<double> brute_shapley(const Tree& t, std::span<const double> x, std::size_t d) {
  std::vector<double> fact(d + 1, 1.0);
  for (std::size_t i = 1; i <= d; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  std::vector<double> v(1u << d);
  for (unsigned s = 0; s < v.size(); ++s) v[s] = conditional(t, x, s);
  std::vector<double> phi(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (unsigned s = 0; s < v.size(); ++s) {
      if (s >> i & 1u) continue;
      const auto k = static_cast<std::size_t>(std::popcount(s));
      phi[i] += fact[k] * fact[d - k - 1] / fact[d] * (v[s | 1u << i] - v[s]);
    }
  }
  return phi;
}

Tree stump(int feature, double threshold) {
  Tree t;
  t.nodes = {{feature, threshold, 1, 2, 0, 100}, {-1, 0, -1, -1, 0, 50}, {-1, 0, -1, -1, 1, 50}};
  return t;
}

Dataset hr_only_dataset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0, 1);
  Dataset d;
  for (int p = 0; p < 10; ++p) {
    for (int k = 0; k < 30; ++k) {
      FeatureWindow w;
      w.participant = "P" + std::to_string(10 + p);
      w.label = k % 2 ? Label::Stress : Label::NonStress;
      w.phase = k % 2 ? Phase::Arithmetic : Phase::Baseline;
      for (double& f : w.features) f = z(rng);
      for (std::size_t i : block_features(FeatureBlock::Hr)) w.features[i] += w.label == Label::Stress ? 2.0 : -2.0;
      d.windows.push_back(w);
    }
  }
  return d;
}

}  // namespace

TEST_CASE("stump attributes everything to its split feature") {
  const Tree t = stump(7, 0.0);
  std::vector<double> x(kFeatureCount, 0.3);
  x[7] = 1.0;
  const ShapValues s = tree_shap(t, x, kFeatureCount);
  CHECK(s.base == doctest::Approx(0.5));
  CHECK(s.phi[7] == doctest::Approx(0.5));
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (i != 7) CHECK(s.phi[i] == 0.0);
  }
  x[7] = -1.0;
  CHECK(tree_shap(t, x, kFeatureCount).phi[7] == doctest::Approx(-0.5));
}

TEST_CASE("symmetric features share credit equally") {
  // AND of two features with balanced covers.
  Tree t;
  t.nodes = {{0, 0.5, 1, 2, 0, 100}, {-1, 0, -1, -1, 0, 50}, {1, 0.5, 3, 4, 0, 50},
             {-1, 0, -1, -1, 0, 25}, {-1, 0, -1, -1, 1, 25}};
  const std::vector<double> x = {1.0, 1.0, 0.0};
  const ShapValues s = tree_shap(t, x, 3);
  CHECK(s.phi[0] == doctest::Approx(s.phi[1]));
  CHECK(s.phi[2] == 0.0);
  CHECK(s.base + s.phi[0] + s.phi[1] == doctest::Approx(1.0));
}

TEST_CASE("TreeSHAP equals exhaustive coalition enumeration") {
  const auto d = testing::xor_set(300, 77, 4);
  ForestParams p;
  p.n_trees = 8;
  p.max_depth = 5;
  const Forest f = train_forest(p, d.x, d.y, 3);
  double worst = 0;
  for (std::size_t r = 0; r < 40; ++r) {
    const auto x = d.x.row(r);
    std::vector<double> mean(6, 0.0);
    for (const Tree& t : f.trees) {
      const auto want = brute_shapley(t, x, 6);
      const auto got = tree_shap(t, x, 6).phi;
      for (std::size_t i = 0; i < 6; ++i) {
        worst = std::max(worst, std::fabs(want[i] - got[i]));
        mean[i] += want[i] / static_cast<double>(f.trees.size());
      }
    }
    const auto forest_phi = tree_shap(f, x).phi;
    for (std::size_t i = 0; i < 6; ++i) worst = std::max(worst, std::fabs(mean[i] - forest_phi[i]));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("local accuracy over many rows") {
  const auto d = testing::xor_set(500, 5, 20);
  const Forest f = train_forest({}, d.x, d.y, 8, 2);
  double worst = 0;
  for (std::size_t r = 0; r < d.x.rows; ++r) {
    const ShapValues s = tree_shap(f, d.x.row(r));
    const double sum = std::accumulate(s.phi.begin(), s.phi.end(), s.base);
    worst = std::max(worst, std::fabs(sum - f.predict_proba(d.x.row(r))));
  }
  CHECK(worst < 1e-9);
  CHECK_THROWS_AS(tree_shap(f, std::vector<double>(3, 0.0)), Error);
}

TEST_CASE("unused feature receives zero attribution") {
  auto d = testing::xor_set(200, 6, 2);
  for (std::size_t r = 0; r < d.x.rows; ++r) d.x(r, 3) = 4.0;  // constant, never split on
  const Forest f = train_forest({}, d.x, d.y, 2);
  const auto imp = global_importance(f, d.x);
  CHECK(imp[3] == 0.0);
  CHECK(imp[0] > imp[2]);
  CHECK(imp[1] > imp[2]);
}

TEST_CASE("duplicated feature splits its importance") {
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0, 1);
    Matrix one(300, 3), two(300, 4);
    std::vector<int> y(300);
    for (std::size_t r = 0; r < 300; ++r) {
      const double a = z(rng), b = z(rng), c = z(rng);
      y[r] = a + 0.5 * z(rng) > 0 ? 1 : 0;
      one(r, 0) = a;
      one(r, 1) = b;
      one(r, 2) = c;
      two(r, 0) = a;
      two(r, 1) = b;
      two(r, 2) = c;
      two(r, 3) = a;
    }
    ForestParams p;
    p.features_per_split = 3;
    const auto i1 = global_importance(train_forest(p, one, y, seed), one);
    const auto i2 = global_importance(train_forest(p, two, y, seed), two);
    const double combined = i2[0] + i2[3];
    CAPTURE(seed);
    if (std::fabs(combined - i1[0]) <= 0.2 * i1[0]) ++ok;
    CHECK(i2[0] > i2[1]);
    CHECK(i2[3] > i2[1]);
  }
  CHECK(ok == 10);
}

TEST_CASE("modality shares") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> imp(kFeatureCount);
  for (double& v : imp) v = u(rng);
  const ModalityShare s = modality_share(imp);
  CHECK(s.percent[0] + s.percent[1] + s.percent[2] == doctest::Approx(100));
  CHECK(s.block_percent[0] + s.block_percent[1] + s.block_percent[2] + s.block_percent[3] == doctest::Approx(100));
  double voc = 0;
  for (FeatureBlock b : {FeatureBlock::Tvoc, FeatureBlock::Gas320}) {
    for (std::size_t i : block_features(b)) voc += imp[i];
  }
  CHECK(s.total[static_cast<std::size_t>(ModalityGroup::Voc)] == doctest::Approx(voc));
  for (std::size_t b = 0; b < 4; ++b) {
    const auto& top = s.top[b];
    CHECK(top.size() == 3);
    for (std::size_t k = 1; k < top.size(); ++k) CHECK(imp[top[k - 1]] >= imp[top[k]]);
    for (std::size_t i : block_features(kAllBlocks[b])) {
      if (std::find(top.begin(), top.end(), i) == top.end()) CHECK(imp[i] <= imp[top.back()]);
    }
  }
  const ModalityShare zero = modality_share(std::vector<double>(kFeatureCount, 0.0));
  for (double p : zero.percent) CHECK(is_missing(p));
}

TEST_CASE("fusion table with a single informative modality") {
  const Dataset d = hr_only_dataset(12);
  ModelSpec spec;
  spec.rf.n_trees = 50;
  const FusionTable t = fusion_table(d, spec, Regime::StratifiedKFold, 4);
  REQUIRE(t.unimodal.size() == 4);
  double best = 0;
  for (const auto& row : t.unimodal) {
    CAPTURE(row.name);
    if (row.name == block_name(FeatureBlock::Hr)) {
      CHECK(row.accuracy > 0.95);
      CHECK(std::fabs(row.accuracy - t.fusion.accuracy) <= 0.03);
    } else {
      CHECK(row.accuracy >= 0.4);
      CHECK(row.accuracy <= 0.6);
    }
    best = std::max(best, row.accuracy);
  }
  CHECK(t.fusion.n_features == kFeatureCount);
  CHECK(t.improvement == doctest::Approx(t.fusion.accuracy - best));
}

TEST_CASE("attribution report on the full dataset") {
  const Dataset d = hr_only_dataset(13);
  ModelSpec spec;
  spec.rf.n_trees = 30;
  const AttributionReport r = attribute(d, spec, Regime::StratifiedKFold, 9);
  CHECK(r.samples == d.size());
  CHECK(r.importance.size() == kFeatureCount);
  CHECK(r.share.percent[static_cast<std::size_t>(ModalityGroup::Hr)] > 50);
}

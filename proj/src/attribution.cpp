#include "vocstress/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vocstress/error.hpp"
#include "vocstress/parallel.hpp"

namespace vocstress {

namespace {

struct PathElem {
  int feature = -1;
  double zero = 0.0;  // fraction of cover flowing down this path
  double one = 0.0;   // 1 if x follows this path, else 0
  double weight = 0.0;
};

void extend(PathElem* path, std::size_t depth, double zero, double one, int feature) {
  path[depth] = {feature, zero, one, depth == 0 ? 1.0 : 0.0};
  const double d1 = static_cast<double>(depth + 1);
  for (std::size_t k = depth; k-- > 0;) {
    path[k + 1].weight += one * path[k].weight * static_cast<double>(k + 1) / d1;
    path[k].weight = zero * path[k].weight * static_cast<double>(depth - k) / d1;
  }
}

void unwind(PathElem* path, std::size_t depth, std::size_t i) {
  const double one = path[i].one, zero = path[i].zero;
  const double d1 = static_cast<double>(depth + 1);
  double next = path[depth].weight;
  for (std::size_t k = depth; k-- > 0;) {
    if (one != 0) {
      const double tmp = path[k].weight;
      path[k].weight = next * d1 / (static_cast<double>(k + 1) * one);
      next = tmp - path[k].weight * zero * static_cast<double>(depth - k) / d1;
    } else {
      path[k].weight = path[k].weight * d1 / (zero * static_cast<double>(depth - k));
    }
  }
  for (std::size_t k = i; k < depth; ++k) {
    path[k].feature = path[k + 1].feature;
    path[k].zero = path[k + 1].zero;
    path[k].one = path[k + 1].one;
  }
}

double unwound_sum(const PathElem* path, std::size_t depth, std::size_t i) {
  const double one = path[i].one, zero = path[i].zero;
  const double d1 = static_cast<double>(depth + 1);
  double next = path[depth].weight;
  double total = 0;
  for (std::size_t k = depth; k-- > 0;) {
    if (one != 0) {
      const double tmp = next * d1 / (static_cast<double>(k + 1) * one);
      total += tmp;
      next = path[k].weight - tmp * zero * (static_cast<double>(depth - k) / d1);
    } else if (zero != 0) {
      total += (path[k].weight / zero) / (static_cast<double>(depth - k) / d1);
    }
  }
  return total;
}

class ShapWalker {
 public:
  ShapWalker(const Tree& t, std::span<const double> x, std::vector<double>& phi) : t_(t), x_(x), phi_(phi) {
    const std::size_t d = t.depth() + 2;
    path_.resize(d * (d + 1) / 2 + d);
  }

  void run() { recurse(0, 0, path_.data(), 1.0, 1.0, -1); }

 private:
  void recurse(std::size_t node, std::size_t depth, PathElem* parent, double zero, double one, int feature) {
    PathElem* path = parent + depth + 1;
    std::copy(parent, parent + depth + 1, path);
    extend(path, depth, zero, one, feature);
    const TreeNode& n = t_.nodes[node];
    if (n.feature < 0) {
      for (std::size_t i = 1; i <= depth; ++i) {
        const double w = unwound_sum(path, depth, i);
        phi_[static_cast<std::size_t>(path[i].feature)] += w * (path[i].one - path[i].zero) * n.value;
      }
      return;
    }
    const auto hot = static_cast<std::size_t>(x_[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    const auto cold = static_cast<std::size_t>(hot == static_cast<std::size_t>(n.left) ? n.right : n.left);
    double in_zero = 1.0, in_one = 1.0;
    std::size_t k = 0;
    for (; k <= depth; ++k) {
      if (path[k].feature == n.feature) break;
    }
    if (k != depth + 1) {
      in_zero = path[k].zero;
      in_one = path[k].one;
      unwind(path, depth, k);
      --depth;
    }
    const double cover = n.cover;
    recurse(hot, depth + 1, path, t_.nodes[hot].cover / cover * in_zero, in_one, n.feature);
    recurse(cold, depth + 1, path, t_.nodes[cold].cover / cover * in_zero, 0.0, n.feature);
  }

  const Tree& t_;
  std::span<const double> x_;
  std::vector<double>& phi_;
  std::vector<PathElem> path_;
};

double expected_value(const Tree& t) {
  double s = 0;
  for (const auto& n : t.nodes) {
    if (n.feature < 0) s += n.value * n.cover;
  }
  return t.nodes[0].cover > 0 ? s / t.nodes[0].cover : t.nodes[0].value;
}

}  // namespace

ShapValues tree_shap(const Tree& tree, std::span<const double> x, std::size_t n_features) {
  if (x.size() != n_features) throw Error(ErrorCode::DimensionMismatch, "feature vector width differs from model");
  ShapValues out;
  out.phi.assign(n_features, 0.0);
  out.base = expected_value(tree);
  ShapWalker(tree, x, out.phi).run();
  return out;
}

ShapValues tree_shap(const Forest& forest, std::span<const double> x) {
  if (x.size() != forest.n_features) {
    throw Error(ErrorCode::DimensionMismatch, "feature vector width differs from model");
  }
  ShapValues out;
  out.phi.assign(forest.n_features, 0.0);
  if (forest.trees.empty()) return out;
  std::vector<double> phi(forest.n_features);
  for (const auto& t : forest.trees) {
    std::fill(phi.begin(), phi.end(), 0.0);
    ShapWalker(t, x, phi).run();
    for (std::size_t i = 0; i < phi.size(); ++i) out.phi[i] += phi[i];
    out.base += expected_value(t);
  }
  const auto n = static_cast<double>(forest.trees.size());
  for (auto& v : out.phi) v /= n;
  out.base /= n;
  return out;
}

std::vector<double> global_importance(const Forest& forest, const Matrix& x, std::size_t threads) {
  if (x.cols != forest.n_features) throw Error(ErrorCode::DimensionMismatch, "feature width differs from model");
  std::vector<std::vector<double>> rows(x.rows);
  parallel_for(x.rows, threads, [&](std::size_t r) { rows[r] = tree_shap(forest, x.row(r)).phi; });
  std::vector<double> out(x.cols, 0.0);
  for (const auto& p : rows) {
    for (std::size_t i = 0; i < p.size(); ++i) out[i] += std::fabs(p[i]);
  }
  if (x.rows) {
    for (auto& v : out) v /= static_cast<double>(x.rows);
  }
  return out;
}

std::string_view group_name(ModalityGroup m) noexcept {
  switch (m) {
    case ModalityGroup::Hr: return "HR";
    case ModalityGroup::Voc: return "VOC";
    case ModalityGroup::Gsr: return "GSR";
  }
  return "?";
}

ModalityGroup modality_of(FeatureBlock b) noexcept {
  switch (b) {
    case FeatureBlock::Hr: return ModalityGroup::Hr;
    case FeatureBlock::Gsr: return ModalityGroup::Gsr;
    default: return ModalityGroup::Voc;
  }
}

ModalityShare modality_share(std::span<const double> importance) {
  if (importance.size() != kFeatureCount) throw Error(ErrorCode::DimensionMismatch, "importance width");
  ModalityShare s;
  double total = 0;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    const auto b = block_of(i);
    s.block_total[static_cast<std::size_t>(b)] += importance[i];
    s.total[static_cast<std::size_t>(modality_of(b))] += importance[i];
    total += importance[i];
  }
  for (std::size_t m = 0; m < 3; ++m) s.percent[m] = total > 0 ? 100.0 * s.total[m] / total : kMissing;
  for (std::size_t b = 0; b < 4; ++b) {
    s.block_percent[b] = total > 0 ? 100.0 * s.block_total[b] / total : kMissing;
    auto idx = block_features(kAllBlocks[b]);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t c) { return importance[a] > importance[c]; });
    idx.resize(std::min<std::size_t>(3, idx.size()));
    s.top[b] = idx;
  }
  return s;
}

FusionTable fusion_table(const Dataset& data, const ModelSpec& spec, Regime regime, std::uint64_t seed,
                         std::size_t threads) {
  const Matrix x = data.matrix();
  const auto y = data.labels();
  const auto g = data.groups();
  FusionTable t;
  t.regime = regime;
  std::vector<std::size_t> all;
  auto row_for = [&](std::string name, const std::vector<std::size_t>& cols) {
    const Matrix sub = x.select_cols(cols);
    const auto rep = evaluate(spec, sub, y, g, regime, seed, threads);
    FusionRow r;
    r.name = std::move(name);
    r.n_features = cols.size();
    r.accuracy = rep.mean.accuracy;
    r.f1 = rep.mean.f1;
    r.auc = rep.mean.auc;
    return r;
  };
  for (FeatureBlock b : kAllBlocks) {
    const auto cols = block_features(b);
    bool observed = false;
    for (std::size_t r = 0; r < x.rows && !observed; ++r) {
      for (auto c : cols) observed = observed || !is_missing(x(r, c));
    }
    if (!observed) continue;
    all.insert(all.end(), cols.begin(), cols.end());
    t.unimodal.push_back(row_for(std::string(block_name(b)), cols));
  }
  if (t.unimodal.empty()) throw Error(ErrorCode::DegenerateInput, "dataset has no observed feature");
  t.fusion = row_for("Fusion", all);
  double best = 0;
  for (const auto& r : t.unimodal) best = std::max(best, r.accuracy);
  t.improvement = t.fusion.accuracy - best;
  return t;
}

AttributionReport attribute(const Dataset& data, const ModelSpec& spec, Regime regime, std::uint64_t seed,
                            std::size_t threads) {
  if (spec.kind != ModelKind::RandomForest) throw Error(ErrorCode::InvalidSpec, "attribution needs a random forest");
  AttributionReport rep;
  const Matrix raw = data.matrix();
  std::vector<double> means(raw.cols, 0.0);
  for (std::size_t c = 0; c < raw.cols; ++c) {
    double s = 0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < raw.rows; ++r) {
      if (!is_missing(raw(r, c))) {
        s += raw(r, c);
        ++n;
      }
    }
    if (n) means[c] = s / static_cast<double>(n);
  }
  const Matrix x = fill_missing(raw, means);
  const auto y = data.labels();
  const Forest forest = train_forest(spec.rf, x, y, seed, threads);
  rep.samples = x.rows;
  rep.importance = global_importance(forest, x, threads);
  double base = 0;
  for (const auto& t : forest.trees) base += expected_value(t);
  rep.base = forest.trees.empty() ? 0.0 : base / static_cast<double>(forest.trees.size());
  rep.share = modality_share(rep.importance);
  rep.fusion = fusion_table(data, spec, regime, seed, threads);
  return rep;
}

}  // namespace vocstress

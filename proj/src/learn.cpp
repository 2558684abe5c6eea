#include "vocstress/learn.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "vocstress/error.hpp"
#include "vocstress/parallel.hpp"
#include "vocstress/text_codec.hpp"

namespace vocstress {

namespace {

void check_xy(const Matrix& x, std::span<const int> y) {
  if (x.rows != y.size()) throw Error(ErrorCode::DimensionMismatch, "rows and labels differ in length");
  if (x.rows == 0) throw Error(ErrorCode::DegenerateInput, "no training rows");
  for (double v : x.data) {
    if (!std::isfinite(v)) throw Error(ErrorCode::DegenerateInput, "training matrix has missing or non-finite cells");
  }
  for (int v : y) {
    if (v != 0 && v != 1) throw Error(ErrorCode::DegenerateInput, "labels must be 0 or 1");
  }
}

// --- forest ----------------------------------------------------------------

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted child impurity (lower is better)
};

double gini(double w0, double w1) {
  const double w = w0 + w1;
  if (w <= 0) return 0.0;
  const double p0 = w0 / w, p1 = w1 / w;
  return 1.0 - p0 * p0 - p1 * p1;
}

class TreeBuilder {
 public:
  TreeBuilder(const ForestParams& params, const Matrix& x, std::span<const int> y, std::vector<double> weight,
              std::uint64_t seed)
      : params_(params), x_(x), y_(y), weight_(std::move(weight)), rng_(seed) {
    const std::size_t d = x.cols;
    m_ = params.features_per_split ? std::min(params.features_per_split, d)
                                   : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
    m_ = std::max<std::size_t>(m_, 1);
  }

  Tree build() {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < x_.rows; ++i) {
      if (weight_[i] > 0) idx.push_back(i);
    }
    grow(idx, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t>& idx, std::size_t depth) {
    double w0 = 0, w1 = 0;
    for (auto i : idx) (y_[i] ? w1 : w0) += weight_[i];
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({});
    tree_.nodes[id].cover = w0 + w1;
    tree_.nodes[id].value = w1 > w0 ? 1.0 : 0.0;
    if (depth >= params_.max_depth || w0 + w1 < static_cast<double>(params_.min_samples_split) || w0 == 0 ||
        w1 == 0) {
      return id;
    }
    const auto split = best_split(idx, w0, w1);
    if (split.feature < 0) return id;
    std::vector<std::size_t> left, right;
    for (auto i : idx) (x_(i, split.feature) <= split.threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    tree_.nodes[id].feature = split.feature;
    tree_.nodes[id].threshold = split.threshold;
    const int l = grow(left, depth + 1);
    tree_.nodes[id].left = l;
    const int r = grow(right, depth + 1);
    tree_.nodes[id].right = r;
    return id;
  }

  // Candidate features are drawn in random order; the first m are searched,
  // and further ones only while no valid split has been found.
  Split best_split(const std::vector<std::size_t>& idx, double w0, double w1) {
    const std::size_t d = x_.cols;
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);
    Split best;
    best.impurity = gini(w0, w1) * (w0 + w1);
    std::vector<std::size_t> batch(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m_));
    std::sort(batch.begin(), batch.end());
    for (auto f : batch) scan_feature(idx, f, w0, w1, best);
    for (std::size_t k = m_; k < d && best.feature < 0; ++k) scan_feature(idx, order[k], w0, w1, best);
    return best;
  }

  void scan_feature(const std::vector<std::size_t>& idx, std::size_t f, double w0, double w1, Split& best) {
    std::vector<std::size_t> s = idx;
    std::sort(s.begin(), s.end(), [&](std::size_t a, std::size_t b) { return x_(a, f) < x_(b, f); });
    const double parent = gini(w0, w1) * (w0 + w1);
    double l0 = 0, l1 = 0;
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
      (y_[s[k]] ? l1 : l0) += weight_[s[k]];
      const double lo = x_(s[k], f), hi = x_(s[k + 1], f);
      if (!(hi > lo)) continue;
      // Midpoint between neighbouring distinct values.
      double v = lo / 2 + hi / 2;
      if (!(v < hi)) v = lo;
      const double r0 = w0 - l0, r1 = w1 - l1;
      const double imp = gini(l0, l1) * (l0 + l1) + gini(r0, r1) * (r0 + r1);
      const bool better = imp < best.impurity ||
                          (imp == best.impurity && best.feature >= 0 && imp < parent &&
                           (static_cast<int>(f) < best.feature ||
                            (static_cast<int>(f) == best.feature && v < best.threshold)));
      if (better) {
        best.feature = static_cast<int>(f);
        best.threshold = v;
        best.impurity = imp;
      }
    }
  }

  const ForestParams& params_;
  const Matrix& x_;
  std::span<const int> y_;
  std::vector<double> weight_;
  std::mt19937_64 rng_;
  std::size_t m_ = 1;
  Tree tree_;
};

// --- svm -------------------------------------------------------------------

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Sigmoid fit by Newton's method with backtracking (Lin, Lin and Weng).
std::pair<double, double> platt_fit(const std::vector<double>& f, std::span<const int> y) {
  double prior1 = 0, prior0 = 0;
  for (int v : y) (v ? prior1 : prior0) += 1;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  const std::size_t n = f.size();
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = y[i] ? hi : lo;
  double a = 0.0, b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  auto objective = [&](double A, double B) {
    double fv = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = f[i] * A + B;
      fv += z >= 0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1) * z + std::log1p(std::exp(z));
    }
    return fv;
  };
  double fval = objective(a, b);
  const double sigma = 1e-12;
  for (int it = 0; it < 100; ++it) {
    double h11 = sigma, h22 = sigma, h21 = 0, g1 = 0, g2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = f[i] * a + b;
      double p, q;
      if (z >= 0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += f[i] * f[i] * d2;
      h22 += d2;
      h21 += f[i] * d2;
      const double d1 = t[i] - p;
      g1 += f[i] * d1;
      g2 += d1;
    }
    if (std::fabs(g1) < 1e-5 && std::fabs(g2) < 1e-5) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    bool moved = false;
    while (step >= 1e-10) {
      const double na = a + step * da, nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    if (!moved) break;
  }
  return {a, b};
}

std::string tok(double v) { return format_real(v); }

}  // namespace

std::string_view model_kind_name(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::RandomForest: return "rf";
    case ModelKind::SvmRbf: return "svm-rbf";
    case ModelKind::SvmLinear: return "svm-linear";
  }
  return "?";
}

std::optional<ModelKind> model_kind_from_name(std::string_view s) noexcept {
  for (auto k : {ModelKind::RandomForest, ModelKind::SvmRbf, ModelKind::SvmLinear}) {
    if (model_kind_name(k) == s) return k;
  }
  return std::nullopt;
}

void validate(const ModelSpec& spec) {
  if (spec.kind == ModelKind::RandomForest) {
    if (spec.rf.n_trees == 0) throw Error(ErrorCode::InvalidSpec, "n_trees must be positive");
    if (spec.rf.max_depth == 0) throw Error(ErrorCode::InvalidSpec, "max_depth must be positive");
    if (spec.rf.min_samples_split < 2) throw Error(ErrorCode::InvalidSpec, "min_samples_split must be >= 2");
  } else {
    if (!(spec.svm.c > 0)) throw Error(ErrorCode::InvalidSpec, "C must be positive");
    if (spec.svm.gamma && !(*spec.svm.gamma > 0)) throw Error(ErrorCode::InvalidSpec, "gamma must be positive");
    if (!(spec.svm.tol > 0)) throw Error(ErrorCode::InvalidSpec, "tol must be positive");
  }
}

double Tree::predict(std::span<const double> x) const {
  std::size_t n = 0;
  while (nodes[n].feature >= 0) {
    n = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[n].feature)] <= nodes[n].threshold ? nodes[n].left
                                                                                                     : nodes[n].right);
  }
  return nodes[n].value;
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t out = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    out = std::max(out, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return out;
}

double Forest::predict_proba(std::span<const double> x) const {
  if (trees.empty()) return 0.0;
  double s = 0;
  for (const auto& t : trees) s += t.predict(x);
  return s / static_cast<double>(trees.size());
}

double Svm::decision(std::span<const double> x) const {
  if (linear) return dot(w, x) - bias;
  double s = 0;
  for (std::size_t i = 0; i < support.size(); ++i) s += coef[i] * std::exp(-gamma * sq_dist(support[i], x));
  return s - bias;
}

double Svm::predict_proba(std::span<const double> x) const {
  const double z = platt_a * decision(x) + platt_b;
  return z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

std::size_t Model::n_features() const {
  return std::visit([](const auto& m) { return m.n_features; }, impl);
}

Forest train_forest(const ForestParams& params, const Matrix& x, std::span<const int> y, std::uint64_t seed,
                    std::size_t threads) {
  check_xy(x, y);
  Forest forest;
  forest.n_features = x.cols;
  forest.trees.resize(params.n_trees);
  parallel_for(params.n_trees, threads, [&](std::size_t t) {
    const std::uint64_t s = derive_seed(seed, t);
    std::vector<double> weight(x.rows, 1.0);
    if (params.bootstrap) {
      std::mt19937_64 rng(derive_seed(s, 0));
      std::uniform_int_distribution<std::size_t> pick(0, x.rows - 1);
      std::fill(weight.begin(), weight.end(), 0.0);
      for (std::size_t i = 0; i < x.rows; ++i) weight[pick(rng)] += 1.0;
    }
    TreeBuilder b(params, x, y, std::move(weight), derive_seed(s, 1));
    forest.trees[t] = b.build();
  });
  return forest;
}

Svm train_svm(const SvmParams& params, bool linear, const Matrix& x, std::span<const int> y) {
  check_xy(x, y);
  const std::size_t n = x.rows, d = x.cols;
  const auto pos = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  if (pos == 0 || pos == n) throw Error(ErrorCode::SingleClassTraining, "SVM training needs both classes");
  Svm m;
  m.linear = linear;
  m.n_features = d;
  if (!linear) {
    if (params.gamma) {
      m.gamma = *params.gamma;
    } else {
      double mean = 0;
      for (double v : x.data) mean += v;
      mean /= static_cast<double>(x.data.size());
      double var = 0;
      for (double v : x.data) var += (v - mean) * (v - mean);
      var /= static_cast<double>(x.data.size());
      m.gamma = var > 0 ? 1.0 / (static_cast<double>(d) * var) : 1.0;
    }
  }
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[i] ? 1.0 : -1.0;
  std::vector<double> q(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double k = linear ? dot(x.row(i), x.row(j)) : std::exp(-m.gamma * sq_dist(x.row(i), x.row(j)));
      q[i * n + j] = q[j * n + i] = ys[i] * ys[j] * k;
    }
  }
  const double c = params.c;
  std::vector<double> alpha(n, 0.0), grad(n, -1.0);
  const std::size_t max_iter = params.max_iter ? params.max_iter : 100 * n;
  auto in_up = [&](std::size_t t) { return (ys[t] > 0 && alpha[t] < c) || (ys[t] < 0 && alpha[t] > 0); };
  auto in_low = [&](std::size_t t) { return (ys[t] > 0 && alpha[t] > 0) || (ys[t] < 0 && alpha[t] < c); };
  m.converged = false;
  std::size_t iter = 0;
  for (; iter < max_iter; ++iter) {
    // Maximal violating pair.
    double gmax = -HUGE_VAL, gmin = HUGE_VAL;
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -ys[t] * grad[t];
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    if (i == n || j == n || gmax - gmin < params.tol) {
      m.converged = true;
      break;
    }
    const double qii = q[i * n + i], qjj = q[j * n + j], qij = q[i * n + j];
    const double old_ai = alpha[i], old_aj = alpha[j];
    if (ys[i] != ys[j]) {
      double quad = qii + qjj + 2 * qij;
      if (quad <= 0) quad = 1e-12;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = qii + qjj - 2 * qij;
      if (quad <= 0) quad = 1e-12;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) grad[t] += q[t * n + i] * dai + q[t * n + j] * daj;
  }
  m.iterations = iter;

  // Offset: mean over free vectors, else midpoint of the feasible range.
  double sum_free = 0, ub = HUGE_VAL, lb = -HUGE_VAL;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = ys[t] * grad[t];
    if (alpha[t] > 0 && alpha[t] < c) {
      sum_free += yg;
      ++n_free;
    } else if ((alpha[t] >= c && ys[t] < 0) || (alpha[t] <= 0 && ys[t] > 0)) {
      ub = std::min(ub, yg);
    } else {
      lb = std::max(lb, yg);
    }
  }
  m.bias = n_free ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;

  if (linear) m.w.assign(d, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] <= 0) continue;
    const double cf = alpha[t] * ys[t];
    if (linear) {
      for (std::size_t k = 0; k < d; ++k) m.w[k] += cf * x(t, k);
    } else {
      m.support.emplace_back(x.row(t).begin(), x.row(t).end());
      m.coef.push_back(cf);
    }
  }
  std::vector<double> f(n);
  for (std::size_t t = 0; t < n; ++t) f[t] = m.decision(x.row(t));
  const auto [a, b] = platt_fit(f, y);
  m.platt_a = a;
  m.platt_b = b;
  return m;
}

Model train(const ModelSpec& spec, const Matrix& x, std::span<const int> y, std::uint64_t seed,
            std::size_t threads) {
  validate(spec);
  Model m;
  m.kind = spec.kind;
  if (spec.kind == ModelKind::RandomForest) {
    m.impl = train_forest(spec.rf, x, y, seed, threads);
  } else {
    m.impl = train_svm(spec.svm, spec.kind == ModelKind::SvmLinear, x, y);
  }
  return m;
}

std::vector<double> predict_proba(const Model& model, const Matrix& x) {
  if (x.cols != model.n_features()) throw Error(ErrorCode::DimensionMismatch, "feature width differs from model");
  std::vector<double> out(x.rows);
  std::visit(
      [&](const auto& m) {
        for (std::size_t i = 0; i < x.rows; ++i) out[i] = m.predict_proba(x.row(i));
      },
      model.impl);
  return out;
}

std::vector<int> predict_labels(const Model& model, const Matrix& x) {
  if (x.cols != model.n_features()) throw Error(ErrorCode::DimensionMismatch, "feature width differs from model");
  std::vector<int> out(x.rows);
  if (const auto* f = std::get_if<Forest>(&model.impl)) {
    for (std::size_t i = 0; i < x.rows; ++i) out[i] = f->predict_proba(x.row(i)) > 0.5 ? 1 : 0;
  } else {
    const auto& s = std::get<Svm>(model.impl);
    for (std::size_t i = 0; i < x.rows; ++i) out[i] = s.decision(x.row(i)) > 0 ? 1 : 0;
  }
  return out;
}

// --- serialization -----------------------------------------------------------

std::string write_model(const Model& model) {
  std::string out = "vocstress-model 1\n";
  out += "kind " + std::string(model_kind_name(model.kind)) + "\n";
  if (const auto* f = std::get_if<Forest>(&model.impl)) {
    out += "features " + std::to_string(f->n_features) + "\n";
    out += "trees " + std::to_string(f->trees.size()) + "\n";
    for (const auto& t : f->trees) {
      out += "tree " + std::to_string(t.nodes.size()) + "\n";
      for (const auto& n : t.nodes) {
        out += std::to_string(n.feature) + ' ' + tok(n.threshold) + ' ' + std::to_string(n.left) + ' ' +
               std::to_string(n.right) + ' ' + tok(n.value) + ' ' + tok(n.cover) + '\n';
      }
    }
  } else {
    const auto& s = std::get<Svm>(model.impl);
    out += "features " + std::to_string(s.n_features) + "\n";
    out += "gamma " + tok(s.gamma) + "\n";
    out += "bias " + tok(s.bias) + "\n";
    out += "platt " + tok(s.platt_a) + ' ' + tok(s.platt_b) + "\n";
    out += "converged " + std::string(s.converged ? "1" : "0") + ' ' + std::to_string(s.iterations) + "\n";
    out += "w " + std::to_string(s.w.size());
    for (double v : s.w) out += ' ' + tok(v);
    out += "\nsupport " + std::to_string(s.support.size()) + "\n";
    for (std::size_t i = 0; i < s.support.size(); ++i) {
      out += tok(s.coef[i]);
      for (double v : s.support[i]) out += ' ' + tok(v);
      out += '\n';
    }
  }
  return out;
}

namespace {

class Reader {
 public:
  explicit Reader(std::string_view t) : text_(t) {}

  std::string_view word() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\n')) ++pos_;
    start_ = pos_;
    while (pos_ < text_.size() && text_[pos_] != ' ' && text_[pos_] != '\n') ++pos_;
    if (start_ == pos_) throw ParseError(start_, "unexpected end of model");
    return text_.substr(start_, pos_ - start_);
  }
  void expect(std::string_view w) {
    if (word() != w) throw ParseError(start_, "expected '" + std::string(w) + "'");
  }
  double real() {
    const auto v = parse_real(word());
    if (!v) throw ParseError(start_, "bad number");
    return *v;
  }
  std::int64_t integer() {
    const auto v = parse_int(word());
    if (!v) throw ParseError(start_, "bad integer");
    return *v;
  }
  std::size_t count(std::size_t limit = 100'000'000) {
    const auto v = integer();
    if (v < 0 || static_cast<std::size_t>(v) > limit) throw ParseError(start_, "count out of range");
    return static_cast<std::size_t>(v);
  }
  std::size_t offset() const { return start_; }
  bool done() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\n')) ++pos_;
    return pos_ == text_.size();
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t start_ = 0;
};

}  // namespace

Model read_model(std::string_view text) {
  Reader r(text);
  r.expect("vocstress-model");
  if (r.integer() != 1) throw ParseError(r.offset(), "unsupported model version");
  r.expect("kind");
  const auto kind = model_kind_from_name(r.word());
  if (!kind) throw ParseError(r.offset(), "unknown model kind");
  Model m;
  m.kind = *kind;
  r.expect("features");
  const std::size_t d = r.count();
  if (*kind == ModelKind::RandomForest) {
    Forest f;
    f.n_features = d;
    r.expect("trees");
    f.trees.resize(r.count());
    for (auto& t : f.trees) {
      r.expect("tree");
      t.nodes.resize(r.count());
      if (t.nodes.empty()) throw ParseError(r.offset(), "empty tree");
      const auto nn = static_cast<std::int64_t>(t.nodes.size());
      for (auto& n : t.nodes) {
        const auto feat = r.integer();
        if (feat < -1 || feat >= static_cast<std::int64_t>(d)) throw ParseError(r.offset(), "feature index");
        n.feature = static_cast<int>(feat);
        n.threshold = r.real();
        const auto l = r.integer(), rt = r.integer();
        if (feat >= 0 && (l <= 0 || l >= nn || rt <= 0 || rt >= nn)) throw ParseError(r.offset(), "child index");
        n.left = static_cast<int>(l);
        n.right = static_cast<int>(rt);
        n.value = r.real();
        n.cover = r.real();
      }
    }
    m.impl = std::move(f);
  } else {
    Svm s;
    s.linear = *kind == ModelKind::SvmLinear;
    s.n_features = d;
    r.expect("gamma");
    s.gamma = r.real();
    r.expect("bias");
    s.bias = r.real();
    r.expect("platt");
    s.platt_a = r.real();
    s.platt_b = r.real();
    r.expect("converged");
    s.converged = r.integer() != 0;
    s.iterations = r.count(~std::size_t{0} >> 1);
    r.expect("w");
    s.w.resize(r.count());
    if (s.linear && s.w.size() != d) throw ParseError(r.offset(), "weight vector width");
    for (auto& v : s.w) v = r.real();
    r.expect("support");
    const std::size_t ns = r.count();
    for (std::size_t i = 0; i < ns; ++i) {
      s.coef.push_back(r.real());
      std::vector<double> sv(d);
      for (auto& v : sv) v = r.real();
      s.support.push_back(std::move(sv));
    }
    m.impl = std::move(s);
  }
  if (!r.done()) throw ParseError(r.offset(), "trailing data after model");
  return m;
}

// --- metrics -----------------------------------------------------------------

double auc(std::span<const int> y, std::span<const double> scores) {
  if (y.size() != scores.size()) throw Error(ErrorCode::DimensionMismatch, "labels and scores differ in length");
  const std::size_t n = y.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0, n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (y[order[k]]) {
        rank_sum += mid;
        n_pos += 1;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) return kMissing;
  return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg);
}

Confusion confusion(std::span<const int> y, std::span<const int> predicted) {
  if (y.size() != predicted.size()) throw Error(ErrorCode::DimensionMismatch, "labels and predictions differ");
  Confusion c;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i]) {
      (predicted[i] ? c.tp : c.fn) += 1;
    } else {
      (predicted[i] ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

Metrics metrics_from(const Confusion& c) {
  Metrics m;
  const auto f = [](std::size_t v) { return static_cast<double>(v); };
  m.accuracy = c.total() ? f(c.tp + c.tn) / f(c.total()) : 0.0;
  m.precision = c.tp + c.fp ? f(c.tp) / f(c.tp + c.fp) : 0.0;
  m.recall = c.tp + c.fn ? f(c.tp) / f(c.tp + c.fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

// --- cross-validation --------------------------------------------------------

std::string_view regime_name(Regime r) noexcept { return r == Regime::Loso ? "loso" : "kfold"; }

std::optional<Regime> regime_from_name(std::string_view s) noexcept {
  if (s == "kfold") return Regime::StratifiedKFold;
  if (s == "loso") return Regime::Loso;
  return std::nullopt;
}

std::vector<std::size_t> stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::InvalidSpec, "k must be at least 2");
  std::vector<std::size_t> fold(labels.size());
  std::size_t counter = 0;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) idx.push_back(i);
    }
    if (idx.size() < k) {
      throw Error(ErrorCode::TooFewPerClass, "class " + std::to_string(cls) + " has " + std::to_string(idx.size()) +
                                                 " samples, fewer than k = " + std::to_string(k));
    }
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(cls)));
    std::shuffle(idx.begin(), idx.end(), rng);
    for (auto i : idx) fold[i] = counter++ % k;
  }
  return fold;
}

std::vector<std::size_t> loso_split(std::span<const std::string> groups) {
  std::map<std::string, std::size_t> ids;
  for (const auto& g : groups) ids.emplace(g, 0);
  if (ids.size() < 2) throw Error(ErrorCode::SingleParticipant, "LOSO needs at least two participants");
  std::size_t next = 0;
  for (auto& [g, id] : ids) id = next++;
  std::vector<std::size_t> fold;
  fold.reserve(groups.size());
  for (const auto& g : groups) fold.push_back(ids[g]);
  return fold;
}

FoldOutcome train_fold(const ModelSpec& spec, const Matrix& x, std::span<const int> y,
                       std::span<const std::size_t> train, std::span<const std::size_t> test, std::uint64_t seed,
                       std::size_t threads) {
  const Matrix xtr_raw = x.select_rows(train);
  std::vector<double> means(x.cols, 0.0);
  for (std::size_t c = 0; c < x.cols; ++c) {
    double s = 0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < xtr_raw.rows; ++r) {
      if (!is_missing(xtr_raw(r, c))) {
        s += xtr_raw(r, c);
        ++n;
      }
    }
    if (n) means[c] = s / static_cast<double>(n);
  }
  const Matrix xtr = fill_missing(xtr_raw, means);
  const Matrix xte = fill_missing(x.select_rows(test), means);
  std::vector<int> ytr, yte;
  for (auto i : train) ytr.push_back(y[i]);
  for (auto i : test) yte.push_back(y[i]);
  FoldOutcome out;
  out.test.assign(test.begin(), test.end());
  out.model = vocstress::train(spec, xtr, ytr, seed, threads);
  out.scores = predict_proba(out.model, xte);
  out.predicted = predict_labels(out.model, xte);
  out.confusion = confusion(yte, out.predicted);
  out.metrics = metrics_from(out.confusion);
  out.metrics.auc = auc(yte, out.scores);
  return out;
}

EvalReport evaluate(const ModelSpec& spec, const Matrix& x, std::span<const int> y,
                    std::span<const std::string> groups, Regime regime, std::uint64_t seed, std::size_t threads) {
  validate(spec);
  if (x.rows != y.size() || groups.size() != y.size()) {
    throw Error(ErrorCode::DimensionMismatch, "matrix, labels and groups differ in length");
  }
  std::vector<std::size_t> fold;
  std::vector<std::string> names;
  if (regime == Regime::Loso) {
    fold = loso_split(groups);
    std::map<std::size_t, std::string> by_id;
    for (std::size_t i = 0; i < groups.size(); ++i) by_id[fold[i]] = groups[i];
    for (auto& [id, g] : by_id) names.push_back(g);
  } else {
    fold = stratified_kfold(y, 5, seed);
    for (int f = 1; f <= 5; ++f) names.push_back("fold" + std::to_string(f));
  }
  EvalReport rep;
  rep.kind = spec.kind;
  rep.regime = regime;
  rep.folds.resize(names.size());
  // Folds run in parallel; trees inside a fold run serially.
  parallel_for(names.size(), threads, [&](std::size_t f) {
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? te : tr).push_back(i);
    rep.folds[f] = train_fold(spec, x, y, tr, te, derive_seed(seed, 1000 + f), 1);
    rep.folds[f].name = names[f];
  });

  auto summarize = [&](auto get, double& mean, double& sd) {
    std::vector<double> v;
    for (const auto& f : rep.folds) {
      const double x = get(f.metrics);
      if (!is_missing(x)) v.push_back(x);
    }
    if (v.empty()) {
      mean = sd = kMissing;
      return;
    }
    mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  };
  summarize([](const Metrics& m) { return m.accuracy; }, rep.mean.accuracy, rep.sd.accuracy);
  summarize([](const Metrics& m) { return m.precision; }, rep.mean.precision, rep.sd.precision);
  summarize([](const Metrics& m) { return m.recall; }, rep.mean.recall, rep.sd.recall);
  summarize([](const Metrics& m) { return m.f1; }, rep.mean.f1, rep.sd.f1);
  summarize([](const Metrics& m) { return m.auc; }, rep.mean.auc, rep.sd.auc);
  rep.min_accuracy = 1.0;
  rep.max_accuracy = 0.0;
  std::vector<int> all_y, all_pred;
  std::vector<double> all_scores;
  for (const auto& f : rep.folds) {
    rep.pooled.tp += f.confusion.tp;
    rep.pooled.fp += f.confusion.fp;
    rep.pooled.tn += f.confusion.tn;
    rep.pooled.fn += f.confusion.fn;
    rep.min_accuracy = std::min(rep.min_accuracy, f.metrics.accuracy);
    rep.max_accuracy = std::max(rep.max_accuracy, f.metrics.accuracy);
    if (const auto* s = std::get_if<Svm>(&f.model.impl); s && !s->converged) rep.all_converged = false;
    for (std::size_t k = 0; k < f.test.size(); ++k) {
      all_y.push_back(y[f.test[k]]);
      all_scores.push_back(f.scores[k]);
    }
  }
  rep.pooled_metrics = metrics_from(rep.pooled);
  rep.pooled_metrics.auc = auc(all_y, all_scores);
  return rep;
}

EvalReport evaluate(const ModelSpec& spec, const Dataset& data, Regime regime, std::uint64_t seed,
                    std::size_t threads) {
  const auto y = data.labels();
  const auto g = data.groups();
  return evaluate(spec, data.matrix(), y, g, regime, seed, threads);
}

}  // namespace vocstress

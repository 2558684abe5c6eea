#include "vocstress/stats.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "vocstress/error.hpp"

namespace vocstress::stats {

namespace {

constexpr double kEps = 1e-15;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 10'000;

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double lower_gamma_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double upper_gamma_continued_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::DegenerateInput, what);
}

double clamp_p(double p) { return std::clamp(p, 0.0, 1.0); }

std::uint64_t derive_stream(std::uint64_t base, std::uint64_t i) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (i + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Fourier phase randomization with the forward transform done once.
class SurrogateGenerator {
 public:
  explicit SurrogateGenerator(std::span<const double> y) : y_(y.begin(), y.end()), n_(y.size()) {
    if (n_ < 3) return;
    double fill = 0.0;
    std::size_t observed = 0;
    for (double v : y) {
      if (!std::isnan(v)) {
        fill += v;
        ++observed;
      }
    }
    fill = observed ? fill / static_cast<double>(observed) : 0.0;
    twiddle_.resize(n_);
    for (std::size_t m = 0; m < n_; ++m) {
      twiddle_[m] = std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n_));
    }
    for (const auto& t : twiddle_) {
      cos_.push_back(t.real());
      sin_.push_back(t.imag());
    }
    spec_.resize(n_ / 2 + 1);
    for (std::size_t k = 0; k < spec_.size(); ++k) {
      std::complex<double> acc(0.0, 0.0);
      for (std::size_t j = 0; j < n_; ++j) acc += (std::isnan(y[j]) ? fill : y[j]) * std::conj(twiddle_[(k * j) % n_]);
      spec_[k] = acc;
    }
  }

  std::vector<double> operator()(std::uint64_t seed) const {
    if (n_ < 3) return y_;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    const bool even = n_ % 2 == 0;
    std::vector<std::complex<double>> z(spec_.size());
    z[0] = spec_[0];
    for (std::size_t k = 1; k < z.size(); ++k) {
      const bool nyquist = even && k == n_ / 2;
      z[k] = nyquist ? spec_[k] : 2.0 * spec_[k] * std::polar(1.0, angle(rng));
    }
    std::vector<double> out(n_);
    for (std::size_t j = 0; j < n_; ++j) {
      if (std::isnan(y_[j])) {
        out[j] = y_[j];
        continue;
      }
      double v = 0.0;
      std::size_t m = 0;
      for (std::size_t k = 0; k < z.size(); ++k) {
        v += z[k].real() * cos_[m] - z[k].imag() * sin_[m];
        m += j;
        if (m >= n_) m -= n_;
      }
      out[j] = v / static_cast<double>(n_);
    }
    return out;
  }

 private:
  std::vector<double> y_;
  std::size_t n_;
  std::vector<std::complex<double>> twiddle_;
  std::vector<double> cos_, sin_;
  std::vector<std::complex<double>> spec_;
};

std::vector<double> rotated(std::span<const double> y, std::size_t shift) {
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[(i + shift) % y.size()];
  return out;
}

double max_abs_r(std::span<const double> x, std::span<const double> y, std::size_t max_lag) {
  double best = 0.0;
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    const double r = lagged_pearson(x, y, lag).r;
    if (!std::isnan(r)) best = std::max(best, std::fabs(r));
  }
  return best;
}

template <typename Statistic>
double circular_shift_p(std::span<const double> y, double observed, const PermutationOptions& o,
                        Statistic&& statistic) {
  const std::size_t n = y.size();
  if (n < 2 * o.min_shift + 1) {
    throw Error(ErrorCode::InsufficientOverlap, "series too short for the minimum circular shift");
  }
  std::mt19937_64 rng(o.seed);
  std::uniform_int_distribution<std::size_t> offset(o.min_shift, n - o.min_shift);
  std::size_t at_least = 0;
  for (std::size_t i = 0; i < o.n_perm; ++i) {
    const auto shifted = rotated(y, offset(rng));
    if (statistic(std::span<const double>(shifted)) >= observed - 1e-12) ++at_least;
  }
  return static_cast<double>(at_least + 1) / static_cast<double>(o.n_perm + 1);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double upper_incomplete_gamma(double a, double x) {
  if (x <= 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - lower_gamma_series(a, x);
  return upper_gamma_continued_fraction(a, x);
}

double t_two_sided_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  return clamp_p(incomplete_beta(df / 2.0, 0.5, df / (df + t * t)));
}

double chi_square_sf(double x, double df) { return clamp_p(upper_incomplete_gamma(df / 2.0, x / 2.0)); }

double f_sf(double f, double df1, double df2) {
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return clamp_p(incomplete_beta(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f)));
}

double mean(std::span<const double> x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double sample_sd(std::span<const double> x) { return std::sqrt(sample_variance(x)); }

double median(std::vector<double> x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 == 1 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

std::vector<double> midranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::string_view method_name(Method m) noexcept {
  switch (m) {
    case Method::PairedT: return "paired t";
    case Method::IndependentT: return "independent t";
    case Method::KruskalWallis: return "Kruskal-Wallis";
    case Method::RmAnova: return "RM-ANOVA";
    case Method::LaggedCorrelation: return "lagged Pearson";
    case Method::LagScan: return "lag scan";
  }
  return "?";
}

TestResult paired_t(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorCode::DegenerateInput, "paired t needs two equal-length samples with n >= 2");
  }
  std::vector<double> diff(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) diff[i] = x[i] - y[i];
  const double m = mean(diff);
  const double sd = sample_sd(diff);
  require(sd > 0 && std::isfinite(sd), "paired differences have zero variance");
  const double n = static_cast<double>(diff.size());
  TestResult r;
  r.method = Method::PairedT;
  r.statistic = m / (sd / std::sqrt(n));
  r.df1 = n - 1.0;
  r.p = t_two_sided_p(r.statistic, r.df1);
  r.effect_size = m / sd;
  return r;
}

TestResult independent_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error(ErrorCode::DegenerateInput, "independent t needs n >= 2 per group");
  }
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double pooled_var =
      ((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0);
  require(pooled_var > 0, "pooled variance is zero");
  const double sp = std::sqrt(pooled_var);
  const double diff = mean(a) - mean(b);
  TestResult r;
  r.method = Method::IndependentT;
  r.statistic = diff / (sp * std::sqrt(1.0 / na + 1.0 / nb));
  r.df1 = na + nb - 2.0;
  r.p = t_two_sided_p(r.statistic, r.df1);
  r.effect_size = diff / sp;
  return r;
}

TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw Error(ErrorCode::DegenerateInput, "Kruskal-Wallis needs >= 2 groups");
  std::vector<double> all;
  for (const auto& g : groups) {
    if (g.empty()) throw Error(ErrorCode::DegenerateInput, "empty group");
    all.insert(all.end(), g.begin(), g.end());
  }
  const auto ranks = midranks(all);
  const double n = static_cast<double>(all.size());
  double tie_sum = 0.0;
  {
    std::vector<double> sorted = all;
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < sorted.size()) {
      std::size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_sum += t * t * t - t;
      i = j + 1;
    }
  }
  const double correction = 1.0 - tie_sum / (n * n * n - n);
  require(correction > 0, "all values identical");
  double h = 0.0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) rank_sum += ranks[offset + i];
    h += rank_sum * rank_sum / static_cast<double>(g.size());
    offset += g.size();
  }
  h = (12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0)) / correction;
  TestResult r;
  r.method = Method::KruskalWallis;
  r.statistic = std::max(h, 0.0);
  r.df1 = static_cast<double>(groups.size() - 1);
  r.p = chi_square_sf(r.statistic, r.df1);
  return r;
}

TestResult rm_anova(const std::vector<std::vector<double>>& data) {
  const std::size_t n = data.size();
  if (n < 2) throw Error(ErrorCode::DegenerateInput, "RM-ANOVA needs >= 2 subjects");
  const std::size_t k = data.front().size();
  if (k < 2) throw Error(ErrorCode::DegenerateInput, "RM-ANOVA needs >= 2 conditions");
  double grand = 0.0, scale = 0.0;
  for (const auto& row : data) {
    if (row.size() != k) throw Error(ErrorCode::DegenerateInput, "ragged subjects x conditions matrix");
    for (double v : row) {
      if (!std::isfinite(v)) throw Error(ErrorCode::DegenerateInput, "incomplete matrix");
      grand += v;
      scale += v * v;
    }
  }
  const double nd = static_cast<double>(n), kd = static_cast<double>(k);
  grand /= nd * kd;
  std::vector<double> subject_mean(n, 0.0), condition_mean(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      subject_mean[i] += data[i][j] / kd;
      condition_mean[j] += data[i][j] / nd;
    }
  }
  double ss_condition = 0.0, ss_error = 0.0;
  for (std::size_t j = 0; j < k; ++j) ss_condition += nd * (condition_mean[j] - grand) * (condition_mean[j] - grand);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double e = data[i][j] - subject_mean[i] - condition_mean[j] + grand;
      ss_error += e * e;
    }
  }
  const double df1 = kd - 1.0, df2 = (kd - 1.0) * (nd - 1.0);
  const double negligible = 1e-24 * std::max(scale, 1.0);
  TestResult r;
  r.method = Method::RmAnova;
  r.df1 = df1;
  r.df2 = df2;
  if (ss_condition <= negligible) {
    r.statistic = 0.0;
    r.p = 1.0;
    return r;
  }
  require(ss_error > negligible, "zero error variance");
  r.statistic = (ss_condition / df1) / (ss_error / df2);
  r.p = f_sf(r.statistic, df1, df2);
  return r;
}

std::vector<double> bonferroni(std::span<const double> pvals, std::size_t m) {
  if (m < pvals.size()) throw Error(ErrorCode::InvalidSpec, "Bonferroni family smaller than p-value list");
  std::vector<double> out(pvals.size());
  for (std::size_t i = 0; i < pvals.size(); ++i) out[i] = std::min(1.0, pvals[i] * static_cast<double>(m));
  return out;
}

double coef_variation(std::span<const double> values) {
  const double m = mean(values);
  if (!(std::fabs(m) > 0)) throw Error(ErrorCode::ZeroMean, "coefficient of variation of zero-mean data");
  const double sd = values.size() < 2 ? 0.0 : sample_sd(values);
  return 100.0 * sd / std::fabs(m);
}

LaggedPearson lagged_pearson(std::span<const double> x, std::span<const double> y, std::size_t lag) {
  LaggedPearson out;
  out.r = std::numeric_limits<double>::quiet_NaN();
  const std::size_t n = std::min(x.size(), y.size() > lag ? y.size() - lag : 0);
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = x[i], b = y[i + lag];
    if (std::isnan(a) || std::isnan(b)) continue;
    sx += a;
    sy += b;
    ++count;
  }
  out.pairs = count;
  if (count < 3) return out;
  const double mx = sx / static_cast<double>(count), my = sy / static_cast<double>(count);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = x[i], b = y[i + lag];
    if (std::isnan(a) || std::isnan(b)) continue;
    sxx += (a - mx) * (a - mx);
    syy += (b - my) * (b - my);
    sxy += (a - mx) * (b - my);
  }
  if (sxx <= 0 || syy <= 0) return out;
  out.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  return out;
}

TestResult lagged_corr_p(std::span<const double> x, std::span<const double> y, std::size_t lag,
                         const PermutationOptions& options) {
  const LaggedPearson obs = lagged_pearson(x, y, lag);
  if (obs.pairs < 10) throw Error(ErrorCode::InsufficientOverlap, "fewer than 10 overlapping pairs");
  TestResult r;
  r.method = Method::LaggedCorrelation;
  r.statistic = obs.r;
  r.df1 = static_cast<double>(obs.pairs) - 2.0;
  if (std::isnan(obs.r)) {
    r.p = 1.0;
    return r;
  }
  const double observed = std::fabs(obs.r);
  r.p = circular_shift_p(y, observed, options, [&](std::span<const double> shifted) {
    const double rr = lagged_pearson(x, shifted, lag).r;
    return std::isnan(rr) ? 0.0 : std::fabs(rr);
  });
  return r;
}

std::vector<double> phase_surrogate(std::span<const double> y, std::uint64_t seed) {
  return SurrogateGenerator(y)(seed);
}

LagScanStatistic lag_scan_statistic(std::span<const double> x, std::span<const double> y,
                                    std::size_t max_lag, const PermutationOptions& options) {
  LagScanStatistic out;
  out.r_by_lag.resize(max_lag + 1);
  double best = -1.0;
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    const double r = lagged_pearson(x, y, lag).r;
    out.r_by_lag[lag] = r;
    if (!std::isnan(r) && std::fabs(r) > best) {
      best = std::fabs(r);
      out.best_lag = lag;
      out.r = r;
    }
  }
  if (best < 0) {
    out.r = std::numeric_limits<double>::quiet_NaN();
    out.p = 1.0;
    return out;
  }
  const SurrogateGenerator surrogates(y);
  std::size_t at_least = 0;
  for (std::size_t i = 0; i < options.n_perm; ++i) {
    const auto surrogate = surrogates(derive_stream(options.seed, i));
    if (max_abs_r(x, surrogate, max_lag) >= best - 1e-12) ++at_least;
  }
  out.p = static_cast<double>(at_least + 1) / static_cast<double>(options.n_perm + 1);
  return out;
}

}  // namespace vocstress::stats

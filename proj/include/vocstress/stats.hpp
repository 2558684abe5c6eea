#pragma once

// Statistical primitives: descriptive statistics, parametric tests with their
// reference distributions, and circular-shift permutation tests for lagged
// correlations.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace vocstress::stats {

// --- distributions ---------------------------------------------------------

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
// Regularized upper incomplete gamma Q(a, x).
double upper_incomplete_gamma(double a, double x);

// Two-sided P(|T| >= |t|) for Student's t with df degrees of freedom.
double t_two_sided_p(double t, double df);
double chi_square_sf(double x, double df);
double f_sf(double f, double df1, double df2);

// --- descriptive -----------------------------------------------------------

double mean(std::span<const double> x);
double sample_variance(std::span<const double> x);
double sample_sd(std::span<const double> x);
double median(std::vector<double> x);
// Mid-ranks (1-based) with ties averaged.
std::vector<double> midranks(std::span<const double> x);

// Pearson r of paired samples; nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// --- tests -----------------------------------------------------------------

enum class Method { PairedT, IndependentT, KruskalWallis, RmAnova, LaggedCorrelation, LagScan };
std::string_view method_name(Method m) noexcept;

struct TestResult {
  Method method = Method::PairedT;
  double statistic = 0.0;
  double df1 = 0.0;
  std::optional<double> df2;
  double p = 1.0;
  std::optional<double> effect_size;
};

// Paired t on x - y; effect size d = mean(diff) / sd(diff).
TestResult paired_t(std::span<const double> x, std::span<const double> y);
// Pooled-variance t; effect size d = (mean a - mean b) / pooled sd.
TestResult independent_t(std::span<const double> a, std::span<const double> b);
// H with mid-rank tie correction; chi-square reference with k-1 df.
TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups);
// One-way within-subjects ANOVA; rows are subjects, columns conditions.
TestResult rm_anova(const std::vector<std::vector<double>>& data);

std::vector<double> bonferroni(std::span<const double> pvals, std::size_t m);

// Percent coefficient of variation (sample sd / |mean|). Throws ZeroMean.
double coef_variation(std::span<const double> values);

// --- lagged correlation ----------------------------------------------------

struct LaggedPearson {
  double r = 0.0;
  std::size_t pairs = 0;
};

// Pearson r over pairs (x[i], y[i + lag]) with both present. r is NaN when
// fewer than 3 pairs or a side is constant.
LaggedPearson lagged_pearson(std::span<const double> x, std::span<const double> y, std::size_t lag);

struct PermutationOptions {
  std::size_t n_perm = 1000;
  std::uint64_t seed = 0;
  // Minimum circular offset (in samples) of a permuted y, both directions.
  // Unused by the lag scan.
  std::size_t min_shift = 24;
};

// Pearson r at one lag; two-sided p from circular shifts of y.
// Throws InsufficientOverlap when fewer than 10 pairs overlap.
TestResult lagged_corr_p(std::span<const double> x, std::span<const double> y, std::size_t lag,
                         const PermutationOptions& options);

struct LagScanStatistic {
  std::size_t best_lag = 0;
  double r = 0.0;
  double p = 1.0;
  std::vector<double> r_by_lag;
};

// Fourier surrogate of y: same amplitude spectrum, uniformly random phases.
// Missing samples are mean-filled for the transform and stay missing.
std::vector<double> phase_surrogate(std::span<const double> y, std::uint64_t seed);

// Scans lags 0..max_lag (x leads y), picks the lag maximizing |r| (ties to
// the smaller lag) and tests max|r| against the same scan over n_perm
// phase-randomized surrogates of y.
LagScanStatistic lag_scan_statistic(std::span<const double> x, std::span<const double> y,
                                    std::size_t max_lag, const PermutationOptions& options);

}  // namespace vocstress::stats

#pragma once

// Baseline normalization (both sign conventions), the reciprocal GSR
// transform and column-mean imputation.

#include <cstddef>
#include <span>
#include <vector>

#include "vocstress/core_model.hpp"
#include "vocstress/ingest.hpp"

namespace vocstress {

// Positive when x is below the baseline mean: (b - x) / b.
double norm_decrease(double baseline_mean, double x);
// Positive when x is above the baseline mean: (x - b) / b.
double norm_increase(double baseline_mean, double x);

inline constexpr double kDefaultConductanceScale = 1e6;

// Skin conductance equivalent k / r. Throws NonPositiveResistance for r <= 0.
double gsr_conductance(double resistance, double k = kDefaultConductanceScale);

// Conductance series of a raw GSR series; non-positive readings become missing.
UniformSeries conductance_series(const UniformSeries& raw, double k = kDefaultConductanceScale);

// Dense row-major matrix of reals; missing cells hold kMissing.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  Matrix select_rows(std::span<const std::size_t> idx) const;
  Matrix select_cols(std::span<const std::size_t> idx) const;
  bool operator==(const Matrix& o) const;
};

// Mean of the observed cells of each column. Throws AllMissingColumn.
std::vector<double> observed_column_means(const Matrix& m);
// Replaces missing cells by the given per-column fill values.
Matrix fill_missing(const Matrix& m, std::span<const double> fill);
// fill_missing(m, observed_column_means(m)).
Matrix impute_column_mean(const Matrix& m);

// Per-channel means over the marker-delimited baseline phase.
struct BaselineStats {
  double hr = kMissing;
  double gsr = kMissing;     // conductance
  double tvoc = kMissing;
  double gas320 = kMissing;
  std::size_t hr_count = 0;
  std::size_t gsr_count = 0;
  std::size_t tvoc_count = 0;
  std::size_t gas320_count = 0;
};

// Grid samples with t in [start_ms, end_ms).
std::vector<double> samples_between(const UniformSeries& s, std::int64_t start_ms,
                                    std::int64_t end_ms);

BaselineStats baseline_stats(const AlignedStreams& streams, const PhaseTimeline& timeline);

}  // namespace vocstress

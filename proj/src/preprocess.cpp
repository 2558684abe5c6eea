#include "vocstress/preprocess.hpp"

#include <bit>
#include <numeric>

#include "vocstress/error.hpp"

namespace vocstress {

namespace {

void require_baseline(double b) {
  if (b == 0.0) throw Error(ErrorCode::ZeroBaseline, "baseline mean is zero");
}

double mean_or_missing(const std::vector<double>& v) {
  if (v.empty()) return kMissing;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double norm_decrease(double baseline_mean, double x) {
  require_baseline(baseline_mean);
  return (baseline_mean - x) / baseline_mean;
}

double norm_increase(double baseline_mean, double x) {
  require_baseline(baseline_mean);
  return (x - baseline_mean) / baseline_mean;
}

double gsr_conductance(double resistance, double k) {
  if (!(resistance > 0)) throw Error(ErrorCode::NonPositiveResistance, "GSR resistance must be > 0");
  return k / resistance;
}

UniformSeries conductance_series(const UniformSeries& raw, double k) {
  UniformSeries out = raw;
  for (double& v : out.values) v = (!is_missing(v) && v > 0) ? k / v : kMissing;
  return out;
}

Matrix Matrix::select_rows(std::span<const std::size_t> idx) const {
  Matrix out(idx.size(), cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto src = row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Matrix Matrix::select_cols(std::span<const std::size_t> idx) const {
  Matrix out(rows, idx.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < idx.size(); ++j) out(r, j) = (*this)(r, idx[j]);
  }
  return out;
}

bool Matrix::operator==(const Matrix& o) const {
  if (rows != o.rows || cols != o.cols) return false;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double a = data[i], b = o.data[i];
    if (is_missing(a) != is_missing(b)) return false;
    if (!is_missing(a) && std::bit_cast<std::uint64_t>(a) != std::bit_cast<std::uint64_t>(b)) return false;
  }
  return true;
}

std::vector<double> observed_column_means(const Matrix& m) {
  std::vector<double> sums(m.cols, 0.0);
  std::vector<std::size_t> counts(m.cols, 0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      const double v = m(r, c);
      if (!is_missing(v)) {
        sums[c] += v;
        ++counts[c];
      }
    }
  }
  for (std::size_t c = 0; c < m.cols; ++c) {
    if (counts[c] == 0) {
      throw Error(ErrorCode::AllMissingColumn, "column " + std::to_string(c) + " has no observed value");
    }
    sums[c] /= static_cast<double>(counts[c]);
  }
  return sums;
}

Matrix fill_missing(const Matrix& m, std::span<const double> fill) {
  if (fill.size() != m.cols) throw Error(ErrorCode::DimensionMismatch, "fill vector width");
  Matrix out = m;
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) {
      if (is_missing(out(r, c))) out(r, c) = fill[c];
    }
  }
  return out;
}

Matrix impute_column_mean(const Matrix& m) {
  const auto means = observed_column_means(m);
  return fill_missing(m, means);
}

std::vector<double> samples_between(const UniformSeries& s, std::int64_t start_ms, std::int64_t end_ms) {
  std::vector<double> out;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const std::int64_t t = s.time_at(i);
    if (t >= start_ms && t < end_ms && !is_missing(s.values[i])) out.push_back(s.values[i]);
  }
  return out;
}

BaselineStats baseline_stats(const AlignedStreams& streams, const PhaseTimeline& timeline) {
  BaselineStats b;
  const auto start = timeline.start(Phase::Baseline);
  const auto end = timeline.end(Phase::Baseline);
  if (!start || !end) return b;
  auto fill = [&](const UniformSeries& s, double& mean, std::size_t& count) {
    const auto v = samples_between(s, *start, *end);
    mean = mean_or_missing(v);
    count = v.size();
  };
  fill(streams.hr, b.hr, b.hr_count);
  fill(conductance_series(streams.gsr), b.gsr, b.gsr_count);
  fill(streams.tvoc, b.tvoc, b.tvoc_count);
  fill(streams.gas320, b.gas320, b.gas320_count);
  return b;
}

}  // namespace vocstress

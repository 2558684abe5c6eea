#include "vocstress/features.hpp"

#include <algorithm>
#include <cmath>

#include "vocstress/error.hpp"
#include "vocstress/parallel.hpp"
#include "vocstress/text_codec.hpp"

namespace vocstress {

namespace {

constexpr std::array<std::string_view, kFeatureCount> kNames = {
    "hr_mean",   "hr_std",    "hr_min",    "hr_max",     "hr_range",       "gsr_mean",
    "gsr_std",   "gsr_min",   "gsr_max",   "gsr_range",  "tvoc_mean",      "tvoc_std",
    "tvoc_min",  "tvoc_max",  "tvoc_range", "tvoc_slope", "tvoc_norm_mean", "gas320_mean",
    "gas320_std", "gas320_min", "gas320_max", "gas320_range",
};

std::vector<TimedValue> window_samples(const UniformSeries& s, std::int64_t start, std::int64_t end) {
  std::vector<TimedValue> out;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const std::int64_t t = s.time_at(i);
    if (t >= start && t < end && !is_missing(s.values[i])) out.push_back({t, s.values[i]});
  }
  return out;
}

// mean, std, min, max, range into out[0..4].
void basic_stats(const std::vector<TimedValue>& v, double* out) {
  if (v.empty()) {
    std::fill(out, out + 5, kMissing);
    return;
  }
  double sum = 0, lo = v.front().value, hi = v.front().value;
  for (const auto& s : v) {
    sum += s.value;
    lo = std::min(lo, s.value);
    hi = std::max(hi, s.value);
  }
  const double n = static_cast<double>(v.size());
  const double mean = sum / n;
  double ss = 0;
  for (const auto& s : v) ss += (s.value - mean) * (s.value - mean);
  out[0] = mean;
  out[1] = v.size() >= 2 ? std::sqrt(ss / (n - 1.0)) : kMissing;
  out[2] = lo;
  out[3] = hi;
  out[4] = hi - lo;
}

// OLS slope of value on time (per second).
double ols_slope(const std::vector<TimedValue>& v) {
  if (v.size() < 2) return kMissing;
  const double n = static_cast<double>(v.size());
  double mt = 0, mv = 0;
  for (const auto& s : v) {
    mt += static_cast<double>(s.t_ms) / 1000.0;
    mv += s.value;
  }
  mt /= n;
  mv /= n;
  double sxy = 0, sxx = 0;
  for (const auto& s : v) {
    const double dt = static_cast<double>(s.t_ms) / 1000.0 - mt;
    sxy += dt * (s.value - mv);
    sxx += dt * dt;
  }
  return sxx > 0 ? sxy / sxx : kMissing;
}

std::string_view label_token(Label l) { return l == Label::Stress ? "Stress" : "NonStress"; }

}  // namespace

const std::array<std::string_view, kFeatureCount>& feature_names() { return kNames; }

std::string_view block_name(FeatureBlock b) noexcept {
  switch (b) {
    case FeatureBlock::Hr: return "HR";
    case FeatureBlock::Gsr: return "GSR";
    case FeatureBlock::Tvoc: return "TVOC";
    case FeatureBlock::Gas320: return "Gas320";
  }
  return "?";
}

FeatureBlock block_of(std::size_t feature) noexcept {
  if (feature < 5) return FeatureBlock::Hr;
  if (feature < 10) return FeatureBlock::Gsr;
  if (feature < 17) return FeatureBlock::Tvoc;
  return FeatureBlock::Gas320;
}

std::vector<std::size_t> block_features(FeatureBlock b) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (block_of(i) == b) out.push_back(i);
  }
  return out;
}

bool FeatureWindow::operator==(const FeatureWindow& o) const {
  if (participant != o.participant || start_s != o.start_s || end_s != o.end_s || phase != o.phase ||
      label != o.label) {
    return false;
  }
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    const double a = features[i], b = o.features[i];
    if (!(a == b || (is_missing(a) && is_missing(b)))) return false;
  }
  return true;
}

std::vector<RawWindow> segment(const AlignedStreams& streams, const PhaseTimeline& timeline) {
  const UniformSeries gsr = conductance_series(streams.gsr);
  std::vector<RawWindow> out;
  for (Phase p : kAllPhases) {
    if (p == Phase::Warmup) continue;
    const auto start = timeline.start(p);
    const auto end = timeline.end(p);
    if (!start || !end) continue;
    for (std::int64_t w = *start; w + kWindowMs <= *end; w += kWindowMs) {
      RawWindow r;
      r.start_ms = w;
      r.end_ms = w + kWindowMs;
      r.phase = p;
      r.hr = window_samples(streams.hr, w, r.end_ms);
      r.gsr = window_samples(gsr, w, r.end_ms);
      r.tvoc = window_samples(streams.tvoc, w, r.end_ms);
      r.gas320 = window_samples(streams.gas320, w, r.end_ms);
      out.push_back(std::move(r));
    }
  }
  return out;
}

FeatureWindow extract(const RawWindow& w, const BaselineStats& baseline) {
  if (w.hr.empty() && w.gsr.empty() && w.tvoc.empty() && w.gas320.empty()) {
    throw Error(ErrorCode::EmptyWindow, "window has no samples in any channel");
  }
  FeatureWindow f;
  f.start_s = static_cast<double>(w.start_ms) / 1000.0;
  f.end_s = static_cast<double>(w.end_ms) / 1000.0;
  f.phase = w.phase;
  f.label = label_for_phase(w.phase);
  double* x = f.features.data();
  basic_stats(w.hr, x);
  basic_stats(w.gsr, x + 5);
  basic_stats(w.tvoc, x + 10);
  x[15] = ols_slope(w.tvoc);
  x[16] = kMissing;
  if (!w.tvoc.empty() && !is_missing(baseline.tvoc) && baseline.tvoc != 0) {
    x[16] = norm_increase(baseline.tvoc, x[10]);
  }
  basic_stats(w.gas320, x + 17);
  return f;
}

std::size_t Dataset::count(Label l) const {
  return static_cast<std::size_t>(
      std::count_if(windows.begin(), windows.end(), [l](const FeatureWindow& w) { return w.label == l; }));
}

Matrix Dataset::matrix() const {
  Matrix m(windows.size(), kFeatureCount);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    std::copy(windows[i].features.begin(), windows[i].features.end(), m.row(i).begin());
  }
  return m;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> y;
  y.reserve(windows.size());
  for (const auto& w : windows) y.push_back(w.label == Label::Stress ? 1 : 0);
  return y;
}

std::vector<std::string> Dataset::groups() const {
  std::vector<std::string> g;
  g.reserve(windows.size());
  for (const auto& w : windows) g.push_back(w.participant);
  return g;
}

std::vector<FeatureWindow> session_windows(const SessionRecord& session) {
  const AlignedStreams streams = align(session.frames, session.markers, false);
  const PhaseTimeline timeline = phase_timeline(session.markers, session.frames);
  const BaselineStats baseline = baseline_stats(streams, timeline);
  std::vector<FeatureWindow> out;
  for (const auto& raw : segment(streams, timeline)) {
    FeatureWindow f;
    try {
      f = extract(raw, baseline);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyWindow) throw;
      f.start_s = static_cast<double>(raw.start_ms) / 1000.0;
      f.end_s = static_cast<double>(raw.end_ms) / 1000.0;
      f.phase = raw.phase;
      f.label = label_for_phase(raw.phase);
      f.features.fill(kMissing);
    }
    f.participant = session.meta.id;
    out.push_back(std::move(f));
  }
  return out;
}

Dataset build_dataset(const std::vector<SessionRecord>& sessions, std::size_t threads) {
  std::vector<std::vector<FeatureWindow>> per(sessions.size());
  parallel_for(sessions.size(), threads, [&](std::size_t i) { per[i] = session_windows(sessions[i]); });
  Dataset d;
  for (auto& v : per) {
    for (auto& w : v) d.windows.push_back(std::move(w));
  }
  std::stable_sort(d.windows.begin(), d.windows.end(), [](const FeatureWindow& a, const FeatureWindow& b) {
    if (a.participant != b.participant) return a.participant < b.participant;
    return a.start_s < b.start_s;
  });
  return d;
}

std::string write_dataset_csv(const Dataset& d) {
  std::string out = "participant,start_s,phase,label";
  for (auto n : kNames) {
    out += ',';
    out += n;
  }
  out += '\n';
  for (const auto& w : d.windows) {
    out += w.participant;
    out += ',';
    append_real(out, w.start_s);
    out += ',';
    out += std::to_string(phase_number(w.phase));
    out += ',';
    out += label_token(w.label);
    for (double v : w.features) {
      out += ',';
      append_real(out, v);
    }
    out += '\n';
  }
  return out;
}

Dataset read_dataset_csv(std::string_view text) {
  Dataset d;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    const std::size_t base = pos;
    pos = nl + 1;
    if (line.empty()) continue;
    const auto fields = split_fields(line, ',');
    if (fields.size() != 4 + kFeatureCount) {
      throw ParseError(base, "expected " + std::to_string(4 + kFeatureCount) + " fields, got " +
                                 std::to_string(fields.size()));
    }
    if (header) {
      header = false;
      if (fields[0].text != "participant") throw ParseError(base, "missing dataset header");
      for (std::size_t i = 0; i < kFeatureCount; ++i) {
        if (fields[4 + i].text != kNames[i]) {
          throw ParseError(base + fields[4 + i].offset, "unexpected feature column '" +
                                                            std::string(fields[4 + i].text) + "'");
        }
      }
      continue;
    }
    FeatureWindow w;
    if (fields[0].text.empty()) throw ParseError(base, "empty participant id");
    w.participant = std::string(fields[0].text);
    const auto start = parse_real(fields[1].text);
    if (!start || is_missing(*start)) throw ParseError(base + fields[1].offset, "bad start_s");
    w.start_s = *start;
    w.end_s = *start + static_cast<double>(kWindowMs) / 1000.0;
    const auto phase_n = parse_int(fields[2].text);
    const auto phase = phase_n ? phase_from_number(static_cast<int>(*phase_n)) : std::nullopt;
    if (!phase || *phase == Phase::Warmup) throw ParseError(base + fields[2].offset, "bad phase");
    w.phase = *phase;
    if (fields[3].text == "Stress") {
      w.label = Label::Stress;
    } else if (fields[3].text == "NonStress") {
      w.label = Label::NonStress;
    } else {
      throw ParseError(base + fields[3].offset, "bad label");
    }
    if (w.label != label_for_phase(w.phase)) throw ParseError(base + fields[3].offset, "label disagrees with phase");
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      const auto v = parse_real(fields[4 + i].text);
      if (!v) throw ParseError(base + fields[4 + i].offset, "bad value for " + std::string(kNames[i]));
      w.features[i] = *v;
    }
    d.windows.push_back(std::move(w));
  }
  if (header) throw ParseError(0, "empty dataset");
  return d;
}

}  // namespace vocstress

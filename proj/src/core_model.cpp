#include "vocstress/core_model.hpp"

#include <algorithm>
#include <bit>
#include <charconv>

namespace vocstress {

namespace {

bool same_value(double a, double b) noexcept {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

SummaryStat summarize(const std::vector<double>& values) {
  SummaryStat s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace

std::optional<Phase> phase_from_number(int n) noexcept {
  if (n < 1 || n > 7) return std::nullopt;
  return static_cast<Phase>(n);
}

std::string_view phase_name(Phase p) noexcept {
  switch (p) {
    case Phase::Warmup: return "Warmup";
    case Phase::Baseline: return "Baseline";
    case Phase::Stroop: return "Stroop";
    case Phase::Arithmetic: return "Arithmetic";
    case Phase::Recovery1: return "Recovery1";
    case Phase::Recovery2: return "Recovery2";
    case Phase::Recovery3: return "Recovery3";
  }
  return "?";
}

std::optional<double> nominal_duration_s(Phase p) noexcept {
  switch (p) {
    case Phase::Warmup: return std::nullopt;
    case Phase::Baseline: return 180.0;
    case Phase::Stroop: return 200.0;
    case Phase::Arithmetic: return 240.0;
    case Phase::Recovery1:
    case Phase::Recovery2:
    case Phase::Recovery3: return 120.0;
  }
  return std::nullopt;
}

Label label_for_phase(Phase p) noexcept {
  switch (p) {
    case Phase::Stroop:
    case Phase::Arithmetic: return Label::Stress;
    case Phase::Baseline:
    case Phase::Recovery1:
    case Phase::Recovery2:
    case Phase::Recovery3: return Label::NonStress;
    case Phase::Warmup: return Label::Unlabeled;
  }
  return Label::Unlabeled;
}

std::string_view label_name(Label l) noexcept {
  switch (l) {
    case Label::Stress: return "Stress";
    case Label::NonStress: return "NonStress";
    case Label::Unlabeled: return "Unlabeled";
  }
  return "?";
}

std::string_view reactivity_name(Reactivity r) noexcept { return r == Reactivity::High ? "High" : "Low"; }
std::string_view emitter_name(EmitterClass e) noexcept { return e == EmitterClass::High ? "High" : "Low"; }

std::string_view modality_name(Modality m) noexcept {
  switch (m) {
    case Modality::HeartRate: return "hr";
    case Modality::Gsr: return "gsr";
    case Modality::Ens160: return "ens160";
    case Modality::Bme688: return "bme688";
  }
  return "?";
}

bool SensorFrame::operator==(const SensorFrame& o) const {
  if (timestamp_ms != o.timestamp_ms || phase != o.phase) return false;
  if (rr_intervals.size() != o.rr_intervals.size()) return false;
  for (std::size_t i = 0; i < rr_intervals.size(); ++i) {
    if (!same_value(rr_intervals[i], o.rr_intervals[i])) return false;
  }
  for (const auto& info : frame_columns()) {
    const double* a = scalar_slot(*this, info.column);
    const double* b = scalar_slot(o, info.column);
    if (a != nullptr && !same_value(*a, *b)) return false;
  }
  return true;
}

bool SummaryStat::operator==(const SummaryStat& o) const {
  return same_value(mean, o.mean) && same_value(sd, o.sd);
}

const std::array<FrameColumnInfo, kFrameColumnCount>& frame_columns() noexcept {
  using M = Modality;
  static const std::array<FrameColumnInfo, kFrameColumnCount> kColumns = {{
      {FrameColumn::Timestamp, "timestamp_ms", false, std::nullopt},
      {FrameColumn::Hr, "hr", false, M::HeartRate},
      {FrameColumn::RrIntervals, "rr_intervals", false, M::HeartRate},
      {FrameColumn::GsrRaw, "gsr_raw", false, M::Gsr},
      {FrameColumn::Gas250, "gas250", true, M::Bme688},
      {FrameColumn::Gas320, "gas320", true, M::Bme688},
      {FrameColumn::Gas400, "gas400", true, M::Bme688},
      {FrameColumn::Aqi, "aqi", false, M::Ens160},
      {FrameColumn::Tvoc, "tvoc", false, M::Ens160},
      {FrameColumn::Eco2, "eco2", false, M::Ens160},
      {FrameColumn::TempBme, "temp_bme", true, M::Bme688},
      {FrameColumn::TempEns, "temp_ens", true, M::Ens160},
      {FrameColumn::HumidityBme, "humidity_bme", false, M::Bme688},
      {FrameColumn::HumidityEns, "humidity_ens", false, M::Ens160},
      {FrameColumn::Pressure, "pressure", true, M::Bme688},
      {FrameColumn::Gas320Norm, "gas320_norm", true, M::Bme688},
      {FrameColumn::TvocNorm, "tvoc_norm", true, M::Ens160},
      {FrameColumn::GsrNorm, "gsr_norm", true, M::Gsr},
      {FrameColumn::PhaseId, "phase_id", false, std::nullopt},
  }};
  return kColumns;
}

const double* scalar_slot(const SensorFrame& f, FrameColumn c) noexcept {
  switch (c) {
    case FrameColumn::Hr: return &f.hr;
    case FrameColumn::GsrRaw: return &f.gsr_raw;
    case FrameColumn::Gas250: return &f.gas250;
    case FrameColumn::Gas320: return &f.gas320;
    case FrameColumn::Gas400: return &f.gas400;
    case FrameColumn::Aqi: return &f.aqi;
    case FrameColumn::Tvoc: return &f.tvoc;
    case FrameColumn::Eco2: return &f.eco2;
    case FrameColumn::TempBme: return &f.temp_bme;
    case FrameColumn::TempEns: return &f.temp_ens;
    case FrameColumn::HumidityBme: return &f.humidity_bme;
    case FrameColumn::HumidityEns: return &f.humidity_ens;
    case FrameColumn::Pressure: return &f.pressure;
    case FrameColumn::Gas320Norm: return &f.gas320_norm;
    case FrameColumn::TvocNorm: return &f.tvoc_norm;
    case FrameColumn::GsrNorm: return &f.gsr_norm;
    case FrameColumn::Timestamp:
    case FrameColumn::RrIntervals:
    case FrameColumn::PhaseId: return nullptr;
  }
  return nullptr;
}

double* scalar_slot(SensorFrame& f, FrameColumn c) noexcept {
  return const_cast<double*>(scalar_slot(static_cast<const SensorFrame&>(f), c));
}

std::string_view checkpoint_name(Checkpoint c) noexcept {
  switch (c) {
    case Checkpoint::T1: return "T1";
    case Checkpoint::T2: return "T2";
    case Checkpoint::T3: return "T3";
  }
  return "?";
}

std::optional<Checkpoint> checkpoint_from_name(std::string_view s) noexcept {
  if (s == "T1") return Checkpoint::T1;
  if (s == "T2") return Checkpoint::T2;
  if (s == "T3") return Checkpoint::T3;
  return std::nullopt;
}

std::string_view gender_name(Gender g) noexcept {
  switch (g) {
    case Gender::Unspecified: return "unspecified";
    case Gender::Female: return "female";
    case Gender::Male: return "male";
    case Gender::Diverse: return "diverse";
  }
  return "unspecified";
}

std::optional<Gender> gender_from_name(std::string_view s) noexcept {
  for (Gender g : {Gender::Unspecified, Gender::Female, Gender::Male, Gender::Diverse}) {
    if (gender_name(g) == s) return g;
  }
  return std::nullopt;
}

namespace events {

std::string phase_start(Phase p) {
  return "PHASE_" + std::to_string(phase_number(p)) + "_START";
}

std::optional<Phase> parse_phase_start(std::string_view event) noexcept {
  constexpr std::string_view kPrefix = "PHASE_";
  constexpr std::string_view kSuffix = "_START";
  if (event.size() != kPrefix.size() + 1 + kSuffix.size()) return std::nullopt;
  if (!event.starts_with(kPrefix) || !event.ends_with(kSuffix)) return std::nullopt;
  const char d = event[kPrefix.size()];
  if (d < '1' || d > '7') return std::nullopt;
  return phase_from_number(d - '0');
}

std::string rating(Checkpoint c, int value) {
  return "RATING_" + std::string(checkpoint_name(c)) + "=" + std::to_string(value);
}

std::optional<ParsedRating> parse_rating(std::string_view event) noexcept {
  constexpr std::string_view kPrefix = "RATING_";
  if (!event.starts_with(kPrefix)) return std::nullopt;
  event.remove_prefix(kPrefix.size());
  const auto eq = event.find('=');
  if (eq == std::string_view::npos) return std::nullopt;
  const auto cp = checkpoint_from_name(event.substr(0, eq));
  if (!cp) return std::nullopt;
  const auto digits = event.substr(eq + 1);
  int value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
  return ParsedRating{*cp, value};
}

}  // namespace events

std::optional<std::int64_t> PhaseTimeline::end(Phase p) const {
  if (!start(p)) return std::nullopt;
  for (int n = phase_number(p) + 1; n <= 7; ++n) {
    if (start_ms[n - 1]) return start_ms[n - 1];
  }
  return end_ms;
}

std::optional<Phase> PhaseTimeline::phase_at(std::int64_t t_ms) const {
  std::optional<Phase> current;
  for (Phase p : kAllPhases) {
    const auto s = start(p);
    if (s && *s <= t_ms) current = p;
  }
  if (current && t_ms >= end_ms) return std::nullopt;
  return current;
}

PhaseTimeline phase_timeline(const std::vector<Marker>& markers,
                             const std::vector<SensorFrame>& frames) {
  PhaseTimeline tl;
  std::optional<std::int64_t> session_end;
  for (const auto& m : markers) {
    if (m.event == events::kSessionStart) {
      if (!tl.start_ms[0]) tl.start_ms[0] = m.timestamp_ms;
    } else if (m.event == events::kSessionEnd) {
      session_end = m.timestamp_ms;
    } else if (m.event == events::kBaselineStart) {
      if (!tl.start_ms[1]) tl.start_ms[1] = m.timestamp_ms;
    } else if (auto p = events::parse_phase_start(m.event)) {
      auto& slot = tl.start_ms[phase_number(*p) - 1];
      if (!slot) slot = m.timestamp_ms;
    }
  }
  if (!tl.start_ms[0]) {
    if (!frames.empty()) {
      tl.start_ms[0] = frames.front().timestamp_ms;
    } else if (!markers.empty()) {
      tl.start_ms[0] = markers.front().timestamp_ms;
    }
  }
  if (session_end) {
    tl.end_ms = *session_end;
  } else {
    std::int64_t last = 0;
    if (!frames.empty()) last = std::max(last, frames.back().timestamp_ms + 1);
    for (const auto& m : markers) last = std::max(last, m.timestamp_ms + 1);
    tl.end_ms = last;
  }
  return tl;
}

std::optional<std::int64_t> baseline_anchor_ms(const std::vector<Marker>& markers) {
  const std::string phase2 = events::phase_start(Phase::Baseline);
  for (const auto& m : markers) {
    if (m.event == phase2 || m.event == events::kBaselineStart) return m.timestamp_ms;
  }
  return std::nullopt;
}

std::string Violation::to_string() const {
  std::string s = field;
  if (index) s += "[" + std::to_string(*index) + "]";
  s += ": " + rule;
  return s;
}

std::vector<Violation> validate_session(const SessionRecord& record) {
  std::vector<Violation> out;
  auto add = [&](std::string field, std::optional<std::size_t> index, std::string rule) {
    out.push_back({std::move(field), index, std::move(rule)});
  };

  // Frames.
  for (std::size_t i = 0; i < record.frames.size(); ++i) {
    const SensorFrame& f = record.frames[i];
    if (i > 0 && f.timestamp_ms <= record.frames[i - 1].timestamp_ms) {
      add("timestamp_ms", i, "frames must be strictly increasing in timestamp");
    }
    if (!is_missing(f.tvoc) && f.tvoc < 0) add("tvoc", i, "tvoc must be >= 0");
    for (double g : {f.gas250, f.gas320, f.gas400}) {
      if (!is_missing(g) && !(g > 0)) {
        add("gas_resistance", i, "gas resistance must be > 0");
        break;
      }
    }
    for (double h : {f.humidity_bme, f.humidity_ens}) {
      if (!is_missing(h) && (h < 0 || h > 100)) {
        add("humidity", i, "humidity must be in [0,100]");
        break;
      }
    }
    if (!is_missing(f.aqi) && (f.aqi < 1 || f.aqi > 5)) add("aqi", i, "aqi must be in 1..5");
    for (double rr : f.rr_intervals) {
      if (is_missing(rr) || rr < 200 || rr > 3000) {
        add("rr_intervals", i, "rr interval must be in [200,3000] ms");
        break;
      }
    }
    for (const auto& info : frame_columns()) {
      if (!info.modality || record.available(*info.modality)) continue;
      const double* slot = scalar_slot(f, info.column);
      const bool present = slot != nullptr ? !is_missing(*slot)
                                           : (info.column == FrameColumn::RrIntervals &&
                                              !f.rr_intervals.empty());
      if (present) {
        add(std::string(info.name), i,
            "channel " + std::string(modality_name(*info.modality)) +
                " is unavailable but has a value");
      }
    }
  }

  // Markers.
  for (std::size_t i = 1; i < record.markers.size(); ++i) {
    if (record.markers[i].timestamp_ms <= record.markers[i - 1].timestamp_ms) {
      add("markers", i, "marker timestamps must be strictly increasing");
    }
  }
  std::array<int, 8> phase_seen{};
  int last_phase = 1;
  std::map<Checkpoint, std::int64_t> rating_time;
  for (std::size_t i = 0; i < record.markers.size(); ++i) {
    const Marker& m = record.markers[i];
    if (auto p = events::parse_phase_start(m.event)) {
      const int n = phase_number(*p);
      if (++phase_seen[n] > 1) {
        add("markers", i, m.event + " appears more than once");
      } else if (n != last_phase + 1) {
        add("markers", i, m.event + " out of protocol order");
      }
      last_phase = std::max(last_phase, n);
    } else if (auto r = events::parse_rating(m.event)) {
      if (r->value < 1 || r->value > 6) add("markers", i, "rating out of 1..6");
      if (rating_time.count(r->checkpoint)) {
        add("markers", i, "rating " + std::string(checkpoint_name(r->checkpoint)) +
                              " logged more than once");
      } else {
        rating_time[r->checkpoint] = m.timestamp_ms;
      }
    }
  }
  for (auto a = rating_time.begin(); a != rating_time.end(); ++a) {
    auto b = std::next(a);
    if (b != rating_time.end() && !(a->second < b->second)) {
      add("markers", std::nullopt,
          "rating " + std::string(checkpoint_name(a->first)) + " must precede " +
              std::string(checkpoint_name(b->first)));
    }
  }

  // Frame phase ids agree with the marker timeline.
  if (!record.markers.empty()) {
    const PhaseTimeline tl = phase_timeline(record.markers, record.frames);
    for (std::size_t i = 0; i < record.frames.size(); ++i) {
      const auto expected = tl.phase_at(record.frames[i].timestamp_ms);
      if (expected && *expected != record.frames[i].phase) {
        add("phase_id", i, "frame phase disagrees with marker timeline");
      }
    }
  }

  // Ratings.
  for (const auto& [cp, value] : record.meta.stress_ratings) {
    if (value < 1 || value > 6) {
      add("stress_ratings." + std::string(checkpoint_name(cp)), std::nullopt,
          "rating out of 1..6");
    }
  }
  return out;
}

EnvironmentSummary summarize_environment(const std::vector<SensorFrame>& frames) {
  std::vector<double> t, h, p;
  for (const auto& f : frames) {
    if (!is_missing(f.temp_bme)) t.push_back(f.temp_bme);
    if (!is_missing(f.humidity_bme)) h.push_back(f.humidity_bme);
    if (!is_missing(f.pressure)) p.push_back(f.pressure);
  }
  return {summarize(t), summarize(h), summarize(p)};
}

}  // namespace vocstress

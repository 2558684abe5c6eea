#include "vocstress/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "vocstress/error.hpp"
#include "vocstress/text_codec.hpp"

namespace vocstress {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

bool same_value(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

// Field must be a single token: non-empty, no delimiter.
void check_token(std::string_view token, std::size_t at, const char* what) {
  if (token.empty()) throw ParseError(at, std::string(what) + " is empty");
  if (const auto c = token.find(','); c != std::string_view::npos) {
    throw ParseError(at + c, std::string("unexpected field after ") + what);
  }
}

// Linear interpolation of the tachogram; holds end values outside the record.
double interpolate_rr(std::span<const Beat> beats, double t_ms) {
  if (t_ms <= static_cast<double>(beats.front().t_ms)) return beats.front().rr_ms;
  if (t_ms >= static_cast<double>(beats.back().t_ms)) return beats.back().rr_ms;
  auto it = std::upper_bound(beats.begin(), beats.end(), t_ms,
                             [](double t, const Beat& b) { return t < static_cast<double>(b.t_ms); });
  const Beat& hi = *it;
  const Beat& lo = *(it - 1);
  const double span = static_cast<double>(hi.t_ms - lo.t_ms);
  if (span <= 0) return hi.rr_ms;
  const double w = (t_ms - static_cast<double>(lo.t_ms)) / span;
  return lo.rr_ms + w * (hi.rr_ms - lo.rr_ms);
}

// Dominant in-band frequency of one trailing window, or nullopt when the
// window is flat or has no clear peak.
std::optional<double> dominant_frequency(std::span<const Beat> beats, std::int64_t end_ms,
                                         const RespirationOptions& o) {
  const double fs = o.resample_hz;
  const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(o.window_ms) / 1000.0 * fs));
  if (n < 4) return std::nullopt;
  const double start_ms = static_cast<double>(end_ms - o.window_ms);
  std::vector<double> x(n);
  for (std::size_t j = 0; j < n; ++j) {
    x[j] = interpolate_rr(beats, start_ms + (static_cast<double>(j) + 1.0) * 1000.0 / fs);
  }
  // Remove linear trend.
  double st = 0, sx = 0, stt = 0, stx = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double t = static_cast<double>(j);
    st += t;
    sx += x[j];
    stt += t * t;
    stx += t * x[j];
  }
  const double dn = static_cast<double>(n);
  const double slope = (dn * stx - st * sx) / (dn * stt - st * st);
  const double intercept = (sx - slope * st) / dn;
  double energy = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(j) / (dn - 1.0));
    x[j] = (x[j] - (intercept + slope * static_cast<double>(j))) * w;
    energy += x[j] * x[j];
  }
  if (energy < 1e-12) return std::nullopt;

  double best_f = 0, best_p = -1, sum_p = 0;
  std::size_t count = 0;
  const auto steps = static_cast<std::size_t>(std::floor((o.band_high_hz - o.band_low_hz) / o.freq_step_hz + 1e-9));
  for (std::size_t s = 0; s <= steps; ++s) {
    const double f = o.band_low_hz + static_cast<double>(s) * o.freq_step_hz;
    const std::complex<double> rot = std::polar(1.0, -2.0 * std::numbers::pi * f / fs);
    std::complex<double> z(1.0, 0.0), acc(0.0, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      acc += x[j] * z;
      z *= rot;
    }
    const double p = std::norm(acc);
    sum_p += p;
    ++count;
    if (p > best_p) {
      best_p = p;
      best_f = f;
    }
  }
  const double mean_p = sum_p / static_cast<double>(count);
  if (!(best_p > o.peak_to_mean * mean_p)) return std::nullopt;
  return best_f;
}

}  // namespace

WireMessage parse_line(std::string_view line) {
  if (line.empty() || line.back() != '\n') throw ParseError(line.size(), "line is not LF-terminated");
  const std::string_view body = line.substr(0, line.size() - 1);
  for (std::size_t i = 0; i < body.size(); ++i) {
    const auto c = static_cast<unsigned char>(body[i]);
    if (c < 0x20 || c > 0x7e) throw ParseError(i, "non-printable or non-ASCII byte");
  }
  if (body.size() < 2 || body[1] != ',') throw ParseError(0, "missing frame-type tag");
  const std::string_view rest = body.substr(2);
  switch (body[0]) {
    case 'F': return parse_frame_fields(rest, 2);
    case 'M': {
      const auto comma = rest.find(',');
      if (comma == std::string_view::npos) throw ParseError(body.size(), "marker needs timestamp and event");
      const auto t = parse_int(rest.substr(0, comma));
      if (!t) throw ParseError(2, "marker timestamp is not an integer");
      const std::string_view event = rest.substr(comma + 1);
      check_token(event, 2 + comma + 1, "marker event");
      return Marker{*t, std::string(event)};
    }
    case 'C': {
      check_token(rest, 2, "command");
      return CommandAck{std::string(rest)};
    }
    default: throw ParseError(0, std::string("unknown frame-type tag '") + body[0] + "'");
  }
}

std::string serialize_line(const WireMessage& message) {
  struct Visitor {
    std::string operator()(const SensorFrame& f) const { return "F," + format_frame_fields(f) + "\n"; }
    std::string operator()(const Marker& m) const {
      return "M," + std::to_string(m.timestamp_ms) + "," + m.event + "\n";
    }
    std::string operator()(const CommandAck& c) const { return "C," + c.command + "\n"; }
  };
  return std::visit(Visitor{}, message);
}

std::vector<Beat> beats_from_frames(std::span<const SensorFrame> frames) {
  // Intervals are chained beat to beat; the chain re-anchors to the frame
  // clock when it would end after the frame or more than 1.5 s before it
  // (dropped beats).
  std::vector<Beat> beats;
  std::optional<double> chain_ms;
  for (const auto& f : frames) {
    if (f.rr_intervals.empty()) continue;
    double total = 0.0;
    for (double rr : f.rr_intervals) total += rr;
    const auto ts = static_cast<double>(f.timestamp_ms);
    double last_end = ts;
    if (chain_ms) {
      const double chained = *chain_ms + total;
      if (chained <= ts + 0.5 && chained >= ts - 1500.0) last_end = chained;
    }
    const std::size_t first = beats.size();
    double t = last_end;
    for (auto it = f.rr_intervals.rbegin(); it != f.rr_intervals.rend(); ++it) {
      beats.push_back({static_cast<std::int64_t>(std::llround(t)), *it});
      t -= *it;
    }
    std::reverse(beats.begin() + static_cast<std::ptrdiff_t>(first), beats.end());
    chain_ms = last_end;
  }
  std::stable_sort(beats.begin(), beats.end(), [](const Beat& a, const Beat& b) { return a.t_ms < b.t_ms; });
  return beats;
}

double UniformSeries::value_at(std::int64_t t_ms) const {
  const std::int64_t d = t_ms - t0_ms;
  if (d < 0 || d % dt_ms != 0) return kMissing;
  const auto i = static_cast<std::size_t>(d / dt_ms);
  return i < values.size() ? values[i] : kMissing;
}

std::size_t UniformSeries::observed_count() const {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](double v) { return !is_missing(v); }));
}

bool UniformSeries::operator==(const UniformSeries& o) const {
  if (t0_ms != o.t0_ms || dt_ms != o.dt_ms || values.size() != o.values.size()) return false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!same_value(values[i], o.values[i])) return false;
  }
  return true;
}

UniformSeries derive_respiration(std::span<const Beat> beats, std::int64_t grid_t0_ms,
                                 const RespirationOptions& options) {
  if (beats.size() < 2 || beats.back().t_ms - beats.front().t_ms < options.window_ms) {
    throw Error(ErrorCode::InsufficientData, "respiration needs at least 60 s of RR intervals");
  }
  const std::int64_t step = options.step_ms;
  const std::int64_t k_lo = ceil_div(beats.front().t_ms - grid_t0_ms, step);
  const std::int64_t k_hi = floor_div(beats.back().t_ms - grid_t0_ms, step);
  UniformSeries out{grid_t0_ms + k_lo * step, step, {}};
  for (std::int64_t k = k_lo; k <= k_hi; ++k) {
    const std::int64_t end = grid_t0_ms + k * step;
    const auto lo = std::upper_bound(beats.begin(), beats.end(), end - options.window_ms,
                                     [](std::int64_t t, const Beat& b) { return t < b.t_ms; });
    const auto hi = std::upper_bound(beats.begin(), beats.end(), end,
                                     [](std::int64_t t, const Beat& b) { return t < b.t_ms; });
    if (static_cast<std::size_t>(hi - lo) < options.min_intervals) {
      out.values.push_back(kMissing);
      continue;
    }
    const auto f = dominant_frequency(beats, end, options);
    out.values.push_back(f ? *f * 60.0 : kMissing);
  }
  return out;
}

UniformSeries derive_respiration(std::span<const Beat> beats, const RespirationOptions& options) {
  if (beats.empty()) throw Error(ErrorCode::InsufficientData, "no RR intervals");
  return derive_respiration(beats, beats.front().t_ms, options);
}

UniformSeries resample_nearest(std::span<const TimedValue> samples, std::int64_t origin_ms,
                               std::int64_t dt_ms) {
  UniformSeries out{origin_ms, dt_ms, {}};
  std::int64_t k_lo = 0, k_hi = -1;
  bool any = false;
  auto grid_index = [&](std::int64_t t) { return floor_div(t - origin_ms + dt_ms / 2, dt_ms); };
  for (const auto& s : samples) {
    if (is_missing(s.value)) continue;
    const std::int64_t k = grid_index(s.t_ms);
    if (!any) {
      k_lo = k_hi = k;
      any = true;
    } else {
      k_lo = std::min(k_lo, k);
      k_hi = std::max(k_hi, k);
    }
  }
  if (!any) return out;
  out.t0_ms = origin_ms + k_lo * dt_ms;
  out.values.assign(static_cast<std::size_t>(k_hi - k_lo + 1), kMissing);
  std::vector<std::int64_t> best_distance(out.values.size(), dt_ms);
  for (const auto& s : samples) {
    if (is_missing(s.value)) continue;
    const std::int64_t k = grid_index(s.t_ms);
    const auto i = static_cast<std::size_t>(k - k_lo);
    const std::int64_t d = std::abs(s.t_ms - (origin_ms + k * dt_ms));
    if (d < best_distance[i]) {
      best_distance[i] = d;
      out.values[i] = s.value;
    }
  }
  return out;
}

std::vector<TimedValue> column_samples(std::span<const SensorFrame> frames, FrameColumn column) {
  std::vector<TimedValue> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    const double* slot = scalar_slot(f, column);
    if (slot != nullptr && !is_missing(*slot)) out.push_back({f.timestamp_ms, *slot});
  }
  return out;
}

AlignedStreams align(const std::vector<SensorFrame>& frames, const std::vector<Marker>& markers,
                     bool with_respiration) {
  const auto anchor = baseline_anchor_ms(markers);
  if (!anchor) throw Error(ErrorCode::MissingAnchor, "no BASELINE_START / PHASE_2_START marker");
  if (frames.empty()) throw Error(ErrorCode::InsufficientData, "session has no frames");

  AlignedStreams out;
  out.origin_ms = *anchor;
  auto grid = [&](FrameColumn c, std::int64_t dt) {
    const auto samples = column_samples(frames, c);
    return resample_nearest(samples, *anchor, dt);
  };
  out.hr = grid(FrameColumn::Hr, kHrGridMs);
  out.gsr = grid(FrameColumn::GsrRaw, kSlowGridMs);
  out.tvoc = grid(FrameColumn::Tvoc, kSlowGridMs);
  out.gas320 = grid(FrameColumn::Gas320, kSlowGridMs);
  out.respiration = UniformSeries{*anchor, kSlowGridMs, {}};
  if (!with_respiration) return out;
  const auto beats = beats_from_frames(frames);
  if (!beats.empty()) {
    try {
      out.respiration = derive_respiration(beats, *anchor);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientData) throw;
    }
  }
  return out;
}

LineReader::LineReader(std::istream& in) : worker_([this, &in] { run(in); }) {}

LineReader::~LineReader() {
  if (worker_.joinable()) worker_.join();
}

void LineReader::run(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    line += '\n';
    std::optional<WireMessage> parsed;
    try {
      parsed = parse_line(line);
    } catch (const ParseError&) {
    }
    std::lock_guard lock(mutex_);
    if (parsed) {
      queue_.push_back(std::move(*parsed));
    } else {
      ++malformed_;
    }
    ready_.notify_one();
  }
  std::lock_guard lock(mutex_);
  done_ = true;
  ready_.notify_all();
}

std::optional<WireMessage> LineReader::next() {
  std::unique_lock lock(mutex_);
  ready_.wait(lock, [this] { return !queue_.empty() || done_; });
  if (queue_.empty()) return std::nullopt;
  WireMessage m = std::move(queue_.front());
  queue_.pop_front();
  return m;
}

std::size_t LineReader::malformed_count() const {
  std::lock_guard lock(mutex_);
  return malformed_;
}

IngestResult ingest_stream(std::istream& in, ParticipantMeta meta) {
  IngestResult result;
  result.record.meta = std::move(meta);
  std::array<bool, kModalityCount> seen{};
  {
    LineReader reader(in);
    while (auto msg = reader.next()) {
      if (auto* f = std::get_if<SensorFrame>(&*msg)) {
        for (const auto& info : frame_columns()) {
          if (!info.modality) continue;
          const double* slot = scalar_slot(*f, info.column);
          const bool present = slot ? !is_missing(*slot) : !f->rr_intervals.empty();
          if (present) seen[static_cast<std::size_t>(*info.modality)] = true;
        }
        result.record.frames.push_back(std::move(*f));
      } else if (auto* m = std::get_if<Marker>(&*msg)) {
        result.record.markers.push_back(std::move(*m));
      } else {
        ++result.acks;
      }
    }
    result.malformed_lines = reader.malformed_count();
  }
  result.record.channel_available = seen;
  result.record.environment = summarize_environment(result.record.frames);
  return result;
}

}  // namespace vocstress

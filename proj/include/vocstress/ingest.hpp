#pragma once

// Acquisition-bridge line protocol, RR-derived respiration and resampling of
// archived sessions onto per-modality grids anchored at the baseline marker.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <istream>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "vocstress/core_model.hpp"

namespace vocstress {

// "C,<command>" lines: bridge acknowledgement of a command, or (outbound) the
// command itself.
struct CommandAck {
  std::string command;
  bool operator==(const CommandAck&) const = default;
};

using WireMessage = std::variant<SensorFrame, Marker, CommandAck>;

namespace commands {
inline constexpr std::string_view kBaseline = "BASELINE";
inline constexpr std::string_view kExperiment = "EXPERIMENT";
inline constexpr std::string_view kStop = "STOP";
}  // namespace commands

// Parses one LF-terminated line. Throws ParseError naming the byte offset.
WireMessage parse_line(std::string_view line);
// Inverse of parse_line, including the trailing LF.
std::string serialize_line(const WireMessage& message);

// Heartbeat: RR interval ending at t_ms.
struct Beat {
  std::int64_t t_ms = 0;
  double rr_ms = 0.0;
};

// Beat times reconstructed from per-frame RR lists by chaining intervals,
// anchored to frame timestamps.
std::vector<Beat> beats_from_frames(std::span<const SensorFrame> frames);

struct UniformSeries {
  std::int64_t t0_ms = 0;
  std::int64_t dt_ms = 1000;
  std::vector<double> values;

  std::int64_t time_at(std::size_t i) const {
    return t0_ms + static_cast<std::int64_t>(i) * dt_ms;
  }
  std::int64_t end_ms() const { return time_at(values.size()); }
  // Value at an exact grid time; missing when off-grid or out of range.
  double value_at(std::int64_t t_ms) const;
  std::size_t observed_count() const;
  bool operator==(const UniformSeries& o) const;
};

struct RespirationOptions {
  double band_low_hz = 0.10;
  double band_high_hz = 0.50;
  std::int64_t window_ms = 60'000;
  std::int64_t step_ms = 5'000;
  std::size_t min_intervals = 30;
  double resample_hz = 4.0;
  double freq_step_hz = 0.001;
  // Band peak must exceed this multiple of the mean band power.
  double peak_to_mean = 2.0;
};

// Dominant RSA frequency (breaths/min) over a trailing window at every
// step_ms grid point from grid_t0_ms (grid_t0_ms + k*step). Grid points are
// those whose trailing window overlaps the beat record. Throws
// InsufficientData when the beats span less than one window.
UniformSeries derive_respiration(std::span<const Beat> beats, std::int64_t grid_t0_ms,
                                 const RespirationOptions& options = {});
UniformSeries derive_respiration(std::span<const Beat> beats,
                                 const RespirationOptions& options = {});

struct TimedValue {
  std::int64_t t_ms = 0;
  double value = kMissing;
};

// Nearest observed sample within [g - dt/2, g + dt/2) of each grid point
// g = origin + k*dt, for k spanning the observed samples. No interpolation.
UniformSeries resample_nearest(std::span<const TimedValue> samples, std::int64_t origin_ms,
                               std::int64_t dt_ms);

inline constexpr std::int64_t kHrGridMs = 1'000;
inline constexpr std::int64_t kSlowGridMs = 5'000;

struct AlignedStreams {
  std::int64_t origin_ms = 0;  // baseline start
  UniformSeries hr;            // 1 Hz, bpm
  UniformSeries gsr;           // 0.2 Hz, raw ADC resistance
  UniformSeries tvoc;          // 0.2 Hz, ppb
  UniformSeries gas320;        // 0.2 Hz, kOhm
  UniformSeries respiration;   // 0.2 Hz, breaths/min

  bool operator==(const AlignedStreams&) const = default;
};

// Throws MissingAnchor without a baseline marker, InsufficientData without frames.
// Respiration is left empty when not requested or when the beat record is
// shorter than one window.
AlignedStreams align(const std::vector<SensorFrame>& frames, const std::vector<Marker>& markers,
                     bool with_respiration = true);

// Samples of one frame column (missing values dropped).
std::vector<TimedValue> column_samples(std::span<const SensorFrame> frames, FrameColumn column);

// Single-producer line reader feeding a thread-safe queue of parsed messages.
// Malformed lines are counted and dropped.
class LineReader {
 public:
  explicit LineReader(std::istream& in);
  ~LineReader();
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  // Blocks until a message is available; nullopt once the stream is drained.
  std::optional<WireMessage> next();
  std::size_t malformed_count() const;

 private:
  void run(std::istream& in);

  mutable std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<WireMessage> queue_;
  bool done_ = false;
  std::size_t malformed_ = 0;
  std::thread worker_;
};

// Collects a stream of wire messages into a session record.
struct IngestResult {
  SessionRecord record;
  std::size_t malformed_lines = 0;
  std::size_t acks = 0;
};
IngestResult ingest_stream(std::istream& in, ParticipantMeta meta);

}  // namespace vocstress

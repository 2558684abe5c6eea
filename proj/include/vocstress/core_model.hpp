#pragma once

// Shared domain vocabulary: protocol phases, sensor frames, participant
// metadata and the per-participant session record.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vocstress {

// Missing-value sentinel. Zero is a legal GSR/TVOC reading, so absence is NaN.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) noexcept { return std::isnan(v); }

enum class Phase : std::uint8_t {
  Warmup = 1,
  Baseline = 2,
  Stroop = 3,
  Arithmetic = 4,
  Recovery1 = 5,
  Recovery2 = 6,
  Recovery3 = 7,
};

inline constexpr std::array<Phase, 7> kAllPhases = {
    Phase::Warmup,    Phase::Baseline,  Phase::Stroop,    Phase::Arithmetic,
    Phase::Recovery1, Phase::Recovery2, Phase::Recovery3,
};

inline constexpr int phase_number(Phase p) noexcept { return static_cast<int>(p); }
std::optional<Phase> phase_from_number(int n) noexcept;
std::string_view phase_name(Phase p) noexcept;

// Nominal protocol duration in seconds; Warmup is operator-terminated.
std::optional<double> nominal_duration_s(Phase p) noexcept;

enum class Label { Stress, NonStress, Unlabeled };

// Stroop and Arithmetic are Stress; Baseline and the recoveries NonStress;
// Warmup is never labeled.
Label label_for_phase(Phase p) noexcept;
std::string_view label_name(Label l) noexcept;

inline bool is_stress_phase(Phase p) noexcept { return label_for_phase(p) == Label::Stress; }

// Cardiovascular reactivity group and VOC emitter class.
enum class Reactivity { High, Low };
enum class EmitterClass { High, Low };
std::string_view reactivity_name(Reactivity r) noexcept;
std::string_view emitter_name(EmitterClass e) noexcept;

// Sensor modalities that can drop out independently.
enum class Modality : std::uint8_t { HeartRate = 0, Gsr = 1, Ens160 = 2, Bme688 = 3 };
inline constexpr std::size_t kModalityCount = 4;
std::string_view modality_name(Modality m) noexcept;

// One measurement cycle from the acquisition bridge.
struct SensorFrame {
  std::int64_t timestamp_ms = 0;
  double hr = kMissing;                 // beats/min
  std::vector<double> rr_intervals;     // ms, zero or more per frame
  double gsr_raw = kMissing;            // ADC units (skin resistance)
  double gas250 = kMissing;             // kOhm
  double gas320 = kMissing;             // kOhm
  double gas400 = kMissing;             // kOhm
  double aqi = kMissing;                // 1..5
  double tvoc = kMissing;               // ppb
  double eco2 = kMissing;               // ppm
  double temp_bme = kMissing;           // degC
  double temp_ens = kMissing;           // degC
  double humidity_bme = kMissing;       // %
  double humidity_ens = kMissing;       // %
  double pressure = kMissing;           // hPa
  double gas320_norm = kMissing;
  double tvoc_norm = kMissing;
  double gsr_norm = kMissing;
  Phase phase = Phase::Warmup;

  bool operator==(const SensorFrame& other) const;
};

// Canonical column order of a frame (timestamp first). The wire F-line and
// the archive FRAMES section both use this order.
enum class FrameColumn : std::uint8_t {
  Timestamp,
  Hr,
  RrIntervals,
  GsrRaw,
  Gas250,
  Gas320,
  Gas400,
  Aqi,
  Tvoc,
  Eco2,
  TempBme,
  TempEns,
  HumidityBme,
  HumidityEns,
  Pressure,
  Gas320Norm,
  TvocNorm,
  GsrNorm,
  PhaseId,
};
inline constexpr std::size_t kFrameColumnCount = 19;

struct FrameColumnInfo {
  FrameColumn column;
  std::string_view name;
  bool forced_decimal;  // reals printed with at least one fractional digit
  std::optional<Modality> modality;
};

const std::array<FrameColumnInfo, kFrameColumnCount>& frame_columns() noexcept;

// Scalar value slot of a frame column; null for Timestamp, RrIntervals and PhaseId.
double* scalar_slot(SensorFrame& f, FrameColumn c) noexcept;
const double* scalar_slot(const SensorFrame& f, FrameColumn c) noexcept;

struct Marker {
  std::int64_t timestamp_ms = 0;
  std::string event;

  bool operator==(const Marker&) const = default;
};

enum class Checkpoint : std::uint8_t { T1 = 1, T2 = 2, T3 = 3 };
std::string_view checkpoint_name(Checkpoint c) noexcept;
std::optional<Checkpoint> checkpoint_from_name(std::string_view s) noexcept;

enum class Gender : std::uint8_t { Unspecified, Female, Male, Diverse };
std::string_view gender_name(Gender g) noexcept;
std::optional<Gender> gender_from_name(std::string_view s) noexcept;

struct ParticipantMeta {
  std::string id;
  std::optional<int> age;
  Gender gender = Gender::Unspecified;
  // Questionnaire key -> coded answer (sleep, alcohol_24h, caffeine, ...).
  std::map<std::string, std::string> confounds;
  std::map<Checkpoint, int> stress_ratings;  // 1..6

  bool operator==(const ParticipantMeta&) const = default;
};

struct SummaryStat {
  double mean = kMissing;
  double sd = kMissing;

  bool operator==(const SummaryStat& o) const;
};

struct EnvironmentSummary {
  SummaryStat temperature;
  SummaryStat humidity;
  SummaryStat pressure;

  bool operator==(const EnvironmentSummary&) const = default;
};

struct SessionRecord {
  ParticipantMeta meta;
  std::vector<SensorFrame> frames;
  std::vector<Marker> markers;
  EnvironmentSummary environment;
  std::array<bool, kModalityCount> channel_available{true, true, true, true};

  bool available(Modality m) const noexcept {
    return channel_available[static_cast<std::size_t>(m)];
  }
  bool operator==(const SessionRecord&) const = default;
};

// Marker vocabulary.
namespace events {
inline constexpr std::string_view kSessionStart = "SESSION_START";
inline constexpr std::string_view kSessionEnd = "SESSION_END";
inline constexpr std::string_view kBaselineStart = "BASELINE_START";
inline constexpr std::string_view kCmdBaseline = "CMD_BASELINE";
inline constexpr std::string_view kCmdExperiment = "CMD_EXPERIMENT";
inline constexpr std::string_view kCmdStop = "CMD_STOP";

std::string phase_start(Phase p);                 // "PHASE_3_START"
std::optional<Phase> parse_phase_start(std::string_view event) noexcept;
std::string rating(Checkpoint c, int value);      // "RATING_T1=3"
struct ParsedRating {
  Checkpoint checkpoint;
  int value;
};
std::optional<ParsedRating> parse_rating(std::string_view event) noexcept;
}  // namespace events

// Start/end of each protocol phase in session milliseconds, derived from
// markers. Phase 1 starts at SESSION_START (or the first frame); the last
// entered phase ends at SESSION_END or just after the last frame.
struct PhaseTimeline {
  std::array<std::optional<std::int64_t>, 7> start_ms{};
  std::int64_t end_ms = 0;

  std::optional<std::int64_t> start(Phase p) const { return start_ms[phase_number(p) - 1]; }
  // End of phase p: start of the next entered phase or end_ms.
  std::optional<std::int64_t> end(Phase p) const;
  std::optional<Phase> phase_at(std::int64_t t_ms) const;
};

PhaseTimeline phase_timeline(const std::vector<Marker>& markers,
                             const std::vector<SensorFrame>& frames);

// Baseline anchor (PHASE_2_START, or the BASELINE_START alias).
std::optional<std::int64_t> baseline_anchor_ms(const std::vector<Marker>& markers);

struct Violation {
  std::string field;
  std::optional<std::size_t> index;
  std::string rule;

  std::string to_string() const;
};

// Checks every SessionRecord invariant; never throws.
std::vector<Violation> validate_session(const SessionRecord& record);

EnvironmentSummary summarize_environment(const std::vector<SensorFrame>& frames);

}  // namespace vocstress

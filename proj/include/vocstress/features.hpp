#pragma once

// 30 s window segmentation and the 22-element feature vector.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vocstress/core_model.hpp"
#include "vocstress/ingest.hpp"
#include "vocstress/preprocess.hpp"

namespace vocstress {

inline constexpr std::size_t kFeatureCount = 22;
inline constexpr std::int64_t kWindowMs = 30'000;

// Stable feature order: hr_* (5), gsr_* (5), tvoc_* (7), gas320_* (5).
const std::array<std::string_view, kFeatureCount>& feature_names();

enum class FeatureBlock : std::uint8_t { Hr, Gsr, Tvoc, Gas320 };
inline constexpr std::array<FeatureBlock, 4> kAllBlocks = {FeatureBlock::Hr, FeatureBlock::Gsr,
                                                          FeatureBlock::Tvoc, FeatureBlock::Gas320};
std::string_view block_name(FeatureBlock b) noexcept;
FeatureBlock block_of(std::size_t feature) noexcept;
std::vector<std::size_t> block_features(FeatureBlock b);

// In-window samples per channel; GSR as conductance.
struct RawWindow {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  Phase phase = Phase::Baseline;
  std::vector<TimedValue> hr, gsr, tvoc, gas320;
};

struct FeatureWindow {
  std::string participant;
  double start_s = 0.0;
  double end_s = 0.0;
  Phase phase = Phase::Baseline;
  Label label = Label::NonStress;
  std::array<double, kFeatureCount> features{};

  bool operator==(const FeatureWindow& o) const;
};

// Tiles Phases 2..7 from each phase's start; remainders under 30 s dropped.
std::vector<RawWindow> segment(const AlignedStreams& streams, const PhaseTimeline& timeline);

// Throws EmptyWindow when no channel has a sample.
FeatureWindow extract(const RawWindow& window, const BaselineStats& baseline);

struct Dataset {
  std::vector<FeatureWindow> windows;

  std::size_t size() const { return windows.size(); }
  std::size_t count(Label l) const;
  // Feature matrix with missing cells; y is 1 for Stress.
  Matrix matrix() const;
  std::vector<int> labels() const;
  std::vector<std::string> groups() const;
  bool operator==(const Dataset&) const = default;
};

// Windows of one session; a window with no data anywhere is kept with all
// features missing.
std::vector<FeatureWindow> session_windows(const SessionRecord& session);

// Ordered by participant id, then window start.
Dataset build_dataset(const std::vector<SessionRecord>& sessions, std::size_t threads = 1);

std::string write_dataset_csv(const Dataset& d);
// Throws ParseError with the byte offset of the bad field.
Dataset read_dataset_csv(std::string_view text);

}  // namespace vocstress

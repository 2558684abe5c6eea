#pragma once

// Physiology-VOC coupling: reactivity grouping, per-participant lag scans,
// responder and emitter classification, the phase-effect ANOVA and the
// emitter moderator analysis.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vocstress/core_model.hpp"
#include "vocstress/ingest.hpp"
#include "vocstress/stats.hpp"

namespace vocstress {

enum class CouplingPair : std::uint8_t { HrTvoc, GsrTvoc, RrTvoc };
inline constexpr std::array<CouplingPair, 3> kAllPairs = {CouplingPair::HrTvoc, CouplingPair::GsrTvoc,
                                                          CouplingPair::RrTvoc};
std::string_view pair_name(CouplingPair p) noexcept;

inline constexpr std::int64_t kMaxLagMs = 120'000;
inline constexpr std::size_t kMinOverlap = 60;
inline constexpr double kEmitterThreshold = 0.4;
inline constexpr double kAlpha = 0.05;

struct LagScanResult {
  std::int64_t best_lag_s = 0;
  double r = 0.0;
  double p = 1.0;
};

struct CouplingOptions {
  std::size_t n_perm = 1000;
  std::uint64_t seed = 0;
};

// Scans 5 s lags 0..120 s (physio leads tvoc) on a common 0.2 Hz grid and
// returns the lag maximizing |r|, ties to the smaller lag. p compares max|r|
// over the whole scan against phase-randomized surrogates of tvoc.
// Throws InsufficientOverlap below 60 overlapping samples at the largest lag.
LagScanResult lag_scan(std::span<const double> physio, std::span<const double> tvoc, const CouplingOptions& options);

// Median split; values at or below the median are Low. Missing deltas stay
// unclassified. Throws NoHRData with fewer than two observed deltas.
std::vector<std::optional<Reactivity>> classify_reactors(std::span<const double> deltas);

struct CouplingResult {
  std::string participant;
  std::array<std::optional<LagScanResult>, 3> pairs;
  bool responder = false;
  int coupling_sign = 0;  // from the significant pair with the smallest p
  double coupling_r = kMissing;
  std::optional<Reactivity> reactor_class;
  std::optional<EmitterClass> emitter_class;
  double hr_delta = kMissing;                // bpm, stress minus baseline
  double stress_tvoc_norm_mean = kMissing;   // elevation convention
  std::array<double, 7> phase_tvoc_norm{};   // per-phase mean elevation
  double momentary_r = kMissing;             // HR-TVOC Pearson at lag 0
  double momentary_p = kMissing;
};

// Inputs of the lag scans: experiment-window (Phases 3..7) series on the
// 0.2 Hz grid. HR is averaged over each 5 s cell; GSR is conductance.
struct CouplingSeries {
  std::int64_t t0_ms = 0;
  std::vector<double> hr, gsr, rr, tvoc;
};
CouplingSeries coupling_series(const AlignedStreams& streams, const PhaseTimeline& timeline);

// Everything except reactor_class, which needs the cohort.
CouplingResult analyze_participant(const SessionRecord& session, const CouplingOptions& options);

struct PostHoc {
  Phase a = Phase::Warmup;
  Phase b = Phase::Warmup;
  stats::TestResult test;  // paired t of b minus a
  double mean_diff = 0.0;
  double p_adjusted = 1.0;
};

struct PhaseEffect {
  Reactivity group = Reactivity::High;
  std::size_t subjects = 0;
  stats::TestResult anova;
  std::vector<PostHoc> contrasts;  // all 21 phase pairs, Bonferroni m = 21
};

// RM-ANOVA over subjects x 7 phases of phase-mean tvoc elevation, plus all
// pairwise paired t contrasts. Subjects with a missing phase are dropped.
PhaseEffect phase_effect(const std::vector<CouplingResult>& cohort, Reactivity group);

struct ModeratorTest {
  CouplingPair pair = CouplingPair::HrTvoc;
  std::size_t high_n = 0;
  std::size_t low_n = 0;
  std::optional<stats::TestResult> test;  // High minus Low
};

struct ModeratorAnalysis {
  std::size_t responders = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
  double cv_abs_r = kMissing;  // percent
  std::vector<ModeratorTest> tests;  // HR and RR pairs
};

// Throws InsufficientResponders with fewer than two responders per emitter class.
ModeratorAnalysis moderator_analysis(const std::vector<CouplingResult>& results);

struct CouplingReport {
  std::vector<CouplingResult> results;
  std::array<std::size_t, 3> pair_evaluated{};
  std::array<std::size_t, 3> pair_significant{};
  std::size_t responders = 0;
  std::optional<ModeratorAnalysis> moderator;
  std::string moderator_error;
  std::vector<PhaseEffect> phase_effects;
  std::vector<std::string> phase_effect_errors;
};

CouplingReport analyze_cohort(const std::vector<SessionRecord>& sessions, const CouplingOptions& options,
                              std::size_t threads = 1);

}  // namespace vocstress

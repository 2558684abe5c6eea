#pragma once

// Synthetic participants and cohorts with planted ground truth: reactivity
// group, emitter class, and HR->TVOC coupling sign and lag.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "vocstress/core_model.hpp"
#include "vocstress/keyvalue.hpp"

namespace vocstress {

// How the emitter offset is applied: from experiment start to session end,
// or during the stress phases only.
enum class TvocResponse { Sustained, StressOnly };

struct NoiseLevels {
  double hr_sd = 1.5;            // bpm, stationary sd of the AR(1) component
  double hr_ar = 0.9;            // AR(1) coefficient at 1 Hz
  double rr_jitter_ms = 8.0;
  double gsr_rel_sd = 0.03;
  double tvoc_snr_db = 10.0;     // coupled participants
  double tvoc_null_rel_sd = 0.05;  // uncoupled participants
  double gas_rel_sd = 0.02;
};

// Phase durations in seconds, Warmup first.
struct PhaseSchedule {
  std::array<double, 7> duration_s{120.0, 180.0, 200.0, 240.0, 120.0, 120.0, 120.0};

  double start_s(Phase p) const;
  double total_s() const;
};

struct EnvironmentDrift {
  double temperature = 22.5;   // degC start
  double humidity = 40.0;      // %
  double pressure = 1013.0;    // hPa
  double temperature_step = 0.01;  // random-walk sd per 5 s step
  double humidity_step = 0.05;
  double pressure_step = 0.02;
};

struct ParticipantSpec {
  std::string id = "P01";
  std::uint64_t seed = 0;
  Reactivity reactivity = Reactivity::High;
  double hr_base = 72.0;
  double hr_delta = 18.0;
  EmitterClass emitter = EmitterClass::High;
  double tvoc_target = 0.73;     // stress-phase mean tvoc elevation
  int coupling_sign = 1;         // +1, -1 or 0
  int coupling_lag_s = 40;
  double coupling_gain = 0.3;
  TvocResponse tvoc_response = TvocResponse::Sustained;
  double baseline_tvoc = 120.0;  // ppb
  double breathing_rate = 15.0;  // breaths/min at rest
  double gsr_base = 2000.0;      // conductance units
  double gsr_gain = 1.0;         // relative conductance rise at full stress, per 20 bpm
  NoiseLevels noise;
  PhaseSchedule schedule;
  EnvironmentDrift environment;
  std::array<bool, kModalityCount> available{true, true, true, true};
  int age = 25;
  Gender gender = Gender::Unspecified;
};

// Throws InvalidSpec.
void validate(const ParticipantSpec& spec);

// Causal 1 Hz generator; usable live (the simulated bridge) and offline.
class SignalModel {
 public:
  explicit SignalModel(const ParticipantSpec& spec);

  // One frame per call, at strictly increasing times one second apart.
  // VOC, GSR and environment channels update on every fifth call.
  SensorFrame step(std::int64_t t_ms, Phase phase);

  // HR excursion (HR - base) / 20 bpm at the last step.
  double excursion() const { return e_hist_.empty() ? 0.0 : e_hist_.back(); }

 private:
  double level(double t_s) const;

  ParticipantSpec spec_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  double emitter_offset_ = 0.0;
  double tvoc_noise_sd_ = 0.0;
  std::optional<double> t3_s_, t5_s_;
  std::size_t calls_ = 0;
  double hr_ar_ = 0.0;
  double gsr_ar_ = 0.0;
  double next_beat_ms_ = 0.0;
  double breath_phase_ = 0.0;
  std::vector<double> e_hist_;
  double temp_ = 0.0, humidity_ = 0.0, pressure_ = 0.0;
  double tvoc_base_sum_ = 0.0, gas_base_sum_ = 0.0, gsr_base_sum_ = 0.0;
  std::size_t base_count_ = 0;
};

// Expected mean over the stress phases of the delayed HR excursion, at
// nominal timing.
double expected_stress_level(const ParticipantSpec& spec);

// Full 7-phase session at the spec's schedule. Deterministic given the spec.
SessionRecord simulate_participant(const ParticipantSpec& spec);

enum class SignMode { Preset, Random, Null, Positive };
std::string_view sign_mode_name(SignMode m) noexcept;

struct CohortSpec {
  std::size_t n = 24;
  // Group mix over (reactivity, emitter) cells: HH, HL, LH, LL. Sums to 1.
  std::array<double, 4> mix{0.25, 0.25, 0.25, 0.25};
  SignMode sign_mode = SignMode::Preset;
  // Per-modality availability probability (HR, GSR, ENS160, BME688).
  std::array<double, kModalityCount> availability{24.0 / 25.0, 19.0 / 25.0, 1.0, 1.0};
  double high_hr_delta_min = 10.6, high_hr_delta_max = 26.4;
  double low_hr_delta_min = 2.2, low_hr_delta_max = 9.4;
  double high_emitter_target = 0.73, low_emitter_target = 0.06;
  int lag_min_s = 30, lag_max_s = 80;
  double baseline_tvoc_min = 8.0, baseline_tvoc_max = 689.0;
  double coupling_gain = 0.3;
  TvocResponse tvoc_response = TvocResponse::Sustained;
  NoiseLevels noise;
  PhaseSchedule schedule;
  EnvironmentDrift environment;
};

// Throws InvalidSpec.
void validate(const CohortSpec& spec);
CohortSpec cohort_spec_from(const KeyValues& kv);
KeyValues to_key_values(const CohortSpec& spec);

// Participant specs (ground truth) without generating signals.
std::vector<ParticipantSpec> plan_cohort(const CohortSpec& spec, std::uint64_t seed);

struct Cohort {
  std::vector<ParticipantSpec> truth;
  std::vector<SessionRecord> sessions;
};
Cohort simulate_cohort(const CohortSpec& spec, std::uint64_t seed, std::size_t threads = 1);

// Ground-truth table, one participant per line.
std::string truth_csv(const std::vector<ParticipantSpec>& truth);

}  // namespace vocstress

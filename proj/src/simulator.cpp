#include "vocstress/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "vocstress/error.hpp"
#include "vocstress/parallel.hpp"
#include "vocstress/preprocess.hpp"

namespace vocstress {

namespace {

constexpr double kRampTau = 20.0;    // s
constexpr double kRsaDepth = 0.04;   // relative RR modulation
constexpr double kStressBreathShift = -2.0;  // breaths/min at full stress
constexpr std::size_t kSlowEvery = 5;
constexpr double kExcursionScale = 20.0;  // bpm per unit excursion

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Causal ramp from 0 at u=0 towards 1, reaching ~0.88 of the rise after tau.
double ramp(double u) {
  if (u < 0) return 0.0;
  const double lo = logistic(-2.0);
  return (logistic(4.0 * u / kRampTau - 2.0) - lo) / (1.0 - lo);
}

double nominal_level(const PhaseSchedule& s, double t_s) {
  return ramp(t_s - s.start_s(Phase::Stroop)) - ramp(t_s - s.start_s(Phase::Recovery1));
}

// Variance of the delayed excursion over the experiment phases (3..7),
// combining the nominal stress level with the HR noise component.
double excursion_variance(const ParticipantSpec& spec) {
  const auto& s = spec.schedule;
  std::vector<double> lv;
  for (double t = s.start_s(Phase::Stroop); t < s.total_s(); t += 1.0) {
    lv.push_back(nominal_level(s, t - spec.coupling_lag_s));
  }
  const double m = std::accumulate(lv.begin(), lv.end(), 0.0) / static_cast<double>(lv.size());
  double v = 0.0;
  for (double x : lv) v += (x - m) * (x - m);
  v /= static_cast<double>(lv.size());
  const double k = spec.hr_delta / kExcursionScale;
  const double noise = spec.noise.hr_sd / kExcursionScale;
  return k * k * v + noise * noise;
}

// Rounds to a decimal grid so values print as short decimals.
double round_to(double x, double step) {
  const double scale = std::round(1.0 / step);
  return std::round(x * scale) / scale;
}

int aqi_for(double tvoc) {
  if (tvoc < 65) return 1;
  if (tvoc < 220) return 2;
  if (tvoc < 660) return 3;
  if (tvoc < 2200) return 4;
  return 5;
}

}  // namespace

double PhaseSchedule::start_s(Phase p) const {
  double t = 0.0;
  for (int i = 1; i < phase_number(p); ++i) t += duration_s[static_cast<std::size_t>(i - 1)];
  return t;
}

double PhaseSchedule::total_s() const { return std::accumulate(duration_s.begin(), duration_s.end(), 0.0); }

void validate(const ParticipantSpec& spec) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::InvalidSpec, "participant " + spec.id + ": " + what);
  };
  if (spec.coupling_sign < -1 || spec.coupling_sign > 1) fail("coupling_sign must be -1, 0 or +1");
  if (spec.coupling_sign != 0 && (spec.coupling_lag_s < 30 || spec.coupling_lag_s > 80)) {
    fail("coupling lag must be in [30,80] s");
  }
  if (spec.coupling_lag_s < 0) fail("coupling lag must be >= 0");
  if (!(spec.hr_delta >= 0)) fail("hr_delta must be >= 0");
  if (!(spec.hr_base > 30 && spec.hr_base + spec.hr_delta < 200)) fail("hr out of range");
  if (!(spec.baseline_tvoc > 0)) fail("baseline_tvoc must be > 0");
  if (!(spec.breathing_rate >= 8 && spec.breathing_rate <= 28)) fail("breathing_rate must be in [8,28]");
  if (!(spec.gsr_base > 0)) fail("gsr_base must be > 0");
  if (!(spec.coupling_gain >= 0)) fail("coupling_gain must be >= 0");
  for (double d : spec.schedule.duration_s) {
    if (!(d >= 10)) fail("phase durations must be >= 10 s");
  }
  if (!(spec.noise.hr_ar >= 0 && spec.noise.hr_ar < 1)) fail("hr_ar must be in [0,1)");
}

double expected_stress_level(const ParticipantSpec& spec) {
  const auto& s = spec.schedule;
  double sum = 0.0;
  std::size_t n = 0;
  for (double t = s.start_s(Phase::Stroop); t < s.start_s(Phase::Recovery1); t += 1.0, ++n) {
    sum += nominal_level(s, t - spec.coupling_lag_s);
  }
  return n ? spec.hr_delta / kExcursionScale * sum / static_cast<double>(n) : 0.0;
}

SignalModel::SignalModel(const ParticipantSpec& spec) : spec_(spec), rng_(spec.seed) {
  validate(spec_);
  const double a = spec_.coupling_gain * spec_.coupling_sign;
  emitter_offset_ = spec_.tvoc_target - a * expected_stress_level(spec_);
  if (spec_.coupling_sign != 0) {
    const double signal = spec_.coupling_gain * spec_.coupling_gain * excursion_variance(spec_);
    tvoc_noise_sd_ = std::sqrt(signal / std::pow(10.0, spec_.noise.tvoc_snr_db / 10.0));
  } else {
    tvoc_noise_sd_ = spec_.noise.tvoc_null_rel_sd;
  }
  hr_ar_ = spec_.noise.hr_sd * normal_(rng_);
  temp_ = spec_.environment.temperature;
  humidity_ = spec_.environment.humidity;
  pressure_ = spec_.environment.pressure;
  breath_phase_ = 2.0 * std::numbers::pi * std::uniform_real_distribution<double>(0, 1)(rng_);
}

double SignalModel::level(double t_s) const {
  double v = 0.0;
  if (t3_s_) v += ramp(t_s - *t3_s_);
  if (t5_s_) v -= ramp(t_s - *t5_s_);
  return v;
}

SensorFrame SignalModel::step(std::int64_t t_ms, Phase phase) {
  const double t_s = static_cast<double>(t_ms) / 1000.0;
  if (calls_ == 0) next_beat_ms_ = static_cast<double>(t_ms) - 1000.0;
  if (phase_number(phase) >= 3 && !t3_s_) t3_s_ = t_s;
  if (phase_number(phase) >= 5 && !t5_s_) t5_s_ = t_s;

  const auto& nz = spec_.noise;
  const double phi = nz.hr_ar;
  hr_ar_ = phi * hr_ar_ + std::sqrt(1.0 - phi * phi) * nz.hr_sd * normal_(rng_);
  const double lvl = level(t_s);
  const double hr_true = spec_.hr_base + spec_.hr_delta * lvl + hr_ar_;
  e_hist_.push_back((hr_true - spec_.hr_base) / kExcursionScale);

  SensorFrame f;
  f.timestamp_ms = t_ms;
  f.phase = phase;
  f.hr = round_to(hr_true, 0.1);

  // Beats ending in (t - 1 s, t].
  const double breath_hz = (spec_.breathing_rate + kStressBreathShift * lvl) / 60.0;
  while (true) {
    const double base_rr = 60000.0 / hr_true;
    const double rr = std::round(base_rr * (1.0 + kRsaDepth * std::sin(breath_phase_)) +
                                 nz.rr_jitter_ms * normal_(rng_));
    const double clamped = std::clamp(rr, 250.0, 2500.0);
    if (next_beat_ms_ + clamped > static_cast<double>(t_ms)) break;
    next_beat_ms_ += clamped;
    breath_phase_ = std::fmod(breath_phase_ + 2.0 * std::numbers::pi * breath_hz * clamped / 1000.0,
                              2.0 * std::numbers::pi);
    f.rr_intervals.push_back(clamped);
  }

  if (calls_ % kSlowEvery == 0) {
    const double* lag_e = nullptr;
    const std::size_t lag = static_cast<std::size_t>(spec_.coupling_lag_s);
    if (e_hist_.size() > lag) lag_e = &e_hist_[e_hist_.size() - 1 - lag];
    const double delayed = lag_e ? *lag_e : 0.0;

    double offset = 0.0;
    if (t3_s_) {
      const bool active = spec_.tvoc_response == TvocResponse::Sustained ? true : !t5_s_;
      if (active) offset = emitter_offset_;
    }
    const double rel = 1.0 + offset + spec_.coupling_gain * spec_.coupling_sign * delayed +
                       tvoc_noise_sd_ * normal_(rng_);
    const double tvoc = std::max(0.0, round_to(spec_.baseline_tvoc * rel, 0.01));
    f.tvoc = tvoc;
    f.eco2 = std::round(400.0 + 1.6 * tvoc);
    f.aqi = aqi_for(tvoc);
    const double voc_ratio = std::max(tvoc, 0.0) / spec_.baseline_tvoc;
    auto gas = [&](double base) {
      const double g = base / (1.0 + 0.5 * (voc_ratio - 1.0)) * (1.0 + nz.gas_rel_sd * normal_(rng_));
      return round_to(std::clamp(g, 0.5, 5000.0), 0.01);
    };
    f.gas250 = gas(180.0);
    f.gas320 = gas(95.0);
    f.gas400 = gas(60.0);

    const double arousal = spec_.gsr_gain * spec_.hr_delta / 20.0 * lvl;
    gsr_ar_ = 0.8 * gsr_ar_ + 0.6 * nz.gsr_rel_sd * normal_(rng_);
    const double conductance = spec_.gsr_base * (1.0 + arousal) * (1.0 + gsr_ar_);
    f.gsr_raw = std::round(kDefaultConductanceScale / std::max(conductance, 1.0));

    const auto& env = spec_.environment;
    temp_ += env.temperature_step * normal_(rng_);
    humidity_ = std::clamp(humidity_ + env.humidity_step * normal_(rng_), 5.0, 95.0);
    pressure_ += env.pressure_step * normal_(rng_);
    f.temp_bme = round_to(temp_, 0.01);
    f.temp_ens = round_to(temp_ + 0.6, 0.01);
    f.humidity_bme = round_to(humidity_, 0.01);
    f.humidity_ens = round_to(humidity_ - 1.5, 0.01);
    f.pressure = round_to(pressure_, 0.01);

    const double gsr_c = kDefaultConductanceScale / f.gsr_raw;
    if (phase == Phase::Baseline) {
      tvoc_base_sum_ += f.tvoc;
      gas_base_sum_ += f.gas320;
      gsr_base_sum_ += gsr_c;
      ++base_count_;
    }
    if (phase_number(phase) <= 2) {
      f.tvoc_norm = f.gas320_norm = f.gsr_norm = 0.0;
    } else if (base_count_ > 0) {
      const double n = static_cast<double>(base_count_);
      auto norm = [](double b, double x) { return b != 0 ? norm_decrease(b, x) : kMissing; };
      f.tvoc_norm = norm(tvoc_base_sum_ / n, f.tvoc);
      f.gas320_norm = norm(gas_base_sum_ / n, f.gas320);
      f.gsr_norm = norm(gsr_base_sum_ / n, gsr_c);
    }
  }
  ++calls_;

  for (const auto& info : frame_columns()) {
    if (!info.modality || spec_.available[static_cast<std::size_t>(*info.modality)]) continue;
    if (double* slot = scalar_slot(f, info.column)) *slot = kMissing;
    if (info.column == FrameColumn::RrIntervals) f.rr_intervals.clear();
  }
  return f;
}

SessionRecord simulate_participant(const ParticipantSpec& spec) {
  SignalModel model(spec);
  const auto& s = spec.schedule;
  auto ms = [](double t_s) { return static_cast<std::int64_t>(std::llround(t_s * 1000.0)); };

  SessionRecord rec;
  rec.meta.id = spec.id;
  rec.meta.age = spec.age;
  rec.meta.gender = spec.gender;
  rec.channel_available = spec.available;

  // Ratings: monotone in hr_delta with one step of ordinal noise.
  std::mt19937_64 rating_rng(derive_seed(spec.seed, 0x7261));
  const int t1 = 1 + static_cast<int>(rating_rng() % 2);
  int t2 = t1, t3 = t1;
  if (spec.reactivity == Reactivity::High) {
    t2 = std::min(6, t1 + 1 + static_cast<int>(std::lround(spec.hr_delta / 13.0)));
    t3 = std::min(6, t2 + 1);
    if (t2 == 6) t2 = 5;
  } else {
    t2 = std::min(6, t1 + (spec.hr_delta > 5.0 ? 1 : 0));
    t3 = t2;
  }
  rec.meta.stress_ratings = {{Checkpoint::T1, t1}, {Checkpoint::T2, t2}, {Checkpoint::T3, t3}};

  const std::int64_t end_ms = ms(s.total_s());
  rec.markers.push_back({0, std::string(events::kSessionStart)});
  for (Phase p : kAllPhases) {
    if (p == Phase::Warmup) continue;
    const std::int64_t at = ms(s.start_s(p));
    if (p == Phase::Stroop) rec.markers.push_back({at - 2000, events::rating(Checkpoint::T1, t1)});
    if (p == Phase::Arithmetic) rec.markers.push_back({at - 2000, events::rating(Checkpoint::T2, t2)});
    if (p == Phase::Recovery1) rec.markers.push_back({at - 2000, events::rating(Checkpoint::T3, t3)});
    rec.markers.push_back({at, events::phase_start(p)});
    if (p == Phase::Baseline) rec.markers.push_back({at + 1, std::string(events::kCmdBaseline)});
    if (p == Phase::Stroop) rec.markers.push_back({at + 1, std::string(events::kCmdExperiment)});
  }
  rec.markers.push_back({end_ms, std::string(events::kCmdStop)});
  rec.markers.push_back({end_ms + 1, std::string(events::kSessionEnd)});

  const PhaseTimeline timeline = phase_timeline(rec.markers, {});
  rec.frames.reserve(static_cast<std::size_t>(s.total_s()));
  for (std::int64_t t = 0; t < end_ms; t += 1000) {
    rec.frames.push_back(model.step(t, timeline.phase_at(t).value_or(Phase::Warmup)));
  }
  rec.environment = summarize_environment(rec.frames);
  return rec;
}

std::string_view sign_mode_name(SignMode m) noexcept {
  switch (m) {
    case SignMode::Preset: return "preset";
    case SignMode::Random: return "random";
    case SignMode::Null: return "null";
    case SignMode::Positive: return "positive";
  }
  return "?";
}

void validate(const CohortSpec& spec) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidSpec, "cohort spec: " + what); };
  if (spec.n < 1) fail("n must be >= 1");
  double sum = 0.0;
  for (double p : spec.mix) {
    if (!(p >= 0 && p <= 1)) fail("mix proportions must be in [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail("mix proportions must sum to 1");
  for (double p : spec.availability) {
    if (!(p >= 0 && p <= 1)) fail("availability must be in [0,1]");
  }
  if (!(spec.high_hr_delta_min <= spec.high_hr_delta_max && spec.low_hr_delta_min <= spec.low_hr_delta_max &&
        spec.low_hr_delta_min >= 0)) {
    fail("hr_delta ranges must be ordered and non-negative");
  }
  if (spec.lag_min_s < 30 || spec.lag_max_s > 80 || spec.lag_min_s > spec.lag_max_s) {
    fail("lag range must lie within [30,80] s");
  }
  if (!(spec.baseline_tvoc_min > 0 && spec.baseline_tvoc_min <= spec.baseline_tvoc_max)) {
    fail("baseline tvoc range must be positive and ordered");
  }
  for (double d : spec.schedule.duration_s) {
    if (!(d >= 10)) fail("phase durations must be >= 10 s");
  }
}

namespace {

constexpr std::array<const char*, 4> kMixKeys = {"mix.high_high", "mix.high_low", "mix.low_high", "mix.low_low"};
constexpr std::array<const char*, 4> kAvailKeys = {"availability.hr", "availability.gsr",
                                                   "availability.ens160", "availability.bme688"};
constexpr std::array<const char*, 7> kPhaseKeys = {"phase.warmup_s",    "phase.baseline_s",  "phase.stroop_s",
                                                   "phase.arithmetic_s", "phase.recovery1_s", "phase.recovery2_s",
                                                   "phase.recovery3_s"};

SignMode parse_sign_mode(const std::string& s) {
  for (SignMode m : {SignMode::Preset, SignMode::Random, SignMode::Null, SignMode::Positive}) {
    if (s == sign_mode_name(m)) return m;
  }
  throw Error(ErrorCode::InvalidSpec, "unknown sign_mode '" + s + "'");
}

TvocResponse parse_response(const std::string& s) {
  if (s == "sustained") return TvocResponse::Sustained;
  if (s == "stress_only") return TvocResponse::StressOnly;
  throw Error(ErrorCode::InvalidSpec, "unknown tvoc_response '" + s + "'");
}

std::string fmt_real(double v) { return fmt::format("{}", v); }

}  // namespace

CohortSpec cohort_spec_from(const KeyValues& kv) {
  static const std::vector<std::string> known = [] {
    std::vector<std::string> k = {"n", "sign_mode", "high_hr_delta_min", "high_hr_delta_max",
                                  "low_hr_delta_min", "low_hr_delta_max", "high_emitter_target",
                                  "low_emitter_target", "lag_min_s", "lag_max_s", "baseline_tvoc_min",
                                  "baseline_tvoc_max", "coupling_gain", "tvoc_response",
                                  "noise.hr_sd", "noise.hr_ar", "noise.rr_jitter_ms", "noise.gsr_rel_sd",
                                  "noise.tvoc_snr_db", "noise.tvoc_null_rel_sd", "noise.gas_rel_sd",
                                  "env.temperature", "env.humidity", "env.pressure", "env.temperature_step",
                                  "env.humidity_step", "env.pressure_step"};
    k.insert(k.end(), kMixKeys.begin(), kMixKeys.end());
    k.insert(k.end(), kAvailKeys.begin(), kAvailKeys.end());
    k.insert(k.end(), kPhaseKeys.begin(), kPhaseKeys.end());
    return k;
  }();
  for (const auto& [key, value] : kv.entries()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorCode::InvalidSpec, "unknown cohort spec key '" + key + "'");
    }
  }

  CohortSpec s;
  const long long n = kv.get_int("n", static_cast<long long>(s.n));
  if (n < 1) throw Error(ErrorCode::InvalidSpec, "cohort spec: n must be >= 1");
  s.n = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i < 4; ++i) s.mix[i] = kv.get_real(kMixKeys[i], s.mix[i]);
  for (std::size_t i = 0; i < kModalityCount; ++i) s.availability[i] = kv.get_real(kAvailKeys[i], s.availability[i]);
  for (std::size_t i = 0; i < 7; ++i) s.schedule.duration_s[i] = kv.get_real(kPhaseKeys[i], s.schedule.duration_s[i]);
  s.sign_mode = parse_sign_mode(kv.get_string("sign_mode", std::string(sign_mode_name(s.sign_mode))));
  s.high_hr_delta_min = kv.get_real("high_hr_delta_min", s.high_hr_delta_min);
  s.high_hr_delta_max = kv.get_real("high_hr_delta_max", s.high_hr_delta_max);
  s.low_hr_delta_min = kv.get_real("low_hr_delta_min", s.low_hr_delta_min);
  s.low_hr_delta_max = kv.get_real("low_hr_delta_max", s.low_hr_delta_max);
  s.high_emitter_target = kv.get_real("high_emitter_target", s.high_emitter_target);
  s.low_emitter_target = kv.get_real("low_emitter_target", s.low_emitter_target);
  s.lag_min_s = static_cast<int>(kv.get_int("lag_min_s", s.lag_min_s));
  s.lag_max_s = static_cast<int>(kv.get_int("lag_max_s", s.lag_max_s));
  s.baseline_tvoc_min = kv.get_real("baseline_tvoc_min", s.baseline_tvoc_min);
  s.baseline_tvoc_max = kv.get_real("baseline_tvoc_max", s.baseline_tvoc_max);
  s.coupling_gain = kv.get_real("coupling_gain", s.coupling_gain);
  s.tvoc_response = parse_response(
      kv.get_string("tvoc_response", s.tvoc_response == TvocResponse::Sustained ? "sustained" : "stress_only"));
  auto& nz = s.noise;
  nz.hr_sd = kv.get_real("noise.hr_sd", nz.hr_sd);
  nz.hr_ar = kv.get_real("noise.hr_ar", nz.hr_ar);
  nz.rr_jitter_ms = kv.get_real("noise.rr_jitter_ms", nz.rr_jitter_ms);
  nz.gsr_rel_sd = kv.get_real("noise.gsr_rel_sd", nz.gsr_rel_sd);
  nz.tvoc_snr_db = kv.get_real("noise.tvoc_snr_db", nz.tvoc_snr_db);
  nz.tvoc_null_rel_sd = kv.get_real("noise.tvoc_null_rel_sd", nz.tvoc_null_rel_sd);
  nz.gas_rel_sd = kv.get_real("noise.gas_rel_sd", nz.gas_rel_sd);
  auto& env = s.environment;
  env.temperature = kv.get_real("env.temperature", env.temperature);
  env.humidity = kv.get_real("env.humidity", env.humidity);
  env.pressure = kv.get_real("env.pressure", env.pressure);
  env.temperature_step = kv.get_real("env.temperature_step", env.temperature_step);
  env.humidity_step = kv.get_real("env.humidity_step", env.humidity_step);
  env.pressure_step = kv.get_real("env.pressure_step", env.pressure_step);
  validate(s);
  return s;
}

KeyValues to_key_values(const CohortSpec& s) {
  KeyValues kv;
  kv.set("n", std::to_string(s.n));
  for (std::size_t i = 0; i < 4; ++i) kv.set(kMixKeys[i], fmt_real(s.mix[i]));
  for (std::size_t i = 0; i < kModalityCount; ++i) kv.set(kAvailKeys[i], fmt_real(s.availability[i]));
  for (std::size_t i = 0; i < 7; ++i) kv.set(kPhaseKeys[i], fmt_real(s.schedule.duration_s[i]));
  kv.set("sign_mode", std::string(sign_mode_name(s.sign_mode)));
  kv.set("high_hr_delta_min", fmt_real(s.high_hr_delta_min));
  kv.set("high_hr_delta_max", fmt_real(s.high_hr_delta_max));
  kv.set("low_hr_delta_min", fmt_real(s.low_hr_delta_min));
  kv.set("low_hr_delta_max", fmt_real(s.low_hr_delta_max));
  kv.set("high_emitter_target", fmt_real(s.high_emitter_target));
  kv.set("low_emitter_target", fmt_real(s.low_emitter_target));
  kv.set("lag_min_s", std::to_string(s.lag_min_s));
  kv.set("lag_max_s", std::to_string(s.lag_max_s));
  kv.set("baseline_tvoc_min", fmt_real(s.baseline_tvoc_min));
  kv.set("baseline_tvoc_max", fmt_real(s.baseline_tvoc_max));
  kv.set("coupling_gain", fmt_real(s.coupling_gain));
  kv.set("tvoc_response", s.tvoc_response == TvocResponse::Sustained ? "sustained" : "stress_only");
  kv.set("noise.hr_sd", fmt_real(s.noise.hr_sd));
  kv.set("noise.hr_ar", fmt_real(s.noise.hr_ar));
  kv.set("noise.rr_jitter_ms", fmt_real(s.noise.rr_jitter_ms));
  kv.set("noise.gsr_rel_sd", fmt_real(s.noise.gsr_rel_sd));
  kv.set("noise.tvoc_snr_db", fmt_real(s.noise.tvoc_snr_db));
  kv.set("noise.tvoc_null_rel_sd", fmt_real(s.noise.tvoc_null_rel_sd));
  kv.set("noise.gas_rel_sd", fmt_real(s.noise.gas_rel_sd));
  kv.set("env.temperature", fmt_real(s.environment.temperature));
  kv.set("env.humidity", fmt_real(s.environment.humidity));
  kv.set("env.pressure", fmt_real(s.environment.pressure));
  kv.set("env.temperature_step", fmt_real(s.environment.temperature_step));
  kv.set("env.humidity_step", fmt_real(s.environment.humidity_step));
  kv.set("env.pressure_step", fmt_real(s.environment.pressure_step));
  return kv;
}

std::vector<ParticipantSpec> plan_cohort(const CohortSpec& spec, std::uint64_t seed) {
  validate(spec);
  // Exact-proportion cell counts (largest remainder), then a seeded shuffle.
  std::array<std::size_t, 4> count{};
  std::array<double, 4> rem{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < 4; ++c) {
    const double want = spec.mix[c] * static_cast<double>(spec.n);
    count[c] = static_cast<std::size_t>(std::floor(want + 1e-9));
    rem[c] = want - static_cast<double>(count[c]);
    assigned += count[c];
  }
  while (assigned < spec.n) {
    const auto c = static_cast<std::size_t>(std::max_element(rem.begin(), rem.end()) - rem.begin());
    ++count[c];
    rem[c] = -1.0;
    ++assigned;
  }
  std::vector<std::size_t> cells;
  for (std::size_t c = 0; c < 4; ++c) cells.insert(cells.end(), count[c], c);
  std::mt19937_64 shuffle_rng(derive_seed(seed, 0x636f686f7274));
  std::shuffle(cells.begin(), cells.end(), shuffle_rng);

  std::vector<ParticipantSpec> out;
  out.reserve(spec.n);
  const int width = spec.n >= 100 ? 3 : 2;
  for (std::size_t i = 0; i < spec.n; ++i) {
    std::mt19937_64 rng(derive_seed(seed, i + 1));
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    ParticipantSpec p;
    p.id = fmt::format("P{:0{}}", i + 1, width);
    p.seed = derive_seed(seed ^ 0x5eed, i + 1);
    p.reactivity = cells[i] < 2 ? Reactivity::High : Reactivity::Low;
    p.emitter = cells[i] % 2 == 0 ? EmitterClass::High : EmitterClass::Low;
    p.hr_delta = p.reactivity == Reactivity::High ? uniform(spec.high_hr_delta_min, spec.high_hr_delta_max)
                                                  : uniform(spec.low_hr_delta_min, spec.low_hr_delta_max);
    p.hr_base = uniform(62.0, 82.0);
    p.tvoc_target = p.emitter == EmitterClass::High ? spec.high_emitter_target : spec.low_emitter_target;
    const double coin = uniform(0.0, 1.0);
    switch (spec.sign_mode) {
      case SignMode::Preset: p.coupling_sign = p.emitter == EmitterClass::High ? 1 : -1; break;
      case SignMode::Random: p.coupling_sign = coin < 0.5 ? 1 : -1; break;
      case SignMode::Null: p.coupling_sign = 0; break;
      case SignMode::Positive: p.coupling_sign = 1; break;
    }
    p.coupling_lag_s = std::uniform_int_distribution<int>(spec.lag_min_s, spec.lag_max_s)(rng);
    p.coupling_gain = spec.coupling_gain;
    p.tvoc_response = spec.tvoc_response;
    p.baseline_tvoc = std::exp(uniform(std::log(spec.baseline_tvoc_min), std::log(spec.baseline_tvoc_max)));
    p.breathing_rate = uniform(12.0, 18.0);
    p.gsr_base = uniform(1500.0, 3000.0);
    p.noise = spec.noise;
    p.schedule = spec.schedule;
    p.environment = spec.environment;
    p.environment.temperature += uniform(-1.0, 1.0);
    p.environment.humidity += uniform(-5.0, 5.0);
    p.environment.pressure += uniform(-5.0, 5.0);
    for (std::size_t m = 0; m < kModalityCount; ++m) p.available[m] = uniform(0.0, 1.0) < spec.availability[m];
    p.age = static_cast<int>(std::uniform_int_distribution<int>(19, 45)(rng));
    p.gender = coin < 0.5 ? Gender::Female : Gender::Male;
    out.push_back(std::move(p));
  }
  return out;
}

Cohort simulate_cohort(const CohortSpec& spec, std::uint64_t seed, std::size_t threads) {
  Cohort c;
  c.truth = plan_cohort(spec, seed);
  c.sessions.resize(c.truth.size());
  parallel_for(c.truth.size(), threads, [&](std::size_t i) { c.sessions[i] = simulate_participant(c.truth[i]); });
  return c;
}

std::string truth_csv(const std::vector<ParticipantSpec>& truth) {
  std::string out =
      "participant,reactivity,hr_delta,emitter,tvoc_target,coupling_sign,coupling_lag_s,baseline_tvoc,"
      "hr,gsr,ens160,bme688\n";
  for (const auto& p : truth) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", p.id, reactivity_name(p.reactivity), p.hr_delta,
                       emitter_name(p.emitter), p.tvoc_target, p.coupling_sign, p.coupling_lag_s, p.baseline_tvoc,
                       int(p.available[0]), int(p.available[1]), int(p.available[2]), int(p.available[3]));
  }
  return out;
}

}  // namespace vocstress

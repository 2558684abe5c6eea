#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vocstress/error.hpp"
#include "vocstress/ingest.hpp"
#include "vocstress/simulator.hpp"

using namespace vocstress;

namespace {

std::vector<Beat> modulated_beats(double f_hz, double seconds) {
  std::vector<Beat> beats;
  double t = 0;
  while (t < seconds * 1000) {
    const double rr = 900 + 60 * std::sin(2 * std::numbers::pi * f_hz * t / 1000);
    t += rr;
    beats.push_back({static_cast<std::int64_t>(std::llround(t)), rr});
  }
  return beats;
}

// Dominant frequency of the linearly interpolated tachogram over the last
// 60 s, by a dense direct DFT over 0.10..0.50 Hz.
double dft_oracle_bpm(const std::vector<Beat>& beats) {
  const double end = static_cast<double>(beats.back().t_ms);
  const double start = end - 60'000;
  std::vector<double> x;
  for (double t = start; t <= end; t += 250) {
    std::size_t k = 1;
    while (k < beats.size() && static_cast<double>(beats[k].t_ms) < t) ++k;
    const auto& a = beats[k - 1];
    const auto& b = beats[std::min(k, beats.size() - 1)];
    const double span = static_cast<double>(b.t_ms - a.t_ms);
    const double w = span > 0 ? (t - static_cast<double>(a.t_ms)) / span : 0.0;
    x.push_back(a.rr_ms + std::clamp(w, 0.0, 1.0) * (b.rr_ms - a.rr_ms));
  }
  double m = 0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double best_f = 0, best_p = -1;
  for (double f = 0.10; f <= 0.50 + 1e-12; f += 0.0005) {
    double re = 0, im = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double ph = 2 * std::numbers::pi * f * 0.25 * static_cast<double>(i);
      re += (x[i] - m) * std::cos(ph);
      im -= (x[i] - m) * std::sin(ph);
    }
    if (re * re + im * im > best_p) {
      best_p = re * re + im * im;
      best_f = f;
    }
  }
  return best_f * 60;
}

double last_observed(const UniformSeries& s) {
  for (auto it = s.values.rbegin(); it != s.values.rend(); ++it) {
    if (!is_missing(*it)) return *it;
  }
  return kMissing;
}

}  // namespace

TEST_CASE("respiration from RSA matches a DFT oracle") {
  for (double f : {0.25, 0.10, 0.18, 0.40}) {
    CAPTURE(f);
    const auto beats = modulated_beats(f, 150);
    const double got = last_observed(derive_respiration(beats));
    const double oracle = dft_oracle_bpm(beats);
    CHECK(std::fabs(got - oracle) <= 0.5);
    CHECK(std::fabs(got - f * 60) <= 0.5);
  }
}

TEST_CASE("respiration needs one full window") {
  const auto beats = modulated_beats(0.25, 30);
  CHECK_THROWS_AS(derive_respiration(beats), Error);
}

TEST_CASE("beats chain RR intervals within frames") {
  std::vector<SensorFrame> frames(2);
  frames[0].timestamp_ms = 1000;
  frames[0].rr_intervals = {400, 500};
  frames[1].timestamp_ms = 2000;
  frames[1].rr_intervals = {600};
  const auto beats = beats_from_frames(frames);
  REQUIRE(beats.size() == 3);
  for (std::size_t i = 1; i < beats.size(); ++i) CHECK(beats[i].t_ms > beats[i - 1].t_ms);
  CHECK(beats[2].rr_ms == 600);
}

TEST_CASE("nearest-sample resampling does not interpolate") {
  const std::vector<TimedValue> samples = {{0, 1}, {4000, 2}, {5400, 3}, {13000, 4}};
  const auto s = resample_nearest(samples, 0, 5000);
  REQUIRE(s.values.size() >= 3);
  CHECK(s.values[0] == 1);
  CHECK(s.values[1] == 3);  // 5400 is nearer to 5000 than 4000
  CHECK(is_missing(s.values[2]));
  CHECK(s.value_at(5000) == 3);
  CHECK(is_missing(s.value_at(5001)));
}

TEST_CASE("align anchors grids at the baseline marker") {
  ParticipantSpec p;
  p.seed = 5;
  const SessionRecord s = simulate_participant(p);
  const auto a = align(s.frames, s.markers);
  CHECK(a.origin_ms == *baseline_anchor_ms(s.markers));
  CHECK(a.hr.dt_ms == kHrGridMs);
  CHECK(a.tvoc.dt_ms == kSlowGridMs);
  CHECK((a.tvoc.t0_ms - a.origin_ms) % kSlowGridMs == 0);
  CHECK(a.respiration.observed_count() > 0);
  std::vector<Marker> none;
  CHECK_THROWS_AS(align(s.frames, none), Error);
}

#include <doctest.h>

#include <random>

#include "vocstress/coupling.hpp"
#include "vocstress/error.hpp"
#include "vocstress/simulator.hpp"

using namespace vocstress;

namespace {

// AR(1) physiology on the 0.2 Hz grid and a delayed, noisy copy.
std::pair<std::vector<double>, std::vector<double>> planted(std::uint64_t seed, int lag_samples, double sign,
                                                            double noise_sd, std::size_t n = 200) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0, 1);
  std::vector<double> x(n + 40), y(n);
  double a = 0;
  for (double& v : x) v = a = 0.8 * a + z(rng);
  std::vector<double> xs(x.begin() + 40, x.end());
  for (std::size_t i = 0; i < n; ++i) {
    const double src = x[40 + i - static_cast<std::size_t>(lag_samples)];
    y[i] = 100 + sign * 10 * src + noise_sd * z(rng);
  }
  return {xs, y};
}

}  // namespace

TEST_CASE("median split reactor classes") {
  const std::vector<double> d = {2.2, 9.4, 10.6, 26.4};
  const auto c = classify_reactors(d);
  CHECK(*c[0] == Reactivity::Low);
  CHECK(*c[1] == Reactivity::Low);
  CHECK(*c[2] == Reactivity::High);
  CHECK(*c[3] == Reactivity::High);
  const std::vector<double> with_missing = {1, kMissing, 3};
  const auto m = classify_reactors(with_missing);
  CHECK_FALSE(m[1]);
  CHECK(*m[0] == Reactivity::Low);  // at the median
  CHECK_THROWS_AS(classify_reactors(std::vector<double>{1, kMissing}), Error);
}

TEST_CASE("lag scan recovers planted lags") {
  SUBCASE("positive coupling at 40 s") {
    const auto [x, y] = planted(1, 8, 1, 3);
    const auto r = lag_scan(x, y, {200, 7});
    CHECK(std::abs(r.best_lag_s - 40) <= 5);
    CHECK(r.r > 0);
    CHECK(r.p < 0.05);
  }
  SUBCASE("negative coupling at 60 s") {
    const auto [x, y] = planted(2, 12, -1, 3);
    const auto r = lag_scan(x, y, {200, 7});
    CHECK(r.best_lag_s == 60);
    CHECK(r.r < 0);
  }
  SUBCASE("short series") {
    const std::vector<double> x(70, 1.0), y(70, 2.0);
    CHECK_THROWS_AS(lag_scan(x, y, {}), Error);
  }
}

TEST_CASE("lag scan responder criterion is calibrated under independence") {
  int responders = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    std::mt19937_64 rng(500 + s);
    std::normal_distribution<double> z(0, 1);
    std::vector<double> x(200), y(200);
    double a = 0, b = 0;
    for (double& v : x) v = a = 0.6 * a + z(rng);
    for (double& v : y) v = b = 0.6 * b + z(rng);
    if (lag_scan(x, y, {200, s}).p < kAlpha) ++responders;
  }
  CHECK(responders <= 10);
}

TEST_CASE("phase effect detects a planted elevation") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0, 0.05);
  std::vector<CouplingResult> cohort;
  for (int i = 0; i < 12; ++i) {
    CouplingResult r;
    r.participant = "P" + std::to_string(i);
    r.reactor_class = Reactivity::High;
    for (std::size_t k = 0; k < 7; ++k) r.phase_tvoc_norm[k] = z(rng) + (k == 3 ? 0.2 : 0.0);
    cohort.push_back(r);
  }
  const auto e = phase_effect(cohort, Reactivity::High);
  CHECK(e.subjects == 12);
  CHECK(e.anova.df1 == 6);
  CHECK(*e.anova.df2 == 66);
  CHECK(e.contrasts.size() == 21);
  bool found = false;
  for (const auto& c : e.contrasts) {
    if (c.a == Phase::Baseline && c.b == Phase::Arithmetic) {
      found = true;
      CHECK(c.p_adjusted < 0.05);
      CHECK(*c.test.effect_size > 0.8);
      CHECK(c.mean_diff > 0);
    }
  }
  CHECK(found);
}

TEST_CASE("phase effect null calibration") {
  int significant = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    std::mt19937_64 rng(s);
    std::normal_distribution<double> z(0, 0.05);
    std::vector<CouplingResult> cohort(12);
    for (auto& r : cohort) {
      r.reactor_class = Reactivity::Low;
      const double subject = z(rng);
      for (double& v : r.phase_tvoc_norm) v = subject + z(rng);
    }
    if (phase_effect(cohort, Reactivity::Low).anova.p < 0.05) ++significant;
  }
  CHECK(significant <= 10);
}

TEST_CASE("emitter moderation of coupling sign") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z(0, 0.1);
  std::vector<CouplingResult> cohort;
  for (int i = 0; i < 12; ++i) {
    CouplingResult r;
    const bool high = i % 2 == 0;
    r.responder = true;
    r.emitter_class = high ? EmitterClass::High : EmitterClass::Low;
    r.coupling_sign = high ? 1 : -1;
    r.coupling_r = (high ? 0.7 : -0.7) + z(rng);
    r.pairs[0] = LagScanResult{40, r.coupling_r, 0.01};
    r.pairs[2] = LagScanResult{40, -r.coupling_r, 0.01};
    cohort.push_back(r);
  }
  const auto m = moderator_analysis(cohort);
  CHECK(m.responders == 12);
  CHECK(m.positive == 6);
  REQUIRE(m.tests.size() == 2);
  const auto& hr = *m.tests[0].test;
  CHECK(hr.p < 0.05);
  CHECK(*hr.effect_size > 2);
  cohort.resize(3);
  CHECK_THROWS_AS(moderator_analysis(cohort), Error);
}

TEST_CASE("participant analysis on a simulated session") {
  ParticipantSpec p;
  p.seed = 21;
  p.coupling_sign = -1;
  p.coupling_lag_s = 55;
  p.emitter = EmitterClass::Low;
  p.tvoc_target = 0.06;
  const SessionRecord s = simulate_participant(p);
  const auto r = analyze_participant(s, {300, 3});
  REQUIRE(r.pairs[0]);
  CHECK(std::abs(r.pairs[0]->best_lag_s - 55) <= 5);
  CHECK(r.pairs[0]->r < 0);
  CHECK(r.responder);
  CHECK(r.coupling_sign == -1);
  CHECK(*r.emitter_class == EmitterClass::Low);
  CHECK(r.hr_delta > 0);
}

TEST_CASE("cohort analysis is thread-count independent") {
  CohortSpec spec;
  spec.n = 8;
  const Cohort c = simulate_cohort(spec, 3, 2);
  const auto a = analyze_cohort(c.sessions, {100, 5}, 1);
  const auto b = analyze_cohort(c.sessions, {100, 5}, 4);
  REQUIRE(a.results.size() == b.results.size());
  for (std::size_t i = 0; i < a.results.size(); ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      REQUIRE(a.results[i].pairs[k].has_value() == b.results[i].pairs[k].has_value());
      if (!a.results[i].pairs[k]) continue;
      CHECK(a.results[i].pairs[k]->p == b.results[i].pairs[k]->p);
      CHECK(a.results[i].pairs[k]->best_lag_s == b.results[i].pairs[k]->best_lag_s);
    }
    CHECK(a.results[i].reactor_class == b.results[i].reactor_class);
  }
  CHECK(a.responders == b.responders);
}

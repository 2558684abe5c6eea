#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "vocstress/error.hpp"
#include "vocstress/features.hpp"
#include "vocstress/keyvalue.hpp"
#include "vocstress/simulator.hpp"

using namespace vocstress;

namespace {

// Pearson r of hr(t) against tvoc(t + lag) over experiment-phase frames.
double brute_lag_r(const SessionRecord& s, int lag_s) {
  const auto tl = phase_timeline(s.markers, s.frames);
  const std::int64_t start = *tl.start(Phase::Stroop);
  std::map<std::int64_t, double> hr, tvoc;
  for (const auto& f : s.frames) {
    if (f.timestamp_ms < start) continue;
    const std::int64_t sec = f.timestamp_ms / 1000;
    if (!is_missing(f.hr)) hr[sec] = f.hr;
    if (!is_missing(f.tvoc)) tvoc[sec] = f.tvoc;
  }
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0, n = 0;
  for (const auto& [t, x] : hr) {
    const auto it = tvoc.find(t + lag_s);
    if (it == tvoc.end()) continue;
    const double y = it->second;
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
    n += 1;
  }
  const double cov = sxy - sx * sy / n;
  return cov / std::sqrt((sxx - sx * sx / n) * (syy - sy * sy / n));
}

}  // namespace

TEST_CASE("planted coupling peaks at the planted lag") {
  for (int sign : {1, -1}) {
    ParticipantSpec p;
    p.seed = 17;
    p.coupling_sign = sign;
    p.coupling_lag_s = 40;
    p.reactivity = Reactivity::High;
    p.hr_delta = 20;
    const SessionRecord s = simulate_participant(p);
    int best = 0;
    double best_r = 0;
    for (int lag = 0; lag <= 120; ++lag) {
      const double r = brute_lag_r(s, lag);
      if (std::fabs(r) > std::fabs(best_r)) {
        best_r = r;
        best = lag;
      }
    }
    CAPTURE(sign);
    CHECK(std::abs(best - 40) <= 5);
    CHECK(best_r * sign > 0);
  }
}

TEST_CASE("simulated sessions are valid and deterministic") {
  CohortSpec spec;
  spec.n = 6;
  const Cohort a = simulate_cohort(spec, 5, 1);
  const Cohort b = simulate_cohort(spec, 5, 3);
  REQUIRE(a.sessions.size() == 6);
  CHECK(a.sessions == b.sessions);
  for (const auto& s : a.sessions) CHECK(validate_session(s).empty());
  CHECK_FALSE(simulate_cohort(spec, 6, 1).sessions == a.sessions);
  CHECK(truth_csv(a.truth) == truth_csv(b.truth));
}

TEST_CASE("channel dropout follows the availability probability") {
  CohortSpec spec;
  double total = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    for (const auto& p : plan_cohort(spec, seed)) {
      total += p.available[static_cast<std::size_t>(Modality::Gsr)] ? 1 : 0;
    }
  }
  // Binomial(24, 19/25): mean 18.24, sd 2.09; 1000 cohorts give SE 0.066.
  CHECK(std::fabs(total / 1000 - 24.0 * 19 / 25) < 0.25);
}

TEST_CASE("preset signs split emitters 50/50") {
  CohortSpec spec;
  const auto plan = plan_cohort(spec, 42);
  int pos = 0, neg = 0;
  for (const auto& p : plan) {
    (p.coupling_sign > 0 ? pos : neg) += 1;
    CHECK(p.coupling_sign == (p.emitter == EmitterClass::High ? 1 : -1));
  }
  CHECK(pos == 12);
  CHECK(neg == 12);
}

TEST_CASE("cohort spec text round-trip and validation") {
  CohortSpec spec;
  spec.n = 10;
  spec.coupling_gain = 0.5;
  spec.sign_mode = SignMode::Null;
  const CohortSpec back = cohort_spec_from(KeyValues::parse(to_key_values(spec).serialize()));
  CHECK(to_key_values(back).serialize() == to_key_values(spec).serialize());
  CHECK_THROWS_AS(cohort_spec_from(KeyValues::parse("n=abc\n")), Error);
  CohortSpec bad;
  bad.mix = {0.5, 0.5, 0.5, 0.5};
  CHECK_THROWS_AS(validate(bad), Error);
}

TEST_CASE("default cohort tiles into 768 windows") {
  CohortSpec spec;
  const Cohort c = simulate_cohort(spec, 42, 2);
  const Dataset d = build_dataset(c.sessions, 2);
  CHECK(d.size() == 768);
  CHECK(d.count(Label::Stress) == 24 * 14);
  CHECK(d.count(Label::NonStress) == 24 * 18);
  std::map<std::string, std::pair<int, int>> per;
  for (const auto& w : d.windows) (w.label == Label::Stress ? per[w.participant].first : per[w.participant].second)++;
  for (const auto& [id, counts] : per) {
    CHECK(counts.first == 14);
    CHECK(counts.second == 18);
  }
  CHECK(build_dataset(c.sessions, 1) == d);
  CHECK(read_dataset_csv(write_dataset_csv(d)) == d);

  // Sample sd bound std^2 <= (range/2)^2 * n/(n-1), loosest at n = 2.
  for (const auto& w : d.windows) {
    for (std::size_t base : {0u, 5u, 10u, 17u}) {
      const double sd = w.features[base + 1], range = base == 10 ? w.features[14] : w.features[base + 4];
      if (is_missing(sd)) continue;
      CHECK(sd * sd <= (range / 2) * (range / 2) * 2.0 + 1e-9);
    }
  }
  // Unavailable GSR leaves every gsr feature missing.
  for (const auto& s : c.sessions) {
    if (s.available(Modality::Gsr)) continue;
    for (const auto& w : d.windows) {
      if (w.participant != s.meta.id) continue;
      for (std::size_t i : block_features(FeatureBlock::Gsr)) CHECK(is_missing(w.features[i]));
    }
  }
}

TEST_CASE("window features") {
  RawWindow w;
  w.start_ms = 0;
  w.end_ms = 30000;
  w.phase = Phase::Arithmetic;
  for (int i = 0; i < 7; ++i) {
    const std::int64_t t = i * 5000;
    w.tvoc.push_back({t, 100 + 2.0 * static_cast<double>(t) / 1000});
  }
  w.hr = {{0, 70}, {1000, 74}, {2000, 72}};
  BaselineStats base;
  base.tvoc = 100;
  const FeatureWindow f = extract(w, base);
  CHECK(f.label == Label::Stress);
  CHECK(f.features[15] == doctest::Approx(2.0));  // ppb/s
  CHECK(f.features[10] == doctest::Approx(130));
  CHECK(f.features[16] == doctest::Approx(0.30));
  CHECK(f.features[0] == doctest::Approx(72));
  CHECK(f.features[1] == doctest::Approx(2));
  CHECK(f.features[2] == 70);
  CHECK(f.features[3] == 74);
  CHECK(f.features[4] == 4);
  for (std::size_t i : block_features(FeatureBlock::Gsr)) CHECK(is_missing(f.features[i]));

  // Sample order does not matter, slope included.
  RawWindow r = w;
  std::reverse(r.tvoc.begin(), r.tvoc.end());
  std::reverse(r.hr.begin(), r.hr.end());
  CHECK(extract(r, base) == f);

  RawWindow empty;
  CHECK_THROWS_AS(extract(empty, base), Error);
}

TEST_CASE("dataset csv rejects bad fields with offsets") {
  Dataset d;
  FeatureWindow w;
  w.participant = "P01";
  w.end_s = 30;
  w.features.fill(1.5);
  w.features[3] = kMissing;
  d.windows.push_back(w);
  const std::string csv = write_dataset_csv(d);
  CHECK(read_dataset_csv(csv) == d);
  std::string bad = csv;
  bad.replace(bad.rfind("1.5"), 3, "x.5");
  CHECK_THROWS_AS(read_dataset_csv(bad), ParseError);
}

#include "vocstress/coupling.hpp"

#include <algorithm>
#include <cmath>

#include "vocstress/error.hpp"
#include "vocstress/parallel.hpp"
#include "vocstress/preprocess.hpp"

namespace vocstress {

namespace {

constexpr std::size_t kMaxLagSteps = static_cast<std::size_t>(kMaxLagMs / kSlowGridMs);

std::uint64_t id_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

double mean_observed(const std::vector<double>& v) {
  double sum = 0;
  std::size_t n = 0;
  for (double x : v) {
    if (!is_missing(x)) {
      sum += x;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : kMissing;
}

double elevation(double baseline, double x) {
  if (is_missing(baseline) || baseline == 0 || is_missing(x)) return kMissing;
  return norm_increase(baseline, x);
}

}  // namespace

std::string_view pair_name(CouplingPair p) noexcept {
  switch (p) {
    case CouplingPair::HrTvoc: return "HR->TVOC";
    case CouplingPair::GsrTvoc: return "GSR->TVOC";
    case CouplingPair::RrTvoc: return "RR->TVOC";
  }
  return "?";
}

LagScanResult lag_scan(std::span<const double> physio, std::span<const double> tvoc,
                       const CouplingOptions& options) {
  const std::size_t at_max = stats::lagged_pearson(physio, tvoc, kMaxLagSteps).pairs;
  if (at_max < kMinOverlap) {
    throw Error(ErrorCode::InsufficientOverlap,
                "only " + std::to_string(at_max) + " overlapping samples at the 120 s lag (need 60)");
  }
  const auto scan = stats::lag_scan_statistic(physio, tvoc, kMaxLagSteps, {options.n_perm, options.seed, 24});
  return {static_cast<std::int64_t>(scan.best_lag) * kSlowGridMs / 1000, scan.r, scan.p};
}

std::vector<std::optional<Reactivity>> classify_reactors(std::span<const double> deltas) {
  std::vector<double> observed;
  for (double d : deltas) {
    if (!is_missing(d)) observed.push_back(d);
  }
  if (observed.size() < 2) throw Error(ErrorCode::NoHRData, "median split needs >= 2 participants with HR data");
  const double med = stats::median(observed);
  std::vector<std::optional<Reactivity>> out;
  out.reserve(deltas.size());
  for (double d : deltas) {
    if (is_missing(d)) {
      out.push_back(std::nullopt);
    } else {
      out.push_back(d > med ? Reactivity::High : Reactivity::Low);
    }
  }
  return out;
}

CouplingSeries coupling_series(const AlignedStreams& streams, const PhaseTimeline& timeline) {
  CouplingSeries s;
  const auto t3 = timeline.start(Phase::Stroop);
  if (!t3) return s;
  const std::int64_t end = timeline.end(Phase::Recovery3).value_or(timeline.end_ms);
  std::int64_t g = streams.origin_ms;
  if (g < *t3) g += (*t3 - g + kSlowGridMs - 1) / kSlowGridMs * kSlowGridMs;
  s.t0_ms = g;
  const UniformSeries gsr = conductance_series(streams.gsr);
  for (; g < end; g += kSlowGridMs) {
    s.hr.push_back(mean_observed(samples_between(streams.hr, g - kSlowGridMs / 2, g + kSlowGridMs / 2)));
    s.gsr.push_back(gsr.value_at(g));
    s.rr.push_back(streams.respiration.value_at(g));
    s.tvoc.push_back(streams.tvoc.value_at(g));
  }
  return s;
}

CouplingResult analyze_participant(const SessionRecord& session, const CouplingOptions& options) {
  CouplingResult out;
  out.participant = session.meta.id;
  out.phase_tvoc_norm.fill(kMissing);
  const AlignedStreams streams = align(session.frames, session.markers, true);
  const PhaseTimeline timeline = phase_timeline(session.markers, session.frames);
  const BaselineStats baseline = baseline_stats(streams, timeline);
  const CouplingSeries series = coupling_series(streams, timeline);
  const std::uint64_t base_seed = derive_seed(options.seed, id_hash(out.participant));

  const std::array<const std::vector<double>*, 3> physio = {&series.hr, &series.gsr, &series.rr};
  for (CouplingPair p : kAllPairs) {
    const auto i = static_cast<std::size_t>(p);
    try {
      out.pairs[i] = lag_scan(*physio[i], series.tvoc, {options.n_perm, derive_seed(base_seed, i)});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientOverlap) throw;
    }
  }
  double best_p = 2.0;
  for (const auto& r : out.pairs) {
    if (r && r->p < kAlpha) {
      out.responder = true;
      if (r->p < best_p) {
        best_p = r->p;
        out.coupling_sign = r->r > 0 ? 1 : -1;
        out.coupling_r = r->r;
      }
    }
  }

  const auto stress_start = timeline.start(Phase::Stroop);
  const auto stress_end = timeline.end(Phase::Arithmetic);
  if (stress_start && stress_end) {
    const double hr_stress = mean_observed(samples_between(streams.hr, *stress_start, *stress_end));
    if (!is_missing(hr_stress) && !is_missing(baseline.hr)) out.hr_delta = hr_stress - baseline.hr;
    out.stress_tvoc_norm_mean =
        elevation(baseline.tvoc, mean_observed(samples_between(streams.tvoc, *stress_start, *stress_end)));
  }
  if (!is_missing(out.stress_tvoc_norm_mean)) {
    out.emitter_class = out.stress_tvoc_norm_mean > kEmitterThreshold ? EmitterClass::High : EmitterClass::Low;
  }
  // Warmup precedes the baseline anchor, so it is not on the aligned grid.
  for (Phase p : kAllPhases) {
    const auto a = timeline.start(p);
    const auto b = timeline.end(p);
    if (!a || !b) continue;
    std::vector<double> v;
    if (p == Phase::Warmup) {
      for (const auto& f : session.frames) {
        if (f.timestamp_ms >= *a && f.timestamp_ms < *b && !is_missing(f.tvoc)) v.push_back(f.tvoc);
      }
    } else {
      v = samples_between(streams.tvoc, *a, *b);
    }
    out.phase_tvoc_norm[static_cast<std::size_t>(phase_number(p) - 1)] = elevation(baseline.tvoc, mean_observed(v));
  }

  try {
    const auto m = stats::lagged_corr_p(series.hr, series.tvoc, 0, {options.n_perm, derive_seed(base_seed, 7), 24});
    out.momentary_r = m.statistic;
    out.momentary_p = m.p;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientOverlap) throw;
  }
  return out;
}

PhaseEffect phase_effect(const std::vector<CouplingResult>& cohort, Reactivity group) {
  PhaseEffect out;
  out.group = group;
  std::vector<std::vector<double>> data;
  for (const auto& r : cohort) {
    if (r.reactor_class != group) continue;
    if (std::any_of(r.phase_tvoc_norm.begin(), r.phase_tvoc_norm.end(), [](double v) { return is_missing(v); })) {
      continue;
    }
    data.emplace_back(r.phase_tvoc_norm.begin(), r.phase_tvoc_norm.end());
  }
  out.subjects = data.size();
  out.anova = stats::rm_anova(data);
  std::vector<double> raw_p;
  for (std::size_t a = 0; a < 7; ++a) {
    for (std::size_t b = a + 1; b < 7; ++b) {
      std::vector<double> xa, xb;
      for (const auto& row : data) {
        xa.push_back(row[a]);
        xb.push_back(row[b]);
      }
      PostHoc c;
      c.a = kAllPhases[a];
      c.b = kAllPhases[b];
      c.test = stats::paired_t(xb, xa);
      c.mean_diff = stats::mean(xb) - stats::mean(xa);
      raw_p.push_back(c.test.p);
      out.contrasts.push_back(c);
    }
  }
  const auto adj = stats::bonferroni(raw_p, raw_p.size());
  for (std::size_t i = 0; i < adj.size(); ++i) out.contrasts[i].p_adjusted = adj[i];
  return out;
}

ModeratorAnalysis moderator_analysis(const std::vector<CouplingResult>& results) {
  std::vector<const CouplingResult*> high, low;
  ModeratorAnalysis out;
  std::vector<double> abs_r;
  for (const auto& r : results) {
    if (!r.responder) continue;
    ++out.responders;
    (r.coupling_sign > 0 ? out.positive : out.negative) += 1;
    abs_r.push_back(std::fabs(r.coupling_r));
    if (r.emitter_class == EmitterClass::High) high.push_back(&r);
    if (r.emitter_class == EmitterClass::Low) low.push_back(&r);
  }
  if (high.size() < 2 || low.size() < 2) {
    throw Error(ErrorCode::InsufficientResponders,
                "need >= 2 responders per emitter class (High " + std::to_string(high.size()) + ", Low " +
                    std::to_string(low.size()) + ")");
  }
  try {
    out.cv_abs_r = stats::coef_variation(abs_r);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroMean) throw;
  }
  for (CouplingPair p : {CouplingPair::HrTvoc, CouplingPair::RrTvoc}) {
    const auto i = static_cast<std::size_t>(p);
    auto collect = [&](const std::vector<const CouplingResult*>& g) {
      std::vector<double> v;
      for (const auto* r : g) {
        if (r->pairs[i] && !std::isnan(r->pairs[i]->r)) v.push_back(r->pairs[i]->r);
      }
      return v;
    };
    const auto h = collect(high), l = collect(low);
    ModeratorTest t;
    t.pair = p;
    t.high_n = h.size();
    t.low_n = l.size();
    if (h.size() >= 2 && l.size() >= 2) {
      try {
        t.test = stats::independent_t(h, l);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateInput) throw;
      }
    }
    out.tests.push_back(t);
  }
  return out;
}

CouplingReport analyze_cohort(const std::vector<SessionRecord>& sessions, const CouplingOptions& options,
                              std::size_t threads) {
  CouplingReport rep;
  rep.results.resize(sessions.size());
  parallel_for(sessions.size(), threads,
               [&](std::size_t i) { rep.results[i] = analyze_participant(sessions[i], options); });
  std::sort(rep.results.begin(), rep.results.end(),
            [](const CouplingResult& a, const CouplingResult& b) { return a.participant < b.participant; });

  std::vector<double> deltas;
  for (const auto& r : rep.results) deltas.push_back(r.hr_delta);
  try {
    const auto cls = classify_reactors(deltas);
    for (std::size_t i = 0; i < cls.size(); ++i) rep.results[i].reactor_class = cls[i];
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoHRData) throw;
  }

  for (const auto& r : rep.results) {
    for (std::size_t i = 0; i < 3; ++i) {
      if (!r.pairs[i]) continue;
      ++rep.pair_evaluated[i];
      if (r.pairs[i]->p < kAlpha) ++rep.pair_significant[i];
    }
    if (r.responder) ++rep.responders;
  }
  try {
    rep.moderator = moderator_analysis(rep.results);
  } catch (const Error& e) {
    rep.moderator_error = e.what();
  }
  for (Reactivity g : {Reactivity::High, Reactivity::Low}) {
    try {
      rep.phase_effects.push_back(phase_effect(rep.results, g));
    } catch (const Error& e) {
      rep.phase_effect_errors.push_back(std::string(reactivity_name(g)) + ": " + e.what());
    }
  }
  return rep;
}

}  // namespace vocstress

#include "vocstress/reports.hpp"

#include <cmath>

#include <fmt/format.h>

#include "vocstress/error.hpp"
#include "vocstress/parallel.hpp"
#include "vocstress/preprocess.hpp"

namespace vocstress {

namespace {

std::string num(double v, int decimals = 3) {
  if (is_missing(v)) return "NA";
  const double r = std::round(v * std::pow(10.0, decimals)) / std::pow(10.0, decimals);
  return fmt::format("{:.{}f}", r == 0 ? 0.0 : r, decimals);
}

std::string pval(double p) {
  if (is_missing(p)) return "NA";
  if (p < 0.001) return "<.001";
  return num(p, 3);
}

std::string p_clause(double p) { return !is_missing(p) && p < 0.001 ? "p < .001" : "p = " + pval(p); }

SummaryStat summary(const std::vector<double>& v) {
  SummaryStat s;
  if (v.empty()) return s;
  s.mean = stats::mean(v);
  s.sd = v.size() > 1 ? stats::sample_sd(v) : kMissing;
  return s;
}

double mean_of(const std::vector<double>& v) { return v.empty() ? kMissing : stats::mean(v); }

std::string test_line(const stats::TestResult& t) {
  std::string out = fmt::format("t({}) = {}, {}", num(t.df1, 0), num(t.statistic, 2), p_clause(t.p));
  if (t.effect_size) out += fmt::format(", d = {}", num(*t.effect_size, 2));
  return out;
}

std::string rule(std::size_t n) { return std::string(n, '-') + "\n"; }

struct Side {
  std::vector<double> base, stress;
};

}  // namespace

ManipulationCheck manipulation_check(const std::vector<SessionRecord>& sessions, std::size_t threads) {
  ManipulationCheck m;
  m.participants = sessions.size();
  std::vector<Side> hr(sessions.size()), gsr(sessions.size());
  parallel_for(sessions.size(), threads, [&](std::size_t i) {
    const auto& s = sessions[i];
    const AlignedStreams streams = align(s.frames, s.markers, false);
    const PhaseTimeline tl = phase_timeline(s.markers, s.frames);
    const auto b0 = tl.start(Phase::Baseline), b1 = tl.end(Phase::Baseline);
    const auto s0 = tl.start(Phase::Stroop), s1 = tl.end(Phase::Arithmetic);
    if (!b0 || !b1 || !s0 || !s1) return;
    const UniformSeries g = conductance_series(streams.gsr);
    hr[i] = {samples_between(streams.hr, *b0, *b1), samples_between(streams.hr, *s0, *s1)};
    gsr[i] = {samples_between(g, *b0, *b1), samples_between(g, *s0, *s1)};
  });

  auto check = [](const std::vector<Side>& sides, SummaryStat& base, SummaryStat& stress,
                  std::optional<stats::TestResult>& test, std::size_t& n, std::size_t& individual) {
    std::vector<double> mb, ms;
    for (const auto& sd : sides) {
      if (sd.base.size() < 2 || sd.stress.size() < 2) continue;
      mb.push_back(mean_of(sd.base));
      ms.push_back(mean_of(sd.stress));
      try {
        const auto t = stats::independent_t(sd.stress, sd.base);
        if (t.statistic > 0 && t.p < 0.05) ++individual;
      } catch (const Error&) {
      }
    }
    n = mb.size();
    base = summary(mb);
    stress = summary(ms);
    if (n >= 2) {
      try {
        test = stats::paired_t(ms, mb);
      } catch (const Error&) {
      }
    }
  };
  check(hr, m.hr_baseline, m.hr_stress, m.hr_test, m.hr_n, m.hr_individual);
  check(gsr, m.gsr_baseline, m.gsr_stress, m.gsr_test, m.gsr_n, m.gsr_individual);
  if (!is_missing(m.gsr_baseline.mean) && m.gsr_baseline.mean != 0) {
    m.gsr_change_pct = 100.0 * (m.gsr_stress.mean - m.gsr_baseline.mean) / m.gsr_baseline.mean;
  }

  std::array<std::vector<double>, 3> ratings;
  for (const auto& s : sessions) {
    for (const auto& [cp, v] : s.meta.stress_ratings) ratings[static_cast<std::size_t>(cp) - 1].push_back(v);
  }
  for (std::size_t k = 0; k < 3; ++k) {
    m.ratings[k] = summary(ratings[k]);
    m.rating_n[k] = ratings[k].size();
  }
  if (std::all_of(ratings.begin(), ratings.end(), [](const auto& v) { return v.size() >= 2; })) {
    try {
      m.ratings_kw = stats::kruskal_wallis({ratings[0], ratings[1], ratings[2]});
    } catch (const Error&) {
    }
  }
  return m;
}

std::string format_manipulation(const ManipulationCheck& m, const Dataset& data) {
  std::string out = "MANIPULATION CHECK\n";
  out += rule(72);
  out += fmt::format("Participants: {}\n\n", m.participants);
  out += fmt::format("{:<22}{:>12}{:>10}{:>12}{:>10}{:>6}\n", "Measure", "Baseline M", "SD", "Stress M", "SD", "n");
  out += fmt::format("{:<22}{:>12}{:>10}{:>12}{:>10}{:>6}\n", "Heart rate (bpm)", num(m.hr_baseline.mean, 1),
                     num(m.hr_baseline.sd, 1), num(m.hr_stress.mean, 1), num(m.hr_stress.sd, 1), m.hr_n);
  out += fmt::format("{:<22}{:>12}{:>10}{:>12}{:>10}{:>6}\n", "Skin conductance (au)", num(m.gsr_baseline.mean, 0),
                     num(m.gsr_baseline.sd, 0), num(m.gsr_stress.mean, 0), num(m.gsr_stress.sd, 0), m.gsr_n);
  out += "\n";
  out += "Heart rate: " + (m.hr_test ? test_line(*m.hr_test) : std::string("not testable")) + "\n";
  out += fmt::format("  individual increases (p < .05): {}/{}\n", m.hr_individual, m.hr_n);
  out += "Skin conductance: " + (m.gsr_test ? test_line(*m.gsr_test) : std::string("not testable")) + "\n";
  out += fmt::format("  change = {}%, individual increases (p < .05): {}/{}\n", num(m.gsr_change_pct, 0),
                     m.gsr_individual, m.gsr_n);
  out += "\nSelf-reported stress (1-6)\n";
  out += fmt::format("{:<12}{:>8}{:>8}{:>6}\n", "Checkpoint", "M", "SD", "n");
  for (std::size_t k = 0; k < 3; ++k) {
    out += fmt::format("{:<12}{:>8}{:>8}{:>6}\n", checkpoint_name(static_cast<Checkpoint>(k + 1)),
                       num(m.ratings[k].mean, 2), num(m.ratings[k].sd, 2), m.rating_n[k]);
  }
  if (m.ratings_kw) {
    out += fmt::format("Kruskal-Wallis across checkpoints: H({}) = {}, {}\n", num(m.ratings_kw->df1, 0),
                       num(m.ratings_kw->statistic, 2), p_clause(m.ratings_kw->p));
  }
  out += "\nDataset\n";
  out += fmt::format("  windows: {} (Stress {}, NonStress {})\n", data.size(), data.count(Label::Stress),
                     data.count(Label::NonStress));
  return out;
}

std::string format_coupling(const CouplingReport& r) {
  std::string out = "PHYSIOLOGY-VOC COUPLING\n";
  out += rule(96);
  out += fmt::format("{:<6}{:>6}{:>8}{:>9}{:>8}  {:>8}{:>8}{:>8}  {:>8}{:>8}{:>8}  {:>4}{:>5}\n", "ID", "React",
                     "dHR", "Emit", "TVOCst", "HR lag", "r", "p", "GSR lag", "r", "p", "Resp", "Sign");
  for (const auto& c : r.results) {
    auto pair_cols = [&](CouplingPair p) {
      const auto& v = c.pairs[static_cast<std::size_t>(p)];
      if (!v) return fmt::format("  {:>8}{:>8}{:>8}", "NA", "NA", "NA");
      return fmt::format("  {:>8}{:>8}{:>8}", v->best_lag_s, num(v->r, 2), pval(v->p));
    };
    out += fmt::format("{:<6}{:>6}{:>8}{:>9}{:>8}", c.participant,
                       c.reactor_class ? std::string(reactivity_name(*c.reactor_class)) : "NA", num(c.hr_delta, 1),
                       c.emitter_class ? std::string(emitter_name(*c.emitter_class)) : "NA",
                       num(c.stress_tvoc_norm_mean, 2));
    out += pair_cols(CouplingPair::HrTvoc) + pair_cols(CouplingPair::GsrTvoc);
    out += fmt::format("  {:>4}{:>5}\n", c.responder ? "yes" : "no",
                       c.coupling_sign > 0 ? "+" : (c.coupling_sign < 0 ? "-" : "."));
  }
  out += "\nRR->TVOC\n";
  for (const auto& c : r.results) {
    const auto& v = c.pairs[static_cast<std::size_t>(CouplingPair::RrTvoc)];
    out += fmt::format("  {:<6} lag {:>4}  r {:>6}  p {:>6}  momentary HR-TVOC r {:>6} (p {})\n", c.participant,
                       v ? std::to_string(v->best_lag_s) : "NA", v ? num(v->r, 2) : "NA", v ? pval(v->p) : "NA",
                       num(c.momentary_r, 2), pval(c.momentary_p));
  }
  out += "\nResponder rates (uncorrected alpha = .05)\n";
  for (CouplingPair p : kAllPairs) {
    const auto i = static_cast<std::size_t>(p);
    const double rate = r.pair_evaluated[i] ? 100.0 * static_cast<double>(r.pair_significant[i]) /
                                                  static_cast<double>(r.pair_evaluated[i])
                                            : kMissing;
    out += fmt::format("  {:<10} {:>3}/{:<3} ({}%)\n", pair_name(p), r.pair_significant[i], r.pair_evaluated[i],
                       num(rate, 1));
  }
  out += fmt::format("  any pair   {:>3}/{:<3}\n", r.responders, r.results.size());

  out += "\nEmitter moderation\n";
  if (r.moderator) {
    const auto& m = *r.moderator;
    out += fmt::format("  responders {}: positive {}, negative {}\n", m.responders, m.positive, m.negative);
    out += fmt::format("  CV of |r| across responders: {}%\n", num(m.cv_abs_r, 1));
    for (const auto& t : m.tests) {
      out += fmt::format("  {:<10} High n={} vs Low n={}: ", pair_name(t.pair), t.high_n, t.low_n);
      out += t.test ? test_line(*t.test) : std::string("not testable");
      out += "\n";
    }
  } else {
    out += "  not available: " + r.moderator_error + "\n";
  }

  out += "\nPhase effect on TVOC elevation (repeated-measures ANOVA)\n";
  for (const auto& e : r.phase_effects) {
    out += fmt::format("  {} reactors (n = {}): F({}, {}) = {}, {}\n", reactivity_name(e.group), e.subjects,
                       num(e.anova.df1, 0), num(e.anova.df2.value_or(kMissing), 0), num(e.anova.statistic, 2),
                       p_clause(e.anova.p));
    out += fmt::format("    {:<22}{:>9}{:>8}{:>8}{:>9}{:>8}\n", "Contrast", "Mdiff", "t", "p", "p(bonf)", "d");
    for (const auto& c : e.contrasts) {
      out += fmt::format("    {:<22}{:>9}{:>8}{:>8}{:>9}{:>8}\n",
                         fmt::format("P{} vs P{}", phase_number(c.b), phase_number(c.a)),
                         num(c.mean_diff, 3),
                         num(c.test.statistic, 2), pval(c.test.p), pval(c.p_adjusted),
                         num(c.test.effect_size.value_or(kMissing), 2));
    }
  }
  for (const auto& e : r.phase_effect_errors) out += "  not available: " + e + "\n";
  return out;
}

std::string format_classification(const std::vector<EvalReport>& reports) {
  if (reports.empty()) return {};
  const Regime regime = reports.front().regime;
  std::string out = regime == Regime::Loso ? "CLASSIFICATION PERFORMANCE (LEAVE-ONE-SUBJECT-OUT)\n"
                                           : "CLASSIFICATION PERFORMANCE (5-FOLD CROSS-VALIDATION)\n";
  out += rule(102);
  out += fmt::format("{:<12}{:>18}{:>18}{:>18}{:>18}{:>18}\n", "Model", "Accuracy", "Precision", "Recall", "F1",
                     "AUC");
  for (const auto& r : reports) {
    auto cell = [](double m, double s) { return num(m) + " +/- " + num(s); };
    out += fmt::format("{:<12}{:>18}{:>18}{:>18}{:>18}{:>18}\n", model_kind_name(r.kind),
                       cell(r.mean.accuracy, r.sd.accuracy), cell(r.mean.precision, r.sd.precision),
                       cell(r.mean.recall, r.sd.recall), cell(r.mean.f1, r.sd.f1), cell(r.mean.auc, r.sd.auc));
  }
  out += "\nPooled confusion counts\n";
  out += fmt::format("{:<12}{:>6}{:>6}{:>6}{:>6}{:>11}{:>11}{:>9}{:>9}\n", "Model", "TP", "FP", "TN", "FN",
                     "Precision", "Recall", "F1", "AUC");
  for (const auto& r : reports) {
    out += fmt::format("{:<12}{:>6}{:>6}{:>6}{:>6}{:>11}{:>11}{:>9}{:>9}\n", model_kind_name(r.kind), r.pooled.tp,
                       r.pooled.fp, r.pooled.tn, r.pooled.fn, num(r.pooled_metrics.precision),
                       num(r.pooled_metrics.recall), num(r.pooled_metrics.f1), num(r.pooled_metrics.auc));
  }
  if (regime == Regime::Loso) {
    out += "\nPer-participant accuracy range\n";
    for (const auto& r : reports) {
      out += fmt::format("{:<12} min {}  max {}\n", model_kind_name(r.kind), num(r.min_accuracy),
                         num(r.max_accuracy));
    }
  }
  for (const auto& r : reports) {
    if (!r.all_converged) {
      out += fmt::format("note: {} hit the iteration cap in at least one fold\n", model_kind_name(r.kind));
    }
  }
  return out;
}

std::string format_eval(const EvalReport& r) {
  std::string out = format_classification({r});
  out += "\nPer-fold\n";
  out += fmt::format("{:<10}{:>6}{:>10}{:>11}{:>9}{:>9}{:>9}\n", "Fold", "n", "Accuracy", "Precision", "Recall",
                     "F1", "AUC");
  for (const auto& f : r.folds) {
    out += fmt::format("{:<10}{:>6}{:>10}{:>11}{:>9}{:>9}{:>9}\n", f.name, f.test.size(), num(f.metrics.accuracy),
                       num(f.metrics.precision), num(f.metrics.recall), num(f.metrics.f1), num(f.metrics.auc));
  }
  return out;
}

std::string format_attribution(const AttributionReport& r) {
  std::string out = "UNIMODAL VS EARLY FUSION (RANDOM FOREST, ";
  out += r.fusion.regime == Regime::Loso ? "LOSO)\n" : "5-FOLD)\n";
  out += rule(56);
  out += fmt::format("{:<14}{:>10}{:>11}{:>9}{:>9}\n", "Modality", "Features", "Accuracy", "F1", "AUC");
  for (const auto& row : r.fusion.unimodal) {
    out += fmt::format("{:<14}{:>10}{:>11}{:>9}{:>9}\n", row.name, row.n_features, num(row.accuracy), num(row.f1),
                       num(row.auc));
  }
  const auto& f = r.fusion.fusion;
  out += fmt::format("{:<14}{:>10}{:>11}{:>9}{:>9}\n", "Early fusion", f.n_features, num(f.accuracy), num(f.f1),
                     num(f.auc));
  out += fmt::format("Improvement = {}{} accuracy\n", r.fusion.improvement >= 0 ? "+" : "",
                     num(r.fusion.improvement));

  out += "\nFEATURE IMPORTANCE (MEAN |SHAPLEY VALUE|)\n";
  out += rule(56);
  out += fmt::format("Samples: {}, base value: {}\n", r.samples, num(r.base, 4));
  out += fmt::format("{:<10}{:>10}{:>8}  {}\n", "Modality", "Total", "%", "Top features");
  for (ModalityGroup g : {ModalityGroup::Hr, ModalityGroup::Voc, ModalityGroup::Gsr}) {
    const auto gi = static_cast<std::size_t>(g);
    std::vector<std::pair<double, std::size_t>> feats;
    for (std::size_t b = 0; b < 4; ++b) {
      if (modality_of(kAllBlocks[b]) != g) continue;
      for (auto i : r.share.top[b]) feats.emplace_back(r.importance[i], i);
    }
    std::stable_sort(feats.begin(), feats.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::string top;
    for (std::size_t k = 0; k < std::min<std::size_t>(3, feats.size()); ++k) {
      if (k) top += ", ";
      top += fmt::format("{} ({})", feature_names()[feats[k].second], num(feats[k].first, 4));
    }
    out += fmt::format("{:<10}{:>10}{:>8}  {}\n", group_name(g), num(r.share.total[gi], 4),
                       num(r.share.percent[gi], 1), top);
  }
  out += "\nBy sensor block\n";
  for (std::size_t b = 0; b < 4; ++b) {
    out += fmt::format("{:<10}{:>10}{:>8}\n", block_name(kAllBlocks[b]), num(r.share.block_total[b], 4),
                       num(r.share.block_percent[b], 1));
  }
  out += "\nAll features\n";
  for (std::size_t i = 0; i < r.importance.size(); ++i) {
    out += fmt::format("{:<16}{:>10}\n", feature_names()[i], num(r.importance[i], 4));
  }
  return out;
}

}  // namespace vocstress

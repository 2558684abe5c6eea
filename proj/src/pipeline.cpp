#include "vocstress/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "vocstress/archive.hpp"
#include "vocstress/attribution.hpp"
#include "vocstress/coupling.hpp"
#include "vocstress/error.hpp"
#include "vocstress/features.hpp"
#include "vocstress/learn.hpp"
#include "vocstress/parallel.hpp"
#include "vocstress/reports.hpp"

namespace vocstress {

bool Bundle::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

std::string Bundle::checks_text() const {
  std::string out;
  for (const auto& c : checks) {
    out += fmt::format("{} {}", c.passed ? "PASS" : "FAIL", c.name);
    if (!c.detail.empty()) out += "  (" + c.detail + ")";
    out += "\n";
  }
  return out;
}

namespace {

bool in_unit(double v) { return is_missing(v) || (v >= 0.0 && v <= 1.0); }

Check check_archives(const std::vector<SessionRecord>& sessions, std::size_t threads) {
  std::vector<std::string> problems(sessions.size());
  parallel_for(sessions.size(), threads, [&](std::size_t i) {
    const auto v = validate_session(sessions[i]);
    if (!v.empty()) {
      problems[i] = sessions[i].meta.id + ": " + v.front().to_string();
      return;
    }
    if (!(read_archive(write_archive(sessions[i])) == sessions[i])) {
      problems[i] = sessions[i].meta.id + ": archive round-trip differs";
    }
  });
  for (const auto& p : problems) {
    if (!p.empty()) return {"archives valid and round-trip", false, p};
  }
  return {"archives valid and round-trip", true, fmt::format("{} sessions", sessions.size())};
}

Check check_tiling(const std::vector<SessionRecord>& sessions, const Dataset& data) {
  std::size_t expected = 0, expected_stress = 0;
  for (const auto& s : sessions) {
    const auto tl = phase_timeline(s.markers, s.frames);
    for (Phase p : kAllPhases) {
      if (p == Phase::Warmup || !tl.start(p) || !tl.end(p)) continue;
      const auto n = static_cast<std::size_t>((*tl.end(p) - *tl.start(p)) / kWindowMs);
      expected += n;
      if (is_stress_phase(p)) expected_stress += n;
    }
  }
  const bool ok = data.size() == expected && data.count(Label::Stress) == expected_stress;
  return {"window tiling", ok,
          fmt::format("{} windows ({} Stress), expected {} ({})", data.size(), data.count(Label::Stress), expected,
                      expected_stress)};
}

Check check_eval(const std::vector<EvalReport>& reports) {
  for (const auto& r : reports) {
    for (const Metrics* m : {&r.mean, &r.pooled_metrics}) {
      if (!in_unit(m->accuracy) || !in_unit(m->precision) || !in_unit(m->recall) || !in_unit(m->f1) ||
          !in_unit(m->auc)) {
        return {"metrics bounded, pooled F1 identity", false, std::string(model_kind_name(r.kind)) + " out of [0,1]"};
      }
    }
    const auto& p = r.pooled_metrics;
    const double f1 = p.precision + p.recall > 0 ? 2 * p.precision * p.recall / (p.precision + p.recall) : 0.0;
    if (std::fabs(f1 - p.f1) > 1e-12) {
      return {"metrics bounded, pooled F1 identity", false, std::string(model_kind_name(r.kind)) + " F1 mismatch"};
    }
  }
  return {"metrics bounded, pooled F1 identity", true, fmt::format("{} evaluations", reports.size())};
}

Check check_folds(const Dataset& data, std::uint64_t seed) {
  const auto y = data.labels();
  const auto folds = stratified_kfold(y, 5, seed);
  const double share = static_cast<double>(data.count(Label::Stress)) / static_cast<double>(y.size());
  for (std::size_t f = 0; f < 5; ++f) {
    std::size_t n = 0, pos = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (folds[i] == f) {
        ++n;
        pos += static_cast<std::size_t>(y[i]);
      }
    }
    if (std::fabs(static_cast<double>(pos) - share * static_cast<double>(n)) > 1.0) {
      return {"stratified fold balance", false, fmt::format("fold {} has {} Stress of {}", f + 1, pos, n)};
    }
  }
  const auto groups = data.groups();
  const auto loso = loso_split(groups);
  const std::size_t n_loso = *std::max_element(loso.begin(), loso.end()) + 1;
  std::set<std::string> ids(groups.begin(), groups.end());
  if (n_loso != ids.size()) return {"stratified fold balance", false, "LOSO fold count differs from participants"};
  return {"stratified fold balance", true, fmt::format("5 folds, {} LOSO folds", n_loso)};
}

Check check_coupling(const CouplingReport& r) {
  for (const auto& c : r.results) {
    bool any = false;
    for (const auto& p : c.pairs) {
      if (!p) continue;
      if (p->best_lag_s < 0 || p->best_lag_s > 120 || p->best_lag_s % 5 != 0) {
        return {"coupling invariants", false, c.participant + ": lag off grid"};
      }
      any = any || p->p < kAlpha;
    }
    if (any != c.responder) return {"coupling invariants", false, c.participant + ": responder flag"};
    if (c.emitter_class &&
        (*c.emitter_class == EmitterClass::High) != (c.stress_tvoc_norm_mean > kEmitterThreshold)) {
      return {"coupling invariants", false, c.participant + ": emitter class"};
    }
  }
  return {"coupling invariants", true, fmt::format("{} responders of {}", r.responders, r.results.size())};
}

Check check_shap(const Dataset& data, const ModelSpec& spec, std::uint64_t seed, std::size_t threads) {
  const Matrix raw = data.matrix();
  std::vector<double> means(raw.cols, 0.0);
  for (std::size_t c = 0; c < raw.cols; ++c) {
    double s = 0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < raw.rows; ++r) {
      if (!is_missing(raw(r, c))) {
        s += raw(r, c);
        ++n;
      }
    }
    if (n) means[c] = s / static_cast<double>(n);
  }
  const Matrix x = fill_missing(raw, means);
  const auto y = data.labels();
  const Forest forest = train_forest(spec.rf, x, y, seed, threads);
  std::vector<double> residual(x.rows);
  parallel_for(x.rows, threads, [&](std::size_t i) {
    const auto s = tree_shap(forest, x.row(i));
    double total = s.base;
    for (double v : s.phi) total += v;
    residual[i] = std::fabs(total - forest.predict_proba(x.row(i)));
  });
  const double worst = residual.empty() ? 0.0 : *std::max_element(residual.begin(), residual.end());
  return {"shapley local accuracy", worst < 1e-9, fmt::format("max residual {:.2e}", worst)};
}

Check check_attribution(const AttributionReport& a) {
  double sum = 0;
  for (double p : a.share.percent) sum += p;
  if (!(std::fabs(sum - 100.0) <= 0.1)) return {"attribution identities", false, "modality percentages do not sum to 100"};
  double best = 0;
  for (const auto& r : a.fusion.unimodal) best = std::max(best, r.accuracy);
  if (std::fabs(a.fusion.improvement - (a.fusion.fusion.accuracy - best)) > 1e-12) {
    return {"attribution identities", false, "improvement is not fusion minus best unimodal"};
  }
  return {"attribution identities", true, fmt::format("improvement {:+.3f}", a.fusion.improvement)};
}

}  // namespace

Bundle reproduce(const CohortSpec& spec, const ReproduceOptions& options) {
  validate(spec);
  Bundle b;
  const std::size_t th = options.threads;
  const Cohort cohort = simulate_cohort(spec, options.seed, th);
  b.files["truth.csv"] = truth_csv(cohort.truth);
  b.files["cohort_spec.txt"] = to_key_values(spec).serialize();
  if (options.include_archives) {
    for (const auto& s : cohort.sessions) {
      b.files["archives/" + s.meta.id + std::string(kArchiveExtension)] = write_archive(s);
    }
  }
  b.checks.push_back(check_archives(cohort.sessions, th));

  const Dataset data = build_dataset(cohort.sessions, th);
  const std::string csv = write_dataset_csv(data);
  b.files["dataset.csv"] = csv;
  b.checks.push_back(check_tiling(cohort.sessions, data));
  b.checks.push_back({"dataset csv round-trip", read_dataset_csv(csv) == data, ""});

  const ManipulationCheck manip = manipulation_check(cohort.sessions, th);
  b.files["manipulation_report.txt"] = format_manipulation(manip, data);

  const std::uint64_t eval_seed = derive_seed(options.seed, 2);
  std::vector<EvalReport> all;
  for (Regime regime : {Regime::StratifiedKFold, Regime::Loso}) {
    std::vector<EvalReport> reps;
    for (ModelKind k : {ModelKind::RandomForest, ModelKind::SvmRbf, ModelKind::SvmLinear}) {
      ModelSpec m;
      m.kind = k;
      reps.push_back(evaluate(m, data, regime, eval_seed, th));
    }
    b.files[regime == Regime::Loso ? "classification_loso.txt" : "classification_kfold.txt"] =
        format_classification(reps);
    all.insert(all.end(), std::make_move_iterator(reps.begin()), std::make_move_iterator(reps.end()));
  }
  b.checks.push_back(check_eval(all));
  b.checks.push_back(check_folds(data, eval_seed));

  const CouplingReport coupling = analyze_cohort(cohort.sessions, {options.n_perm, derive_seed(options.seed, 3)}, th);
  b.files["coupling_report.txt"] = format_coupling(coupling);
  b.checks.push_back(check_coupling(coupling));

  const std::uint64_t attr_seed = derive_seed(options.seed, 4);
  const ModelSpec rf;
  const AttributionReport attribution = attribute(data, rf, Regime::StratifiedKFold, attr_seed, th);
  b.files["attribution_report.txt"] = format_attribution(attribution);
  b.checks.push_back(check_shap(data, rf, attr_seed, th));
  b.checks.push_back(check_attribution(attribution));

  b.files["checks.txt"] = b.checks_text();
  return b;
}

void write_bundle(const Bundle& bundle, const std::string& dir) {
  namespace fs = std::filesystem;
  for (const auto& [rel, content] : bundle.files) {
    const fs::path p = fs::path(dir) / rel;
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + p.parent_path().string());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
  }
}

}  // namespace vocstress

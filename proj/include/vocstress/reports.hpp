#pragma once

// Fixed-layout text reports.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "vocstress/attribution.hpp"
#include "vocstress/coupling.hpp"
#include "vocstress/features.hpp"
#include "vocstress/learn.hpp"
#include "vocstress/stats.hpp"

namespace vocstress {

// Baseline vs stress (Phases 3-4) physiology and self-reports.
struct ManipulationCheck {
  std::size_t participants = 0;
  SummaryStat hr_baseline, hr_stress;
  std::optional<stats::TestResult> hr_test;  // paired, stress minus baseline
  std::size_t hr_n = 0;
  std::size_t hr_individual = 0;  // individual increase with p < .05
  SummaryStat gsr_baseline, gsr_stress;  // conductance
  std::optional<stats::TestResult> gsr_test;
  double gsr_change_pct = kMissing;
  std::size_t gsr_n = 0;
  std::size_t gsr_individual = 0;
  std::array<SummaryStat, 3> ratings;
  std::array<std::size_t, 3> rating_n{};
  std::optional<stats::TestResult> ratings_kw;  // across T1..T3
};

ManipulationCheck manipulation_check(const std::vector<SessionRecord>& sessions, std::size_t threads = 1);

std::string format_manipulation(const ManipulationCheck& m, const Dataset& data);
std::string format_coupling(const CouplingReport& r);
// One table over models for a single regime.
std::string format_classification(const std::vector<EvalReport>& reports);
std::string format_eval(const EvalReport& r);
std::string format_attribution(const AttributionReport& r);

}  // namespace vocstress

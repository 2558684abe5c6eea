#pragma once

// Shapley attribution for the random forest (path-dependent TreeSHAP) and the
// unimodal vs early-fusion comparison.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vocstress/features.hpp"
#include "vocstress/learn.hpp"

namespace vocstress {

struct ShapValues {
  double base = 0.0;         // expected forest output under the node covers
  std::vector<double> phi;   // one per feature
};

// base + sum(phi) equals Forest::predict_proba(x). Throws DimensionMismatch.
ShapValues tree_shap(const Forest& forest, std::span<const double> x);
// Single tree, not averaged.
ShapValues tree_shap(const Tree& tree, std::span<const double> x, std::size_t n_features);

// Mean |phi| per feature over the rows of x (complete, no missing cells).
std::vector<double> global_importance(const Forest& forest, const Matrix& x, std::size_t threads = 1);

enum class ModalityGroup : std::uint8_t { Hr, Voc, Gsr };
std::string_view group_name(ModalityGroup m) noexcept;
ModalityGroup modality_of(FeatureBlock b) noexcept;  // Tvoc and Gas320 are Voc

struct ModalityShare {
  std::array<double, 3> total{};     // Hr, Voc, Gsr
  std::array<double, 3> percent{};   // sums to 100; missing when all importance is 0
  std::array<double, 4> block_total{};
  std::array<double, 4> block_percent{};
  std::array<std::vector<std::size_t>, 4> top;  // up to 3 feature indices per block, by importance
};
ModalityShare modality_share(std::span<const double> importance);

struct FusionRow {
  std::string name;  // block name or "Fusion"
  std::size_t n_features = 0;
  double accuracy = 0.0;
  double f1 = 0.0;
  double auc = kMissing;
};

struct FusionTable {
  Regime regime = Regime::StratifiedKFold;
  std::vector<FusionRow> unimodal;  // one per block with any observed value
  FusionRow fusion;                 // all observed blocks concatenated
  double improvement = 0.0;         // fusion accuracy minus best unimodal accuracy
};

// RF per block and on the concatenation; every row uses the same seed.
FusionTable fusion_table(const Dataset& data, const ModelSpec& spec, Regime regime, std::uint64_t seed,
                         std::size_t threads = 1);

struct AttributionReport {
  std::size_t samples = 0;
  double base = 0.0;
  std::vector<double> importance;  // kFeatureCount entries
  ModalityShare share;
  FusionTable fusion;
};

// Fits the forest on the whole (mean-imputed) dataset, attributes every row,
// and runs the fusion comparison.
AttributionReport attribute(const Dataset& data, const ModelSpec& spec, Regime regime, std::uint64_t seed,
                            std::size_t threads = 1);

}  // namespace vocstress

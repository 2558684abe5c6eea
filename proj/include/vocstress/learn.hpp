#pragma once

// Random forest and SVM classifiers, cross-validation regimes and metrics.
// Labels are 0/1 with 1 = Stress.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vocstress/features.hpp"
#include "vocstress/preprocess.hpp"

namespace vocstress {

enum class ModelKind { RandomForest, SvmRbf, SvmLinear };
std::string_view model_kind_name(ModelKind k) noexcept;  // rf, svm-rbf, svm-linear
std::optional<ModelKind> model_kind_from_name(std::string_view s) noexcept;

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t max_depth = 10;
  std::size_t features_per_split = 0;  // 0 = ceil(sqrt(d))
  bool bootstrap = true;
  std::size_t min_samples_split = 2;
};

struct SvmParams {
  double c = 1.0;
  std::optional<double> gamma;  // nullopt = "scale": 1 / (d * Var(X_train))
  double tol = 1e-3;
  std::size_t max_iter = 0;     // 0 = 100 * n
};

struct ModelSpec {
  ModelKind kind = ModelKind::RandomForest;
  ForestParams rf;
  SvmParams svm;
};

// Throws InvalidSpec on non-positive hyperparameters.
void validate(const ModelSpec& spec);

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;  // x <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf vote: 1 = Stress
  double cover = 0.0;  // training weight reaching the node
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double predict(std::span<const double> x) const;
  std::size_t depth() const;
};

struct Forest {
  std::size_t n_features = 0;
  std::vector<Tree> trees;
  double predict_proba(std::span<const double> x) const;
};

struct Svm {
  bool linear = false;
  std::size_t n_features = 0;
  double gamma = 0.0;
  std::vector<std::vector<double>> support;
  std::vector<double> coef;  // alpha_i * y_i per support vector
  std::vector<double> w;     // linear kernel only
  double bias = 0.0;
  double platt_a = 0.0;  // P(Stress) = 1 / (1 + exp(a * f + b))
  double platt_b = 0.0;
  bool converged = true;
  std::size_t iterations = 0;

  double decision(std::span<const double> x) const;
  double predict_proba(std::span<const double> x) const;
};

struct Model {
  ModelKind kind = ModelKind::RandomForest;
  std::variant<Forest, Svm> impl;

  std::size_t n_features() const;
};

// Deterministic given the seed for any thread count. Throws
// SingleClassTraining (SVM with one class), DegenerateInput (missing cells).
Model train(const ModelSpec& spec, const Matrix& x, std::span<const int> y, std::uint64_t seed,
            std::size_t threads = 1);
Forest train_forest(const ForestParams& params, const Matrix& x, std::span<const int> y, std::uint64_t seed,
                    std::size_t threads = 1);
Svm train_svm(const SvmParams& params, bool linear, const Matrix& x, std::span<const int> y);

// P(Stress) per row; throws DimensionMismatch.
std::vector<double> predict_proba(const Model& model, const Matrix& x);
// Hard labels: RF vote share > 0.5, SVM decision value > 0.
std::vector<int> predict_labels(const Model& model, const Matrix& x);

std::string write_model(const Model& model);
// Throws ParseError.
Model read_model(std::string_view text);

// --- metrics ---------------------------------------------------------------

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = kMissing;  // missing when the set has one class
};

// Mann-Whitney probability with ties counted 1/2; missing with one class.
double auc(std::span<const int> y, std::span<const double> scores);
Confusion confusion(std::span<const int> y, std::span<const int> predicted);
Metrics metrics_from(const Confusion& c);  // auc left missing

// --- cross-validation -------------------------------------------------------

enum class Regime { StratifiedKFold, Loso };
std::string_view regime_name(Regime r) noexcept;  // kfold, loso
std::optional<Regime> regime_from_name(std::string_view s) noexcept;

// Fold id per sample: per-class seeded shuffle, then round-robin with one
// counter running across classes. Throws TooFewPerClass.
std::vector<std::size_t> stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed);

// Fold id per sample, one fold per participant in sorted id order.
// Throws SingleParticipant.
std::vector<std::size_t> loso_split(std::span<const std::string> groups);

struct FoldOutcome {
  std::string name;
  std::vector<std::size_t> test;
  std::vector<double> scores;
  std::vector<int> predicted;
  Confusion confusion;
  Metrics metrics;
  Model model;
};

// Fits imputation means and the model on the training rows only, then scores
// the test rows. Training-column means fall back to 0 when a column has no
// observed training value.
FoldOutcome train_fold(const ModelSpec& spec, const Matrix& x, std::span<const int> y,
                       std::span<const std::size_t> train, std::span<const std::size_t> test, std::uint64_t seed,
                       std::size_t threads = 1);

struct EvalReport {
  ModelKind kind = ModelKind::RandomForest;
  Regime regime = Regime::StratifiedKFold;
  std::vector<FoldOutcome> folds;
  Metrics mean;
  Metrics sd;
  Confusion pooled;
  Metrics pooled_metrics;  // from pooled confusion counts
  double min_accuracy = 0.0;
  double max_accuracy = 0.0;
  bool all_converged = true;
};

EvalReport evaluate(const ModelSpec& spec, const Dataset& data, Regime regime, std::uint64_t seed,
                    std::size_t threads = 1);
// Same, on an explicit matrix, labels and groups.
EvalReport evaluate(const ModelSpec& spec, const Matrix& x, std::span<const int> y,
                    std::span<const std::string> groups, Regime regime, std::uint64_t seed, std::size_t threads = 1);

}  // namespace vocstress

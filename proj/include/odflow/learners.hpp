#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace odflow {

// Row-major numeric training table.
struct Dataset {
  std::vector<double> features;  // n_rows x n_features
  std::vector<double> targets;   // n_rows
  std::vector<std::string> feature_names;

  int n_rows() const { return static_cast<int>(targets.size()); }
  int n_features() const { return static_cast<int>(feature_names.size()); }
  const double* row(int i) const {
    return features.data() + static_cast<std::size_t>(i) * feature_names.size();
  }
  double at(int row_index, int feature) const {
    return features[static_cast<std::size_t>(row_index) * feature_names.size() +
                    static_cast<std::size_t>(feature)];
  }
  // Throws DomainError / ShapeError on non-finite entries or bad shape.
  void validate() const;
};

enum class ModelKind { linear, forest, gbdt };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 8;
  int min_leaf = 5;
  // 0 means "use ceil(sqrt(n_features))".
  int feature_subsample = 0;
  bool bootstrap = true;
};

struct GbdtConfig {
  int n_rounds = 200;
  double learning_rate = 0.05;
  int max_depth = 3;
  int min_leaf = 5;
};

struct LearnerConfig {
  ForestConfig forest;
  GbdtConfig gbdt;
  std::uint64_t seed = 0;

  void validate() const;  // counts >= 1, learning_rate in (0,1]
};

// Binary regression tree stored as a flat node array (index 0 = root).
// Internal nodes route on feature/threshold; leaves carry the value.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  double predict(const double* row) const;
};

// Immutable fitted model. One struct covers all three kinds; unused parts
// stay empty.
struct RegressionModel {
  ModelKind kind = ModelKind::linear;
  std::vector<std::string> feature_names;

  std::vector<double> coefficients;  // linear: [intercept, b_1..b_f]

  std::vector<DecisionTree> trees;   // forest / gbdt
  double base_score = 0.0;           // gbdt: initial prediction
  double learning_rate = 0.0;        // gbdt: shrinkage applied per tree
  std::vector<double> importance;    // tree kinds: normalized impurity reduction

  // Affect-probability models clamp raw predictions into [0,1].
  bool clamp_unit_interval = false;

  int n_features() const { return static_cast<int>(feature_names.size()); }
};

// Fit one model. Deterministic given (dataset, config.seed).
//  linear: OLS with intercept via normal equations; on a singular design the
//          solve is retried with ridge jitter 1e-8.
//  forest: bagged CART on squared error, per-node feature subsampling.
//  gbdt:   additive depth-limited trees on residuals (shrinkage
//          learning_rate), initialized at the target mean.
RegressionModel fit(ModelKind kind, const Dataset& dataset, const LearnerConfig& config);

// Predict for a row-major matrix with model.n_features() columns.
std::vector<double> predict(const RegressionModel& model, const std::vector<double>& features,
                            int n_rows);
double predict_one(const RegressionModel& model, const std::vector<double>& row);

// Normalized total squared-error reduction attributed to each feature.
// Tree-based models only.
std::vector<double> feature_importance(const RegressionModel& model);

// Mean prediction over dataset rows with `feature` forced to each grid value.
std::vector<double> partial_dependence(const RegressionModel& model, const Dataset& dataset,
                                       int feature, const std::vector<double>& grid);

// Regress the placebo p-value on effect features. Targets must lie in [0,1);
// the returned model clamps predictions to [0,1]. The affectedness score of a
// cell is 1 − predicted p-value.
RegressionModel fit_affect_probability(ModelKind kind, const Dataset& dataset,
                                       const LearnerConfig& config);

// JSON model persistence (self-describing, version field model_fmt = 1).
void save_model(const RegressionModel& model, const std::filesystem::path& path);
RegressionModel load_model(const std::filesystem::path& path);

// Training-table export: feature-name header columns plus `target`.
void save_dataset_csv(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset_csv(const std::filesystem::path& path);

}  // namespace odflow

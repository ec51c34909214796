#include "odflow/learners.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "odflow/csv.hpp"
#include "odflow/errors.hpp"
#include "odflow/rng.hpp"

namespace odflow {

namespace {

constexpr std::uint64_t kForestTreeSalt = 0x666f7265ULL;  // per-tree stream salt

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;  // squared-error reduction, absolute
  bool found() const { return feature >= 0; }
};

// Exhaustive best split over the given candidate features (must be sorted
// ascending so that the tie rule "lowest feature index, then lowest
// threshold" falls out of strict-improvement comparisons).
SplitChoice best_split(const Dataset& data, const std::vector<int>& rows,
                       const std::vector<int>& candidate_features, int min_leaf,
                       std::vector<std::pair<double, double>>& scratch) {
  SplitChoice best;
  const int n = static_cast<int>(rows.size());
  double total_sum = 0.0;
  for (const int r : rows) total_sum += data.targets[static_cast<std::size_t>(r)];
  const double parent_score = total_sum * total_sum / n;

  for (const int f : candidate_features) {
    scratch.clear();
    scratch.reserve(static_cast<std::size_t>(n));
    for (const int r : rows) {
      scratch.emplace_back(data.at(r, f), data.targets[static_cast<std::size_t>(r)]);
    }
    std::sort(scratch.begin(), scratch.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double left_sum = 0.0;
    for (int i = 1; i < n; ++i) {
      left_sum += scratch[static_cast<std::size_t>(i - 1)].second;
      const double lo = scratch[static_cast<std::size_t>(i - 1)].first;
      const double hi = scratch[static_cast<std::size_t>(i)].first;
      if (!(lo < hi)) continue;  // need distinct values to place a threshold
      if (i < min_leaf || n - i < min_leaf) continue;
      const double right_sum = total_sum - left_sum;
      // Maximizing sum_l^2/n_l + sum_r^2/n_r is the same as maximizing the
      // squared-error reduction; subtracting the parent score yields the gain.
      const double score = left_sum * left_sum / i + right_sum * right_sum / (n - i);
      const double gain = score - parent_score;
      if (gain > best.gain) {
        best.feature = f;
        best.threshold = lo + 0.5 * (hi - lo);
        best.gain = gain;
      }
    }
  }
  return best;
}

struct TreeBuilder {
  const Dataset& data;
  int max_depth;
  int min_leaf;
  int feature_subsample;  // 0 = all features
  Rng* rng;               // only consulted when feature_subsample > 0
  DecisionTree tree;
  std::vector<double> importance;  // absolute gain per feature
  std::vector<std::pair<double, double>> scratch;
  std::vector<int> all_features;

  TreeBuilder(const Dataset& d, int depth, int leaf, int subsample, Rng* r)
      : data(d), max_depth(depth), min_leaf(leaf), feature_subsample(subsample), rng(r) {
    importance.assign(static_cast<std::size_t>(d.n_features()), 0.0);
    all_features.resize(static_cast<std::size_t>(d.n_features()));
    std::iota(all_features.begin(), all_features.end(), 0);
  }

  std::vector<int> pick_features() {
    if (feature_subsample <= 0 || feature_subsample >= data.n_features()) return all_features;
    // Partial Fisher-Yates over a fresh index array, then sorted so the split
    // search scans candidates in ascending feature order (tie rule).
    std::vector<int> pool = all_features;
    const int m = feature_subsample;
    for (int i = 0; i < m; ++i) {
      const int j = i + rng->uniform_int(static_cast<int>(pool.size()) - i);
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(m));
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  int build(std::vector<int>&& rows, int depth) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double sum = 0.0;
    for (const int r : rows) sum += data.targets[static_cast<std::size_t>(r)];
    const double mean = sum / static_cast<double>(rows.size());

    SplitChoice split;
    if (depth < max_depth && static_cast<int>(rows.size()) >= 2 * min_leaf) {
      const std::vector<int> candidates = pick_features();
      split = best_split(data, rows, candidates, min_leaf, scratch);
    }
    if (!split.found() || !(split.gain > 0.0)) {
      tree.nodes[static_cast<std::size_t>(node_id)].value = mean;
      return node_id;
    }
    importance[static_cast<std::size_t>(split.feature)] += split.gain;

    std::vector<int> left_rows;
    std::vector<int> right_rows;
    left_rows.reserve(rows.size());
    right_rows.reserve(rows.size());
    for (const int r : rows) {
      if (data.at(r, split.feature) <= split.threshold) {
        left_rows.push_back(r);
      } else {
        right_rows.push_back(r);
      }
    }
    rows.clear();
    rows.shrink_to_fit();

    const int left_id = build(std::move(left_rows), depth + 1);
    const int right_id = build(std::move(right_rows), depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left_id;
    node.right = right_id;
    return node_id;
  }
};

void normalize_importance(std::vector<double>& importance) {
  double total = 0.0;
  for (const double v : importance) total += v;
  if (total > 0.0) {
    for (double& v : importance) v /= total;
  } else if (!importance.empty()) {
    // Degenerate fit (no split ever taken): spread uniformly so the
    // "sums to one" contract still holds.
    const double u = 1.0 / static_cast<double>(importance.size());
    for (double& v : importance) v = u;
  }
}

RegressionModel fit_linear(const Dataset& data) {
  if (data.n_rows() < 2) {
    throw DomainError("linear fit needs at least 2 rows, got " + std::to_string(data.n_rows()));
  }
  const int n = data.n_rows();
  const int f = data.n_features();
  Eigen::MatrixXd design(n, f + 1);
  Eigen::VectorXd target(n);
  for (int i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (int j = 0; j < f; ++j) design(i, j + 1) = data.at(i, j);
    target(i) = data.targets[static_cast<std::size_t>(i)];
  }
  const Eigen::MatrixXd gram = design.transpose() * design;
  const Eigen::VectorXd moment = design.transpose() * target;
  Eigen::VectorXd beta = gram.ldlt().solve(moment);
  const double residual = (gram * beta - moment).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, moment.cwiseAbs().maxCoeff());
  if (!beta.allFinite() || residual > 1e-6 * scale) {
    // Singular (collinear) design: retry with a small ridge on the diagonal.
    Eigen::MatrixXd ridged = gram;
    ridged.diagonal().array() += 1e-8;
    beta = ridged.ldlt().solve(moment);
    if (!beta.allFinite()) {
      throw SingularDesignError("design matrix rank-deficient; ridge jitter did not rescue the solve");
    }
  }
  RegressionModel model;
  model.kind = ModelKind::linear;
  model.feature_names = data.feature_names;
  model.coefficients.assign(beta.data(), beta.data() + beta.size());
  return model;
}

RegressionModel fit_forest(const Dataset& data, const LearnerConfig& config) {
  const ForestConfig& fc = config.forest;
  if (data.n_rows() < fc.min_leaf) {
    throw DomainError("forest fit needs at least min_leaf rows, got " +
                      std::to_string(data.n_rows()));
  }
  const int n = data.n_rows();
  const int subsample = fc.feature_subsample > 0
                            ? std::min(fc.feature_subsample, data.n_features())
                            : static_cast<int>(std::ceil(std::sqrt(data.n_features())));
  RegressionModel model;
  model.kind = ModelKind::forest;
  model.feature_names = data.feature_names;
  model.trees.resize(static_cast<std::size_t>(fc.n_trees));
  std::vector<std::vector<double>> tree_importance(static_cast<std::size_t>(fc.n_trees));

  for (int t = 0; t < fc.n_trees; ++t) {
    Rng rng(mix_seed(config.seed, {kForestTreeSalt, static_cast<std::uint64_t>(t)}));
    std::vector<int> rows(static_cast<std::size_t>(n));
    if (fc.bootstrap) {
      for (int i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = rng.uniform_int(n);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    TreeBuilder builder(data, fc.max_depth, fc.min_leaf, subsample, &rng);
    builder.build(std::move(rows), 0);
    model.trees[static_cast<std::size_t>(t)] = std::move(builder.tree);
    tree_importance[static_cast<std::size_t>(t)] = std::move(builder.importance);
  }

  model.importance.assign(static_cast<std::size_t>(data.n_features()), 0.0);
  for (const auto& imp : tree_importance) {
    for (std::size_t j = 0; j < imp.size(); ++j) model.importance[j] += imp[j];
  }
  normalize_importance(model.importance);
  return model;
}

RegressionModel fit_gbdt(const Dataset& data, const LearnerConfig& config) {
  const GbdtConfig& gc = config.gbdt;
  if (data.n_rows() < gc.min_leaf) {
    throw DomainError("gbdt fit needs at least min_leaf rows, got " +
                      std::to_string(data.n_rows()));
  }
  const int n = data.n_rows();
  RegressionModel model;
  model.kind = ModelKind::gbdt;
  model.feature_names = data.feature_names;
  model.learning_rate = gc.learning_rate;
  double mean = 0.0;
  for (const double y : data.targets) mean += y;
  mean /= static_cast<double>(n);
  model.base_score = mean;

  // Residual boosting: each round fits a small tree to the current residuals
  // and the ensemble moves a learning_rate step toward it.
  Dataset residual_view;
  residual_view.feature_names = data.feature_names;
  residual_view.features = data.features;
  residual_view.targets.assign(data.targets.begin(), data.targets.end());
  for (double& y : residual_view.targets) y -= mean;

  model.importance.assign(static_cast<std::size_t>(data.n_features()), 0.0);
  model.trees.reserve(static_cast<std::size_t>(gc.n_rounds));
  std::vector<int> root_rows(static_cast<std::size_t>(n));
  for (int round = 0; round < gc.n_rounds; ++round) {
    TreeBuilder builder(residual_view, gc.max_depth, gc.min_leaf, 0, nullptr);
    std::iota(root_rows.begin(), root_rows.end(), 0);
    std::vector<int> rows = root_rows;
    builder.build(std::move(rows), 0);
    for (int i = 0; i < n; ++i) {
      residual_view.targets[static_cast<std::size_t>(i)] -=
          gc.learning_rate * builder.tree.predict(residual_view.row(i));
    }
    for (std::size_t j = 0; j < builder.importance.size(); ++j) {
      model.importance[j] += builder.importance[j];
    }
    model.trees.push_back(std::move(builder.tree));
  }
  normalize_importance(model.importance);
  return model;
}

double raw_predict(const RegressionModel& model, const double* row) {
  switch (model.kind) {
    case ModelKind::linear: {
      double y = model.coefficients[0];
      for (int j = 0; j < model.n_features(); ++j) {
        y += model.coefficients[static_cast<std::size_t>(j) + 1] * row[j];
      }
      return y;
    }
    case ModelKind::forest: {
      double total = 0.0;
      for (const DecisionTree& tree : model.trees) total += tree.predict(row);
      return total / static_cast<double>(model.trees.size());
    }
    case ModelKind::gbdt: {
      double y = model.base_score;
      for (const DecisionTree& tree : model.trees) y += model.learning_rate * tree.predict(row);
      return y;
    }
  }
  throw DomainError("unknown model kind");
}

nlohmann::ordered_json tree_to_json(const DecisionTree& tree) {
  // Parallel arrays built standalone: inserting into an ordered_json object
  // invalidates references to its existing members.
  auto feature = nlohmann::ordered_json::array();
  auto threshold = nlohmann::ordered_json::array();
  auto left = nlohmann::ordered_json::array();
  auto right = nlohmann::ordered_json::array();
  auto value = nlohmann::ordered_json::array();
  for (const TreeNode& node : tree.nodes) {
    feature.push_back(node.feature);
    threshold.push_back(node.threshold);
    left.push_back(node.left);
    right.push_back(node.right);
    value.push_back(node.value);
  }
  nlohmann::ordered_json j;
  j["feature"] = std::move(feature);
  j["threshold"] = std::move(threshold);
  j["left"] = std::move(left);
  j["right"] = std::move(right);
  j["value"] = std::move(value);
  return j;
}

DecisionTree tree_from_json(const nlohmann::json& j) {
  DecisionTree tree;
  const auto& feature = j.at("feature");
  const auto& threshold = j.at("threshold");
  const auto& left = j.at("left");
  const auto& right = j.at("right");
  const auto& value = j.at("value");
  const std::size_t n = feature.size();
  if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n) {
    throw ParseError("tree arrays have mismatched lengths");
  }
  tree.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    tree.nodes[i].feature = feature[i].get<int>();
    tree.nodes[i].threshold = threshold[i].get<double>();
    tree.nodes[i].left = left[i].get<int>();
    tree.nodes[i].right = right[i].get<int>();
    tree.nodes[i].value = value[i].get<double>();
  }
  return tree;
}

}  // namespace

void Dataset::validate() const {
  if (n_rows() < 1) throw DomainError("dataset must contain at least one row");
  if (n_features() < 1) throw DomainError("dataset must contain at least one feature");
  if (features.size() !=
      static_cast<std::size_t>(n_rows()) * static_cast<std::size_t>(n_features())) {
    throw ShapeError("feature matrix size does not match n_rows x n_features");
  }
  for (const double v : features) {
    if (!std::isfinite(v)) throw DomainError("dataset features must be finite");
  }
  for (const double y : targets) {
    if (!std::isfinite(y)) throw DomainError("dataset targets must be finite");
  }
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear: return "linear";
    case ModelKind::forest: return "forest";
    case ModelKind::gbdt: return "gbdt";
  }
  throw DomainError("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "linear") return ModelKind::linear;
  if (name == "forest") return ModelKind::forest;
  if (name == "gbdt") return ModelKind::gbdt;
  throw ConfigError("unknown model kind '" + name + "' (expected linear, forest, or gbdt)");
}

void LearnerConfig::validate() const {
  if (forest.n_trees < 1 || forest.max_depth < 1 || forest.min_leaf < 1) {
    throw ConfigError("forest counts must all be >= 1");
  }
  if (forest.feature_subsample < 0) throw ConfigError("feature_subsample must be >= 0");
  if (gbdt.n_rounds < 1 || gbdt.max_depth < 1 || gbdt.min_leaf < 1) {
    throw ConfigError("gbdt counts must all be >= 1");
  }
  if (!(gbdt.learning_rate > 0.0) || gbdt.learning_rate > 1.0) {
    throw ConfigError("learning_rate must lie in (0,1]");
  }
}

double DecisionTree::predict(const double* row) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const TreeNode& cur = nodes[static_cast<std::size_t>(node)];
    node = row[cur.feature] <= cur.threshold ? cur.left : cur.right;
  }
  return nodes[static_cast<std::size_t>(node)].value;
}

RegressionModel fit(ModelKind kind, const Dataset& dataset, const LearnerConfig& config) {
  dataset.validate();
  config.validate();
  switch (kind) {
    case ModelKind::linear: return fit_linear(dataset);
    case ModelKind::forest: return fit_forest(dataset, config);
    case ModelKind::gbdt: return fit_gbdt(dataset, config);
  }
  throw DomainError("unknown model kind");
}

std::vector<double> predict(const RegressionModel& model, const std::vector<double>& features,
                            int n_rows) {
  const std::size_t f = static_cast<std::size_t>(model.n_features());
  if (features.size() != f * static_cast<std::size_t>(n_rows)) {
    throw ShapeError("prediction matrix must have " + std::to_string(model.n_features()) +
                     " columns");
  }
  std::vector<double> out(static_cast<std::size_t>(n_rows));
  for (int i = 0; i < n_rows; ++i) {
    double y = raw_predict(model, features.data() + static_cast<std::size_t>(i) * f);
    if (model.clamp_unit_interval) y = std::clamp(y, 0.0, 1.0);
    out[static_cast<std::size_t>(i)] = y;
  }
  return out;
}

double predict_one(const RegressionModel& model, const std::vector<double>& row) {
  return predict(model, row, 1)[0];
}

std::vector<double> feature_importance(const RegressionModel& model) {
  if (model.kind == ModelKind::linear) {
    throw DomainError("feature importance is defined for tree-based models only");
  }
  return model.importance;
}

std::vector<double> partial_dependence(const RegressionModel& model, const Dataset& dataset,
                                       int feature, const std::vector<double>& grid) {
  if (feature < 0 || feature >= model.n_features()) {
    throw LookupError("feature index out of range: " + std::to_string(feature));
  }
  if (grid.empty()) throw DomainError("partial dependence needs a nonempty grid");
  if (dataset.n_features() != model.n_features()) {
    throw ShapeError("dataset feature count does not match the model");
  }
  dataset.validate();
  std::vector<double> curve;
  curve.reserve(grid.size());
  std::vector<double> row(static_cast<std::size_t>(model.n_features()));
  for (const double g : grid) {
    double total = 0.0;
    for (int i = 0; i < dataset.n_rows(); ++i) {
      const double* src = dataset.row(i);
      std::copy(src, src + model.n_features(), row.begin());
      row[static_cast<std::size_t>(feature)] = g;
      double y = raw_predict(model, row.data());
      if (model.clamp_unit_interval) y = std::clamp(y, 0.0, 1.0);
      total += y;
    }
    curve.push_back(total / static_cast<double>(dataset.n_rows()));
  }
  return curve;
}

RegressionModel fit_affect_probability(ModelKind kind, const Dataset& dataset,
                                       const LearnerConfig& config) {
  for (const double p : dataset.targets) {
    if (!(p >= 0.0) || !(p < 1.0)) {
      throw DomainError("affect-probability targets must be p-values in [0,1)");
    }
  }
  RegressionModel model = fit(kind, dataset, config);
  model.clamp_unit_interval = true;
  return model;
}

void save_model(const RegressionModel& model, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["model_fmt"] = 1;
  j["kind"] = to_string(model.kind);
  j["feature_names"] = model.feature_names;
  j["clamp_unit_interval"] = model.clamp_unit_interval;
  switch (model.kind) {
    case ModelKind::linear:
      j["coefficients"] = model.coefficients;
      break;
    case ModelKind::forest: {
      j["importance"] = model.importance;
      auto trees = nlohmann::ordered_json::array();
      for (const DecisionTree& tree : model.trees) trees.push_back(tree_to_json(tree));
      j["trees"] = std::move(trees);
      break;
    }
    case ModelKind::gbdt: {
      j["base_score"] = model.base_score;
      j["learning_rate"] = model.learning_rate;
      j["importance"] = model.importance;
      auto trees = nlohmann::ordered_json::array();
      for (const DecisionTree& tree : model.trees) trees.push_back(tree_to_json(tree));
      j["trees"] = std::move(trees);
      break;
    }
  }
  csv::write_text_atomic(path, j.dump(2) + "\n");
}

RegressionModel load_model(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(csv::read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": invalid JSON: " + e.what());
  }
  try {
    if (j.at("model_fmt").get<int>() != 1) {
      throw ParseError(path.string() + ": unsupported model_fmt");
    }
    RegressionModel model;
    model.kind = model_kind_from_string(j.at("kind").get<std::string>());
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    model.clamp_unit_interval = j.at("clamp_unit_interval").get<bool>();
    switch (model.kind) {
      case ModelKind::linear:
        model.coefficients = j.at("coefficients").get<std::vector<double>>();
        if (model.coefficients.size() != model.feature_names.size() + 1) {
          throw ParseError(path.string() + ": coefficient count mismatch");
        }
        break;
      case ModelKind::gbdt:
        model.base_score = j.at("base_score").get<double>();
        model.learning_rate = j.at("learning_rate").get<double>();
        [[fallthrough]];
      case ModelKind::forest:
        model.importance = j.at("importance").get<std::vector<double>>();
        for (const auto& tree : j.at("trees")) model.trees.push_back(tree_from_json(tree));
        if (model.trees.empty()) throw ParseError(path.string() + ": model has no trees");
        break;
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": bad model document: " + e.what());
  }
}

void save_dataset_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::string out;
  std::vector<std::string> header = dataset.feature_names;
  header.push_back("target");
  csv::append_row(out, header);
  std::vector<std::string> cells(header.size());
  for (int i = 0; i < dataset.n_rows(); ++i) {
    for (int jf = 0; jf < dataset.n_features(); ++jf) {
      cells[static_cast<std::size_t>(jf)] = csv::format_double(dataset.at(i, jf));
    }
    cells.back() = csv::format_double(dataset.targets[static_cast<std::size_t>(i)]);
    csv::append_row(out, cells);
  }
  csv::write_text_atomic(path, out);
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read_table(path);
  if (table.header.size() < 2 || table.header.back() != "target") {
    throw ParseError(path.string() + ": expected feature columns followed by 'target'");
  }
  Dataset data;
  data.feature_names.assign(table.header.begin(), table.header.end() - 1);
  data.features.reserve(table.rows.size() * data.feature_names.size());
  data.targets.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string where = table.where(r);
    for (std::size_t c = 0; c + 1 < table.header.size(); ++c) {
      data.features.push_back(csv::parse_double(table.rows[r][c], where));
    }
    data.targets.push_back(csv::parse_double(table.rows[r].back(), where));
  }
  data.validate();
  return data;
}

}  // namespace odflow

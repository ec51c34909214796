#include "odflow/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include <json.hpp>

#include "odflow/csv.hpp"
#include "odflow/effect_features.hpp"
#include "odflow/errors.hpp"
#include "odflow/rng.hpp"

namespace odflow {

namespace {

constexpr std::uint64_t kNormalModelSalt = 0x6e6f726d;
constexpr std::uint64_t kEffectModelSalt = 0x65666374;
constexpr std::uint64_t kProbModelSalt = 0x70726f62;

// Spec'd per-cell gate with inclusive extremes: p2 ≥ 1 adjusts everything,
// p2 ≤ 0 adjusts nothing (placebo p-values can be exactly 0 and clamped
// predictions exactly 1, so a bare `p̂ ≤ p2` would leak at the endpoints).
bool gate_fires(double predicted_p, double p2) {
  if (p2 >= 1.0) return true;
  if (p2 <= 0.0) return false;
  return predicted_p <= p2;
}

std::set<int> incident_day_set(const std::vector<IncidentRecord>& incidents) {
  std::set<int> days;
  for (const IncidentRecord& inc : incidents) days.insert(inc.day_index);
  return days;
}

LearnerConfig seeded(const LearnerConfig& base, std::uint64_t pipeline_seed,
                     std::uint64_t salt) {
  LearnerConfig out = base;
  out.seed = mix_seed(pipeline_seed, {salt});
  return out;
}

void require_schema(const RegressionModel& model, const std::vector<std::string>& expected,
                    const std::string& role) {
  if (model.feature_names != expected) {
    throw ShapeError(role + " model feature schema does not match (expected " +
                     std::to_string(expected.size()) + " canonical columns, got " +
                     std::to_string(model.feature_names.size()) + ")");
  }
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(p1 > 0.0) || p1 > 1.0) throw ConfigError("pipeline: p1 must lie in (0,1]");
  if (p2 < 0.0 || p2 > 1.0) throw ConfigError("pipeline: p2 must lie in [0,1]");
  if (!(alpha > 0.0) || alpha >= 1.0) throw ConfigError("pipeline: alpha must lie in (0,1)");
  if (t_pre < 1) throw ConfigError("pipeline: t_pre must be >= 1");
  learner_config.validate();
}

const std::vector<std::string>& normal_feature_schema() {
  static const std::vector<std::string> names = {"lag1_flow",  "lag2_flow", "interval_index",
                                                 "is_weekend", "is_sunny",  "od_mean_flow"};
  return names;
}

std::vector<double> od_mean_flows(const ODPanel& panel,
                                  const std::vector<IncidentRecord>& incidents) {
  const std::set<int> incident_days = incident_day_set(incidents);
  std::vector<int> clean_days;
  for (int day = 0; day < panel.n_days(); ++day)
    if (!incident_days.count(day)) clean_days.push_back(day);
  if (clean_days.empty())
    throw DomainError("od_mean_flows: every panel day carries an incident");

  std::vector<double> means(static_cast<std::size_t>(panel.n_ods()), 0.0);
  const double denom = static_cast<double>(clean_days.size()) * panel.n_intervals();
  for (int od = 0; od < panel.n_ods(); ++od) {
    double sum = 0.0;
    for (int day : clean_days)
      for (int k = 0; k < panel.n_intervals(); ++k) sum += panel.flow(od, day, k);
    means[static_cast<std::size_t>(od)] = sum / denom;
  }
  return means;
}

RegressionModel train_normal(const ODPanel& panel, const std::vector<IncidentRecord>& incidents,
                             ModelKind kind, const PipelineConfig& config) {
  config.validate();
  const std::set<int> incident_days = incident_day_set(incidents);
  std::vector<int> clean_days;
  for (int day = 0; day < panel.n_days(); ++day)
    if (!incident_days.count(day)) clean_days.push_back(day);
  if (static_cast<int>(clean_days.size()) < 7) {
    throw InsufficientHistoryError("normal model needs >= 7 non-incident days, panel has " +
                                   std::to_string(clean_days.size()));
  }
  const std::vector<double> means = od_mean_flows(panel, incidents);

  Dataset table;
  table.feature_names = normal_feature_schema();
  for (int od = 0; od < panel.n_ods(); ++od) {
    for (int day : clean_days) {
      const DayMeta& meta = panel.day(day);
      for (int k = 2; k < panel.n_intervals(); ++k) {
        table.features.insert(table.features.end(),
                              {panel.flow(od, day, k - 1), panel.flow(od, day, k - 2),
                               static_cast<double>(k), meta.is_weekend ? 1.0 : 0.0,
                               meta.is_sunny ? 1.0 : 0.0, means[static_cast<std::size_t>(od)]});
        table.targets.push_back(panel.flow(od, day, k));
      }
    }
  }
  if (table.targets.empty())
    throw EmptyTrainingSetError("normal model has no training cells (need intervals >= 3)");
  return fit(kind, table, seeded(config.learner_config, config.seed, kNormalModelSalt));
}

EffectStage train_effect_stage(const std::vector<CausalEffectEstimate>& estimates,
                               const std::vector<IncidentRecord>& incidents,
                               const StationGraph& graph, const ODPanel& panel,
                               const PipelineConfig& config) {
  config.validate();
  const TrainingTables tables =
      build_training_table(estimates, incidents, graph, panel, config.p1);
  EffectStage stage;
  stage.effect = fit(config.effect_kind, tables.effect_table,
                     seeded(config.learner_config, config.seed, kEffectModelSalt));
  stage.prob = fit_affect_probability(config.prob_kind, tables.p_table,
                                      seeded(config.learner_config, config.seed, kProbModelSalt));
  return stage;
}

double optimal_threshold(const TheoremInputs& inputs) {
  inputs.validate();
  const double denominator = inputs.e_f2 + inputs.e_fhat2 - inputs.e_sq_err;
  if (denominator <= 1e-12) {
    throw DegenerateThresholdError(
        "threshold denominator Ef^2 + Efhat^2 - E(fhat-f)^2 = " + std::to_string(denominator) +
        " is not positive; adjustment model carries no signal");
  }
  return std::clamp(inputs.e_fhat2 / denominator, 0.0, 1.0);
}

PredictionReport predict_with_incident(const ODPanel& panel,
                                       const std::vector<IncidentRecord>& incidents,
                                       const IncidentRecord& incident, const StationGraph& graph,
                                       const RegressionModel& normal_model,
                                       const RegressionModel& effect_model,
                                       const RegressionModel& prob_model,
                                       const PipelineConfig& config,
                                       const PlaceboConfig& placebo) {
  config.validate();
  placebo.validate();
  incident.validate();
  if (incident.day_index < 0 || incident.day_index >= panel.n_days())
    throw LookupError("predict_with_incident: incident day outside the panel");
  require_schema(normal_model, normal_feature_schema(), "normal");
  require_schema(effect_model, EffectFeatureVector::schema(), "effect");
  require_schema(prob_model, EffectFeatureVector::schema(), "affect-probability");

  const auto window = incident_interval_window(panel, incident, placebo);
  if (!window) {
    throw DomainError("incident " + incident.incident_id +
                      " has an empty test window after clipping to the panel");
  }
  const std::vector<double> means = od_mean_flows(panel, incidents);
  const int day = incident.day_index;
  const DayMeta& meta = panel.day(day);
  const auto [lo, hi] = *window;

  PredictionReport report;
  std::vector<double> chain(static_cast<std::size_t>(panel.n_intervals()), 0.0);
  for (int od = 0; od < panel.n_ods(); ++od) {
    for (int k = lo; k <= hi; ++k) {
      // Lags before the window come from the observed panel; inside it, from
      // the model's own (unadjusted) forecasts — the incident-day observations
      // there are exactly what deployment would not have.
      const double lag1 = (k - 1 >= lo) ? chain[static_cast<std::size_t>(k - 1)]
                                        : panel.flow(od, day, k - 1);
      const double lag2 = (k - 2 >= lo) ? chain[static_cast<std::size_t>(k - 2)]
                                        : panel.flow(od, day, k - 2);
      const double raw = predict_one(
          normal_model, {lag1, lag2, static_cast<double>(k), meta.is_weekend ? 1.0 : 0.0,
                         meta.is_sunny ? 1.0 : 0.0, means[static_cast<std::size_t>(od)]});
      const double normal = std::max(0.0, raw);
      chain[static_cast<std::size_t>(k)] = normal;

      PredictionRow row;
      row.od = od;
      row.interval = k;
      row.normal = normal;
      row.truth = panel.flow(od, day, k);
      bool reachable = true;
      EffectFeatureVector features;
      try {
        features = build_features(incident, graph, panel.od_pair(od), day, k, normal);
      } catch (const UnreachableError&) {
        reachable = false;  // no features, no gate: keep the normal forecast
      }
      if (reachable) {
        const double predicted_p = predict_one(prob_model, features.values);
        if (gate_fires(predicted_p, config.p2)) {
          row.adjusted = true;
          const double effect = predict_one(effect_model, features.values);
          row.adjustment = (normal + effect < 0.0) ? -normal : effect;
          ++report.n_adjusted;
        }
      }
      row.final_flow = row.normal + row.adjustment;
      report.rows.push_back(row);
    }
  }
  return report;
}

void mark_influenced(std::vector<PredictionRow>& rows,
                     const std::vector<CausalEffectEstimate>& estimates, int day, double alpha) {
  std::set<std::pair<int, int>> significant;
  for (const CausalEffectEstimate& e : estimates)
    if (e.day == day && is_significant(e, alpha)) significant.emplace(e.od, e.interval);
  for (PredictionRow& row : rows)
    row.influenced = significant.count({row.od, row.interval}) > 0;
}

Metrics compute_metrics(const std::vector<double>& predicted, const std::vector<double>& truth) {
  if (predicted.size() != truth.size())
    throw ShapeError("compute_metrics: prediction/truth length mismatch");
  Metrics m;
  double abs_sum = 0.0, sq_sum = 0.0, ape_sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 2.0) continue;  // tiny observed flows are excluded
    const double err = predicted[i] - truth[i];
    abs_sum += std::abs(err);
    sq_sum += err * err;
    ape_sum += std::abs(err) / truth[i];
    ++m.n_rows;
  }
  if (m.n_rows == 0)
    throw EmptyEvaluationError("no rows with truth >= 2 to evaluate");
  m.mae = abs_sum / m.n_rows;
  m.rmse = std::sqrt(sq_sum / m.n_rows);
  m.mape = ape_sum / m.n_rows;
  return m;
}

EvaluationResult evaluate(const std::vector<PredictionRow>& rows) {
  std::vector<double> predicted, truth, predicted_inf, truth_inf;
  for (const PredictionRow& row : rows) {
    predicted.push_back(row.final_flow);
    truth.push_back(row.truth);
    if (row.influenced) {
      predicted_inf.push_back(row.final_flow);
      truth_inf.push_back(row.truth);
    }
  }
  EvaluationResult result;
  result.all = compute_metrics(predicted, truth);
  if (!truth_inf.empty()) {
    try {
      result.influenced = compute_metrics(predicted_inf, truth_inf);
    } catch (const EmptyEvaluationError&) {
      // influenced rows exist but none clears the truth >= 2 bar
    }
  }
  return result;
}

std::vector<SweepRow> sweep_thresholds(const ODPanel& panel,
                                       const std::vector<IncidentRecord>& incidents,
                                       const IncidentRecord& test_incident,
                                       const StationGraph& graph,
                                       const std::vector<CausalEffectEstimate>& train_estimates,
                                       const std::vector<CausalEffectEstimate>& test_estimates,
                                       const std::vector<double>& grid_p1,
                                       const std::vector<double>& grid_p2,
                                       const PipelineConfig& config, const PlaceboConfig& placebo) {
  config.validate();
  if (grid_p1.empty() || grid_p2.empty())
    throw DomainError("sweep_thresholds: both threshold grids must be nonempty");
  constexpr double kHeldThreshold = 0.05;

  const RegressionModel normal_model =
      train_normal(panel, incidents, config.normal_kind, config);

  const auto run_point = [&](const RegressionModel* effect_model,
                             const RegressionModel* prob_model, double p1, double p2) {
    SweepRow row;
    row.p1 = p1;
    row.p2 = p2;
    std::vector<PredictionRow> rows;
    if (effect_model == nullptr) {
      // Adjustment stage untrainable at this grid point: ship the bare
      // normal forecast (the gate never fires).
      PipelineConfig point = config;
      point.p1 = kHeldThreshold;
      point.p2 = 0.0;
      RegressionModel stub;  // never consulted when p2 = 0, but must type-check
      stub.kind = ModelKind::linear;
      stub.feature_names = EffectFeatureVector::schema();
      stub.coefficients.assign(EffectFeatureVector::schema().size() + 1, 0.0);
      rows = predict_with_incident(panel, incidents, test_incident, graph, normal_model, stub,
                                   stub, point, placebo)
                 .rows;
    } else {
      PipelineConfig point = config;
      point.p1 = std::clamp(p1, 1e-9, 1.0);  // p1 only documents the point here
      point.p2 = p2;
      rows = predict_with_incident(panel, incidents, test_incident, graph, normal_model,
                                   *effect_model, *prob_model, point, placebo)
                 .rows;
    }
    mark_influenced(rows, test_estimates, test_incident.day_index, config.alpha);
    const EvaluationResult metrics = evaluate(rows);
    row.mae_all = metrics.all.mae;
    row.rmse_all = metrics.all.rmse;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.mae_influenced = metrics.influenced ? metrics.influenced->mae : nan;
    row.rmse_influenced = metrics.influenced ? metrics.influenced->rmse : nan;
    return row;
  };

  const auto fit_stage = [&](double p1) -> std::optional<EffectStage> {
    if (p1 <= 0.0) return std::nullopt;
    PipelineConfig point = config;
    point.p1 = p1;
    try {
      return train_effect_stage(train_estimates, incidents, graph, panel, point);
    } catch (const EmptyTrainingSetError&) {
      return std::nullopt;
    }
  };

  std::vector<SweepRow> out;
  for (double p1 : grid_p1) {
    const auto stage = fit_stage(p1);
    out.push_back(stage ? run_point(&stage->effect, &stage->prob, p1, kHeldThreshold)
                        : run_point(nullptr, nullptr, p1, kHeldThreshold));
  }
  const auto held_stage = fit_stage(kHeldThreshold);
  for (double p2 : grid_p2) {
    out.push_back(held_stage ? run_point(&held_stage->effect, &held_stage->prob, kHeldThreshold, p2)
                             : run_point(nullptr, nullptr, kHeldThreshold, p2));
  }
  return out;
}

void save_predictions(const PredictionReport& report, const std::filesystem::path& path) {
  std::string text = "od_id,interval_index,normal,adjustment,final,truth\n";
  for (const PredictionRow& row : report.rows) {
    csv::append_row(text, {csv::format_int(row.od), csv::format_int(row.interval),
                           csv::format_double(row.normal), csv::format_double(row.adjustment),
                           csv::format_double(row.final_flow), csv::format_double(row.truth)});
  }
  csv::write_text_atomic(path, text);
}

std::vector<PredictionRow> load_predictions(const std::filesystem::path& path) {
  const csv::Table table = csv::read_table(path);
  csv::require_header(table,
                      {"od_id", "interval_index", "normal", "adjustment", "final", "truth"});
  std::vector<PredictionRow> rows;
  rows.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const std::vector<std::string>& cells = table.rows[i];
    const std::string where = table.where(i);
    PredictionRow row;
    row.od = static_cast<int>(csv::parse_int(cells[0], where + " od_id"));
    row.interval = static_cast<int>(csv::parse_int(cells[1], where + " interval_index"));
    row.normal = csv::parse_double(cells[2], where + " normal");
    row.adjustment = csv::parse_double(cells[3], where + " adjustment");
    row.final_flow = csv::parse_double(cells[4], where + " final");
    row.truth = csv::parse_double(cells[5], where + " truth");
    row.adjusted = row.adjustment != 0.0;
    rows.push_back(row);
  }
  return rows;
}

void save_sweep(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::string text = "p1,p2,mae_all,mae_influenced,rmse_all,rmse_influenced\n";
  for (const SweepRow& row : rows) {
    csv::append_row(text, {csv::format_double(row.p1), csv::format_double(row.p2),
                           csv::format_double(row.mae_all), csv::format_double(row.mae_influenced),
                           csv::format_double(row.rmse_all),
                           csv::format_double(row.rmse_influenced)});
  }
  csv::write_text_atomic(path, text);
}

void save_metrics(const EvaluationResult& result, int n_adjusted,
                  const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["all"] = {{"mae", result.all.mae}, {"rmse", result.all.rmse}, {"mape", result.all.mape}};
  if (result.influenced) {
    doc["influenced"] = {{"mae", result.influenced->mae},
                         {"rmse", result.influenced->rmse},
                         {"mape", result.influenced->mape}};
  } else {
    doc["influenced"] = nullptr;
  }
  doc["n_adjusted"] = n_adjusted;
  csv::write_text_atomic(path, doc.dump(2) + "\n");
}

}  // namespace odflow

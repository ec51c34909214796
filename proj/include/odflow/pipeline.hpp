#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "odflow/learners.hpp"
#include "odflow/network.hpp"
#include "odflow/panel.hpp"
#include "odflow/placebo.hpp"
#include "odflow/theory.hpp"

namespace odflow {

// Knobs for the two-stage forecaster.
//   p1 — significance threshold selecting effect-model training samples;
//   p2 — deployment gate on the predicted p-value (score threshold P = 1 − p2);
//   alpha — significance level defining the "influenced" cell set in metrics.
struct PipelineConfig {
  double p1 = 0.05;
  double p2 = 0.1;
  double alpha = 0.05;
  ModelKind normal_kind = ModelKind::forest;
  ModelKind effect_kind = ModelKind::forest;
  ModelKind prob_kind = ModelKind::forest;
  LearnerConfig learner_config;
  int t_pre = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

// One forecast cell on the incident day. `final_flow == normal + adjustment`
// holds bit-exactly; `adjustment` is the effect-model output for gated cells
// (replaced by −normal when flooring at 0 binds) and exactly 0 otherwise.
struct PredictionRow {
  int od = 0;
  int interval = 0;
  double normal = 0.0;
  double adjustment = 0.0;
  double final_flow = 0.0;
  double truth = 0.0;
  bool adjusted = false;    // the p̂ ≤ p2 gate fired
  bool influenced = false;  // placebo-significant at alpha (evaluation metadata)
};

struct Metrics {
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;
  int n_rows = 0;  // eligible rows (truth ≥ 2)
};

struct EvaluationResult {
  Metrics all;
  std::optional<Metrics> influenced;  // absent when no influenced row is eligible
};

struct PredictionReport {
  std::vector<PredictionRow> rows;  // (od asc, interval asc) over the incident window
  int n_adjusted = 0;
};

// Feature order of the normal-conditions model (a serialization contract):
// lag1_flow, lag2_flow, interval_index, is_weekend, is_sunny, od_mean_flow.
const std::vector<std::string>& normal_feature_schema();

// Per-OD mean flow over all intervals of every non-incident day.
std::vector<double> od_mean_flows(const ODPanel& panel,
                                  const std::vector<IncidentRecord>& incidents);

// Fit the normal-conditions forecaster on every (od, non-incident day,
// interval ≥ 2) cell. Requires at least 7 non-incident days.
RegressionModel train_normal(const ODPanel& panel, const std::vector<IncidentRecord>& incidents,
                             ModelKind kind, const PipelineConfig& config);

// Second stage of the forecaster: the effect regressor (trained on
// significance-filtered estimates, threshold config.p1) and the
// affect-probability model (trained on every estimate).
struct EffectStage {
  RegressionModel effect;
  RegressionModel prob;
};

EffectStage train_effect_stage(const std::vector<CausalEffectEstimate>& estimates,
                               const std::vector<IncidentRecord>& incidents,
                               const StationGraph& graph, const ODPanel& panel,
                               const PipelineConfig& config);

// Optimal affectedness-score threshold P = Ef̂² / (Ef² + Ef̂² − E(f̂−f)²),
// clamped to [0,1]. Throws DegenerateThresholdError when the denominator is
// ≤ 1e-12 (e.g. for the all-zero adjustment model).
double optimal_threshold(const TheoremInputs& inputs);

// Two-stage forecast for every (od, interval) in the incident's test window:
// normal prediction (recursive lags inside the window, observed flows before
// it, floored at 0), then an effect-model adjustment gated on the predicted
// p-value. `incidents` must be the same list train_normal saw so the OD mean
// feature matches. Truth is copied from the panel's incident-day flows.
PredictionReport predict_with_incident(const ODPanel& panel,
                                       const std::vector<IncidentRecord>& incidents,
                                       const IncidentRecord& incident, const StationGraph& graph,
                                       const RegressionModel& normal_model,
                                       const RegressionModel& effect_model,
                                       const RegressionModel& prob_model,
                                       const PipelineConfig& config,
                                       const PlaceboConfig& placebo);

// Flag rows whose cell is placebo-significant (p ≤ alpha) among `estimates`
// on the given day.
void mark_influenced(std::vector<PredictionRow>& rows,
                     const std::vector<CausalEffectEstimate>& estimates, int day, double alpha);

// MAE / RMSE / MAPE over rows with truth ≥ 2 (others are excluded, matching
// the tiny-flow filter). Throws EmptyEvaluationError when nothing qualifies.
Metrics compute_metrics(const std::vector<double>& predicted, const std::vector<double>& truth);

// Metrics for all rows plus, when any qualify, the influenced subset.
EvaluationResult evaluate(const std::vector<PredictionRow>& rows);

struct SweepRow {
  double p1 = 0.0;
  double p2 = 0.0;
  double mae_all = 0.0;
  double mae_influenced = 0.0;  // NaN when no influenced row is eligible
  double rmse_all = 0.0;
  double rmse_influenced = 0.0;
};

// Threshold sweep on one held-out incident: first the p1 grid with p2 fixed
// at 0.05 (effect/prob models retrained per point from the cached placebo
// estimates; a point whose training table is empty — including p1 ≤ 0 —
// falls back to the unadjusted normal forecast), then the p2 grid with
// p1 fixed at 0.05 (models reused, only the gate moves).
std::vector<SweepRow> sweep_thresholds(const ODPanel& panel,
                                       const std::vector<IncidentRecord>& incidents,
                                       const IncidentRecord& test_incident,
                                       const StationGraph& graph,
                                       const std::vector<CausalEffectEstimate>& train_estimates,
                                       const std::vector<CausalEffectEstimate>& test_estimates,
                                       const std::vector<double>& grid_p1,
                                       const std::vector<double>& grid_p2,
                                       const PipelineConfig& config, const PlaceboConfig& placebo);

// predictions CSV: od_id,interval_index,normal,adjustment,final,truth
void save_predictions(const PredictionReport& report, const std::filesystem::path& path);
std::vector<PredictionRow> load_predictions(const std::filesystem::path& path);

// sweep CSV: p1,p2,mae_all,mae_influenced,rmse_all,rmse_influenced
void save_sweep(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

// metrics JSON: {all:{mae,rmse,mape}, influenced:{...}, n_adjusted}
void save_metrics(const EvaluationResult& result, int n_adjusted,
                  const std::filesystem::path& path);

}  // namespace odflow

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <vector>

#include <json.hpp>

#include "odflow/effect_features.hpp"
#include "odflow/errors.hpp"
#include "odflow/pipeline.hpp"
#include "odflow/placebo.hpp"
#include "odflow/simgen.hpp"
#include "temp_dir.hpp"

using namespace odflow;
using odflow::testing::TempDir;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Hand panel: value_fn(od, day, interval) fills the grid, weekdays sunny.
ODPanel make_panel(int n_ods, int n_days, int n_intervals,
                   double (*value_fn)(int, int, int)) {
  std::vector<ODPair> pairs;
  for (int i = 0; i < n_ods; ++i)
    pairs.push_back(ODPair{"S" + std::to_string(i), "S" + std::to_string(i + 1)});
  std::vector<DayMeta> days(static_cast<std::size_t>(n_days));
  for (int d = 0; d < n_days; ++d) {
    days[static_cast<std::size_t>(d)] = DayMeta{d, d % 7 >= 5, true, "2024-03-04"};
  }
  std::vector<double> flows;
  for (int od = 0; od < n_ods; ++od)
    for (int d = 0; d < n_days; ++d)
      for (int k = 0; k < n_intervals; ++k) flows.push_back(value_fn(od, d, k));
  return ODPanel(std::move(pairs), std::move(days), n_intervals, std::move(flows));
}

// A hand-written linear model: prediction = intercept + coefs · features.
RegressionModel linear_stub(const std::vector<std::string>& schema, double intercept,
                            std::vector<std::pair<int, double>> slopes = {}) {
  RegressionModel m;
  m.kind = ModelKind::linear;
  m.feature_names = schema;
  m.coefficients.assign(schema.size() + 1, 0.0);
  m.coefficients[0] = intercept;
  for (const auto& [idx, b] : slopes) m.coefficients[static_cast<std::size_t>(idx) + 1] = b;
  return m;
}

}  // namespace

TEST_CASE("metrics hand oracle and small-truth exclusion") {
  const Metrics m = compute_metrics({2.0, 4.0}, {4.0, 2.0});
  CHECK(m.mae == 2.0);
  CHECK(m.rmse == 2.0);
  CHECK(m.mape == 0.75);
  CHECK(m.n_rows == 2);

  // Rows with observed flow below 2 are dropped before averaging.
  const Metrics with_tiny = compute_metrics({2.0, 4.0, 100.0, 7.0}, {4.0, 2.0, 1.5, 0.0});
  CHECK(with_tiny.mae == 2.0);
  CHECK(with_tiny.rmse == 2.0);
  CHECK(with_tiny.mape == 0.75);
  CHECK(with_tiny.n_rows == 2);

  CHECK_THROWS_AS(compute_metrics({1.0, 2.0}, {1.9, 0.0}), EmptyEvaluationError);
  CHECK_THROWS_AS(compute_metrics({1.0}, {1.0, 2.0}), ShapeError);
}

TEST_CASE("metrics are invariant under row permutation") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> flow(0.0, 50.0);
  std::vector<double> predicted(40), truth(40);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    predicted[i] = flow(rng);
    truth[i] = flow(rng);
  }
  const Metrics base = compute_metrics(predicted, truth);
  std::vector<std::size_t> order(truth.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> predicted2, truth2;
  for (std::size_t i : order) {
    predicted2.push_back(predicted[i]);
    truth2.push_back(truth[i]);
  }
  const Metrics shuffled = compute_metrics(predicted2, truth2);
  CHECK(shuffled.n_rows == base.n_rows);
  CHECK(shuffled.mae == doctest::Approx(base.mae).epsilon(1e-12));
  CHECK(shuffled.rmse == doctest::Approx(base.rmse).epsilon(1e-12));
  CHECK(shuffled.mape == doctest::Approx(base.mape).epsilon(1e-12));
}

TEST_CASE("optimal threshold: perfect model 1/2, half-scale model 1/4") {
  // Perfect adjustment model: same second moment, zero error.
  CHECK(optimal_threshold(TheoremInputs{3.7, 3.7, 0.0}) == 0.5);
  // f(x) = x, fhat(x) = x/2 with x standard normal: Ef2 = 1, Efhat2 = 1/4,
  // E(f-fhat)^2 = 1/4, so the optimum sits at 1/4.
  CHECK(optimal_threshold(TheoremInputs{1.0, 0.25, 0.25}) == 0.25);
  // All-zero model carries no signal.
  CHECK_THROWS_AS(optimal_threshold(TheoremInputs{2.0, 0.0, 2.0}), DegenerateThresholdError);
  // Ratio above 1 clamps.
  CHECK(optimal_threshold(TheoremInputs{1.0, 4.0, 4.5}) == 1.0);
  CHECK_THROWS_AS(optimal_threshold(TheoremInputs{-1.0, 1.0, 0.0}), DomainError);
  CHECK_THROWS_AS(optimal_threshold(TheoremInputs{1.0, 1.0, 9.0}), DomainError);
}

TEST_CASE("od_mean_flows averages only incident-free days") {
  const auto panel = make_panel(2, 3, 3, [](int od, int day, int k) {
    return static_cast<double>(100 * od + 10 * day + k);
  });
  const std::vector<double> all_days = od_mean_flows(panel, {});
  // od 0: mean over day in {0,1,2}, k in {0,1,2} of 10*day + k = 11.
  CHECK(all_days[0] == doctest::Approx(11.0).epsilon(1e-12));
  CHECK(all_days[1] == doctest::Approx(111.0).epsilon(1e-12));

  IncidentRecord inc;
  inc.incident_id = "I";
  inc.line_id = "L";
  inc.affected_stations = {"S0"};
  inc.day_index = 1;
  inc.start_min = 0.0;
  inc.end_min = 30.0;
  const std::vector<double> skip_day1 = od_mean_flows(panel, {inc});
  CHECK(skip_day1[0] == doctest::Approx(11.0).epsilon(1e-12));  // days 0,2 mean: (1 + 21)/2
  CHECK(skip_day1[1] == doctest::Approx(111.0).epsilon(1e-12));

  IncidentRecord everywhere = inc;
  std::vector<IncidentRecord> all_incidents;
  for (int d = 0; d < 3; ++d) {
    everywhere.day_index = d;
    all_incidents.push_back(everywhere);
  }
  CHECK_THROWS_AS(od_mean_flows(panel, all_incidents), DomainError);
}

TEST_CASE("train_normal: constant flows yield a constant model, incident days excluded") {
  // Clean days carry flow 10 everywhere; day 7 (the incident) carries 10000.
  // If the incident day leaked into training, leaves mixing those targets
  // would drag predictions far away from 10.
  const auto panel = make_panel(3, 8, 4, [](int, int day, int) {
    return day == 7 ? 10000.0 : 10.0;
  });
  IncidentRecord inc;
  inc.incident_id = "I";
  inc.line_id = "L";
  inc.affected_stations = {"S0"};
  inc.day_index = 7;
  inc.start_min = 0.0;
  inc.end_min = 60.0;

  PipelineConfig config;
  const RegressionModel model = train_normal(panel, {inc}, ModelKind::forest, config);
  CHECK(model.feature_names == normal_feature_schema());
  CHECK(predict_one(model, {10.0, 10.0, 2.0, 0.0, 1.0, 10.0}) == doctest::Approx(10.0));
  CHECK(predict_one(model, {10.0, 10.0, 3.0, 1.0, 0.0, 10.0}) == doctest::Approx(10.0));

  // Two incident days leave only 6 clean days: below the history floor.
  IncidentRecord inc2 = inc;
  inc2.day_index = 3;
  CHECK_THROWS_AS(train_normal(panel, {inc, inc2}, ModelKind::forest, config),
                  InsufficientHistoryError);
}

TEST_CASE("pipeline config validation") {
  PipelineConfig config;
  config.p1 = 0.0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = {};
  config.p2 = 1.5;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = {};
  config.alpha = 1.0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = {};
  config.t_pre = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
}

namespace {

struct DeployFixture {
  Scenario scenario;
  PipelineConfig config;
  PlaceboConfig placebo;
  RegressionModel normal20;
  std::pair<int, int> window;

  DeployFixture() {
    ScenarioSpec spec;
    spec.sim.n_lines = 2;
    spec.sim.stations_per_line = 3;
    spec.sim.n_days = 10;
    spec.sim.n_intervals = 8;
    spec.sim.base_demand = 30.0;
    spec.sim.noise_sigma = 1.0;
    spec.sim.day_wobble = 0.1;
    spec.n_incidents = 1;
    spec.incident_start_min = 150.0;
    spec.incident_duration_min = 90.0;
    scenario = build_scenario(spec);
    normal20 = linear_stub(normal_feature_schema(), 20.0);
    const auto w = incident_interval_window(scenario.panel, incident(), placebo);
    REQUIRE(w.has_value());
    window = *w;
  }

  const IncidentRecord& incident() const { return scenario.incidents.back(); }

  PredictionReport run(double effect_value, double p2, double prob_value = 0.5) const {
    PipelineConfig point = config;
    point.p2 = p2;
    return predict_with_incident(
        scenario.panel, scenario.incidents, incident(), scenario.graph, normal20,
        linear_stub(EffectFeatureVector::schema(), effect_value),
        linear_stub(EffectFeatureVector::schema(), prob_value), point, placebo);
  }
};

}  // namespace

TEST_CASE("deployment gate: p2 endpoints, exact arithmetic, row layout") {
  const DeployFixture fx;
  const auto [lo, hi] = fx.window;
  const int n_ods = fx.scenario.panel.n_ods();
  const int expected_rows = n_ods * (hi - lo + 1);

  // p2 = 0: nothing is adjusted, the normal forecast ships untouched.
  const PredictionReport none = fx.run(-3.0, 0.0);
  CHECK(static_cast<int>(none.rows.size()) == expected_rows);
  CHECK(none.n_adjusted == 0);
  for (const PredictionRow& row : none.rows) {
    CHECK(!row.adjusted);
    CHECK(row.adjustment == 0.0);
    CHECK(row.normal == 20.0);
    CHECK(row.final_flow == 20.0);
    CHECK(row.truth == fx.scenario.panel.flow(row.od, fx.incident().day_index, row.interval));
  }
  // Row layout: od ascending, interval ascending within od.
  for (int i = 0; i < expected_rows; ++i) {
    CHECK(none.rows[static_cast<std::size_t>(i)].od == i / (hi - lo + 1));
    CHECK(none.rows[static_cast<std::size_t>(i)].interval == lo + i % (hi - lo + 1));
  }

  // p2 = 1: everything is adjusted (the graph is connected, so every OD has
  // features); final = normal + effect holds bit-exactly.
  const PredictionReport all = fx.run(-3.0, 1.0);
  CHECK(all.n_adjusted == expected_rows);
  for (const PredictionRow& row : all.rows) {
    CHECK(row.adjusted);
    CHECK(row.adjustment == -3.0);
    CHECK(row.final_flow == row.normal + row.adjustment);
    CHECK(row.final_flow == 17.0);
  }

  // Interior gate compares the predicted p-value (here constantly 0.5)
  // inclusively against p2.
  CHECK(fx.run(-3.0, 0.5).n_adjusted == expected_rows);
  CHECK(fx.run(-3.0, 0.49).n_adjusted == 0);
  CHECK(fx.run(-3.0, 0.51, 0.5).n_adjusted == expected_rows);

  // A negative final flow floors at zero by shrinking the adjustment.
  const PredictionReport floored = fx.run(-1000.0, 1.0);
  for (const PredictionRow& row : floored.rows) {
    CHECK(row.adjustment == -row.normal);
    CHECK(row.final_flow == 0.0);
  }
}

TEST_CASE("deployment rejects schema mismatches and foreign incidents") {
  const DeployFixture fx;
  const RegressionModel effect = linear_stub(EffectFeatureVector::schema(), 0.0);
  const RegressionModel prob = linear_stub(EffectFeatureVector::schema(), 0.5);
  // Normal model carrying the wrong schema.
  CHECK_THROWS_AS(predict_with_incident(fx.scenario.panel, fx.scenario.incidents, fx.incident(),
                                        fx.scenario.graph, effect, effect, prob, fx.config,
                                        fx.placebo),
                  ShapeError);
  // Effect model carrying the wrong schema.
  CHECK_THROWS_AS(predict_with_incident(fx.scenario.panel, fx.scenario.incidents, fx.incident(),
                                        fx.scenario.graph, fx.normal20, fx.normal20, prob,
                                        fx.config, fx.placebo),
                  ShapeError);
  IncidentRecord outside = fx.incident();
  outside.day_index = 99;
  CHECK_THROWS_AS(predict_with_incident(fx.scenario.panel, fx.scenario.incidents, outside,
                                        fx.scenario.graph, fx.normal20, effect, prob, fx.config,
                                        fx.placebo),
                  LookupError);
}

TEST_CASE("normal forecast chains its own lags through the window") {
  const DeployFixture fx;
  // Model output = lag1 exactly, so the first window interval copies the
  // observed flow just before the window and every later interval copies the
  // chain — all rows of one OD equal flow(od, day, lo-1).
  const RegressionModel follow_lag1 = linear_stub(normal_feature_schema(), 0.0, {{0, 1.0}});
  PipelineConfig config;
  config.p2 = 0.0;
  const RegressionModel effect = linear_stub(EffectFeatureVector::schema(), 0.0);
  const RegressionModel prob = linear_stub(EffectFeatureVector::schema(), 0.5);
  const PredictionReport report =
      predict_with_incident(fx.scenario.panel, fx.scenario.incidents, fx.incident(),
                            fx.scenario.graph, follow_lag1, effect, prob, config, fx.placebo);
  const auto [lo, hi] = fx.window;
  const int day = fx.incident().day_index;
  for (const PredictionRow& row : report.rows) {
    CHECK(row.normal == fx.scenario.panel.flow(row.od, day, lo - 1));
  }
  CHECK(lo >= 2);  // the window always leaves room for observed lags
}

TEST_CASE("mark_influenced flags placebo-significant cells of the right day") {
  const DeployFixture fx;
  PredictionReport report = fx.run(0.0, 0.0);
  const int day = fx.incident().day_index;
  const auto [lo, hi] = fx.window;
  std::vector<CausalEffectEstimate> estimates;
  estimates.push_back({0, day, lo, 0.0, 0.0, 0.0, 0.04});      // flagged
  estimates.push_back({0, day - 1, lo + 1, 0.0, 0.0, 0.0, 0.01});  // wrong day
  estimates.push_back({1, day, lo + 1, 0.0, 0.0, 0.0, 0.05});  // boundary: flagged
  estimates.push_back({2, day, hi, 0.0, 0.0, 0.0, kNaN});      // untested cell
  estimates.push_back({3, day, lo, 0.0, 0.0, 0.0, 0.051});     // not significant
  mark_influenced(report.rows, estimates, day, 0.05);
  int flagged = 0;
  for (const PredictionRow& row : report.rows) {
    if (row.influenced) {
      ++flagged;
      const bool first = row.od == 0 && row.interval == lo;
      const bool second = row.od == 1 && row.interval == lo + 1;
      CHECK((first || second));
    }
  }
  CHECK(flagged == 2);
}

TEST_CASE("evaluate splits metrics into all rows and the influenced subset") {
  auto row = [](double final_flow, double truth, bool influenced) {
    PredictionRow r;
    r.final_flow = final_flow;
    r.truth = truth;
    r.influenced = influenced;
    return r;
  };
  const std::vector<PredictionRow> rows = {
      row(2.0, 4.0, true), row(4.0, 2.0, false), row(7.0, 1.5, true), row(5.0, 5.0, false)};
  const EvaluationResult result = evaluate(rows);
  CHECK(result.all.n_rows == 3);
  CHECK(result.all.mae == doctest::Approx((2.0 + 2.0 + 0.0) / 3.0).epsilon(1e-12));
  REQUIRE(result.influenced.has_value());
  CHECK(result.influenced->n_rows == 1);  // the truth-1.5 influenced row is excluded
  CHECK(result.influenced->mae == 2.0);

  // Influenced rows exist but none passes the truth floor: subset omitted.
  const EvaluationResult tiny_influenced =
      evaluate({row(2.0, 4.0, false), row(9.0, 1.0, true)});
  CHECK(!tiny_influenced.influenced.has_value());

  // No influenced rows at all: subset omitted.
  CHECK(!evaluate({row(2.0, 4.0, false)}).influenced.has_value());

  // Nothing qualifies anywhere: the whole evaluation is empty.
  CHECK_THROWS_AS(evaluate({row(2.0, 1.0, true)}), EmptyEvaluationError);
}

TEST_CASE("predictions CSV round-trips every forecast field") {
  TempDir dir;
  PredictionReport report;
  PredictionRow a;
  a.od = 3;
  a.interval = 5;
  a.normal = 17.25;
  a.adjustment = -4.5;
  a.final_flow = 12.75;
  a.truth = 11.0;
  a.adjusted = true;
  PredictionRow b;
  b.od = 4;
  b.interval = 6;
  b.normal = 8.0;
  b.adjustment = 0.0;
  b.final_flow = 8.0;
  b.truth = 9.0;
  report.rows = {a, b};
  report.n_adjusted = 1;
  const auto path = dir.file("predictions.csv");
  save_predictions(report, path);
  const auto loaded = load_predictions(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].od == 3);
  CHECK(loaded[0].interval == 5);
  CHECK(loaded[0].normal == 17.25);
  CHECK(loaded[0].adjustment == -4.5);
  CHECK(loaded[0].final_flow == 12.75);
  CHECK(loaded[0].truth == 11.0);
  CHECK(loaded[0].adjusted);
  CHECK(!loaded[1].adjusted);  // zero adjustment reads back as "not adjusted"
  CHECK_THROWS_AS(load_predictions(dir.file("missing.csv")), IoError);
}

TEST_CASE("metrics JSON carries both blocks and the adjustment count") {
  TempDir dir;
  EvaluationResult result;
  result.all = Metrics{1.5, 2.5, 0.125, 40};
  result.influenced = Metrics{3.0, 4.0, 0.25, 7};
  const auto path = dir.file("metrics.json");
  save_metrics(result, 13, path);
  {
    std::ifstream in(path);
    const auto doc = nlohmann::json::parse(in);
    CHECK(doc["all"]["mae"] == 1.5);
    CHECK(doc["all"]["rmse"] == 2.5);
    CHECK(doc["all"]["mape"] == 0.125);
    CHECK(doc["influenced"]["mae"] == 3.0);
    CHECK(doc["n_adjusted"] == 13);
  }
  result.influenced.reset();
  save_metrics(result, 0, path);
  {
    std::ifstream in(path);
    const auto doc = nlohmann::json::parse(in);
    CHECK(doc["influenced"].is_null());
    CHECK(doc["n_adjusted"] == 0);
  }
}

TEST_CASE("threshold sweep: grid layout, p1=0 fallback equals a closed gate") {
  ScenarioSpec spec;
  spec.sim.n_lines = 2;
  spec.sim.stations_per_line = 3;
  spec.sim.n_days = 12;
  spec.sim.n_intervals = 8;
  spec.sim.base_demand = 30.0;
  spec.sim.noise_sigma = 1.0;
  spec.sim.day_wobble = 0.15;
  spec.n_incidents = 2;
  spec.incident_day_gap = 3;
  spec.incident_start_min = 90.0;
  spec.incident_duration_min = 60.0;
  const Scenario scenario = build_scenario(spec);
  REQUIRE(scenario.incidents.size() == 2);

  PlaceboConfig placebo;
  placebo.reuse_treated_v = true;  // accelerate: V from the treated fit is reused
  placebo.syncontrol.outer_restarts = 0;
  std::vector<int> ods;
  for (int od = 0; od < scenario.panel.n_ods(); ++od) ods.push_back(od);
  const auto estimates =
      test_effects(scenario.panel, scenario.incidents, ods, std::nullopt, placebo);
  std::vector<CausalEffectEstimate> train_estimates, test_estimates;
  for (const CausalEffectEstimate& e : estimates) {
    (e.day == scenario.incidents[1].day_index ? test_estimates : train_estimates).push_back(e);
  }
  REQUIRE(!train_estimates.empty());
  REQUIRE(!test_estimates.empty());

  PipelineConfig config;
  config.learner_config.forest.n_trees = 30;
  const std::vector<double> grid_p1 = {0.0, 0.3, 1.0};
  const std::vector<double> grid_p2 = {0.0, 0.5};
  const auto rows = sweep_thresholds(scenario.panel, scenario.incidents, scenario.incidents[1],
                                     scenario.graph, train_estimates, test_estimates, grid_p1,
                                     grid_p2, config, placebo);
  REQUIRE(rows.size() == grid_p1.size() + grid_p2.size());
  for (std::size_t i = 0; i < grid_p1.size(); ++i) {
    CHECK(rows[i].p1 == grid_p1[i]);
    CHECK(rows[i].p2 == 0.05);  // held fixed on the p1 arm
    CHECK(std::isfinite(rows[i].mae_all));
    CHECK(rows[i].rmse_all >= rows[i].mae_all);  // RMSE dominates MAE always
  }
  for (std::size_t j = 0; j < grid_p2.size(); ++j) {
    const SweepRow& row = rows[grid_p1.size() + j];
    CHECK(row.p1 == 0.05);  // held fixed on the p2 arm
    CHECK(row.p2 == grid_p2[j]);
  }
  // p1 = 0 leaves the adjustment stage untrained; that must be exactly the
  // normal-only forecast, which the closed gate (p2 = 0) also produces.
  CHECK(rows[0].mae_all == rows[grid_p1.size()].mae_all);
  CHECK(rows[0].rmse_all == rows[grid_p1.size()].rmse_all);

  CHECK_THROWS_AS(sweep_thresholds(scenario.panel, scenario.incidents, scenario.incidents[1],
                                   scenario.graph, train_estimates, test_estimates, {}, grid_p2,
                                   config, placebo),
                  DomainError);
}

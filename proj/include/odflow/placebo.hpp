#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "odflow/panel.hpp"
#include "odflow/syncontrol.hpp"

namespace odflow {

struct PlaceboConfig {
  SynControlConfig syncontrol;
  double alpha = 0.05;                // significance level
  int post_incident_window_min = 180;  // test window extends this far past the end
  // Reuse the treated cell's optimized V for its placebo runs instead of
  // re-optimizing per left-out day (large speedup, slightly less faithful).
  bool reuse_treated_v = false;
  int threads = 1;  // parallelism for test_effects (output is thread-count invariant)

  void validate() const;
};

// Leave-one-out reconstruction errors at one (od, interval): one entry per
// evaluated day (every incident-free day plus the treated day).
struct PlaceboResult {
  std::vector<int> days;       // ascending; includes treated_day
  std::vector<double> errors;  // |counterfactual − observed| per day
  int treated_day = 0;
  int order_of_treated = 0;  // ascending rank in 1..n, ties take the block minimum
  double p_value = 0.0;      // 1 − order/n
  // The treated day's run doubles as its effect estimate (p_value filled in).
  CausalEffectEstimate treated_estimate;
};

// Rank-based p-value from an error vector. treated_pos indexes into errors.
// Ties are assigned the minimum rank of the tied block (conservative: the
// p-value can only grow).
double p_value_from_errors(const std::vector<double>& errors, int treated_pos);

// Run the synthetic-control pipeline once per day (each day in turn treated
// as pseudo-treated, its own day excluded from donors; the true treated day
// is never a donor). Requires the incident-free pool minus the treated day to
// keep at least 2 days.
PlaceboResult leave_one_out_errors(const ODPanel& panel,
                                   const std::vector<IncidentRecord>& incidents, int od,
                                   int interval, int treated_day,
                                   const PlaceboConfig& config = {});

// Intervals whose 30-minute span intersects [start_min, end_min +
// post_incident_window_min), clipped so lag covariates and the pre-period
// exist. Returns nullopt when the clipped window is empty.
std::optional<std::pair<int, int>> incident_interval_window(const ODPanel& panel,
                                                            const IncidentRecord& incident,
                                                            const PlaceboConfig& config = {});

// Estimate + significance-test every (od, incident-day, interval) cell in the
// given ods and each incident's window (or the explicit interval_range when
// provided). Duplicate cells across incidents are evaluated once. Output
// order: incidents in input order, then ods in input order, then intervals
// ascending — identical for any thread count.
std::vector<CausalEffectEstimate> test_effects(
    const ODPanel& panel, const std::vector<IncidentRecord>& incidents,
    const std::vector<int>& ods, std::optional<std::pair<int, int>> interval_range,
    const PlaceboConfig& config = {});

inline bool is_significant(const CausalEffectEstimate& estimate, double alpha) {
  return estimate.p_value <= alpha;
}

}  // namespace odflow

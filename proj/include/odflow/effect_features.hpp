#pragma once

#include <vector>

#include "odflow/learners.hpp"
#include "odflow/network.hpp"
#include "odflow/panel.hpp"

namespace odflow {

// Fixed 13-feature description of one (incident, OD, interval) sample:
// severity block copied from the incident, spatial block from the station
// graph, temporal block from the interval midpoint, plus the counterfactual
// flow x0. Order is a serialization contract — never reorder.
struct EffectFeatureVector {
  std::vector<double> values;  // length 13, schema order

  static const std::vector<std::string>& schema();
  static constexpr int size() { return 13; }
};

// Assemble the feature vector for one cell. `x0` is the counterfactual flow
// (synthetic-control estimate at training time, normal-model prediction at
// deployment). Throws UnreachableError when an OD station cannot reach the
// incident stations (callers skip such samples).
EffectFeatureVector build_features(const IncidentRecord& incident, const StationGraph& graph,
                                   const ODPair& od, int day, int interval, double x0);

// Training tables distilled from significance-tested estimates:
//   effect_table — rows with p_value ≤ p1, target = estimated effect;
//   p_table      — every row, target = p_value.
// Rows whose OD cannot reach the incident are skipped from both tables.
struct TrainingTables {
  Dataset effect_table;
  Dataset p_table;
};

TrainingTables build_training_table(const std::vector<CausalEffectEstimate>& estimates,
                                    const std::vector<IncidentRecord>& incidents,
                                    const StationGraph& graph, const ODPanel& panel, double p1);

}  // namespace odflow

#include "odflow/effect_features.hpp"

#include <cmath>
#include <map>

#include "odflow/errors.hpp"

namespace odflow {

const std::vector<std::string>& EffectFeatureVector::schema() {
  static const std::vector<std::string> names = {
      "duration",        "max_delay",          "delay_5_num",
      "evacuate_num",    "cancel_num",         "influence_station_num",
      "distance_d",      "distance_o",         "proportion",
      "time_diff_to_start", "time_diff_to_end", "is_in_incident",
      "x0"};
  return names;
}

EffectFeatureVector build_features(const IncidentRecord& incident, const StationGraph& graph,
                                   const ODPair& od, int day, int interval, double x0) {
  incident.validate();
  if (day != incident.day_index) {
    throw DomainError("sample day " + std::to_string(day) + " does not match incident " +
                      incident.incident_id + " (day " + std::to_string(incident.day_index) + ")");
  }
  if (interval < 0) throw LookupError("interval index out of range: " + std::to_string(interval));
  if (!std::isfinite(x0)) throw DomainError("counterfactual flow x0 must be finite");

  const auto hops_o = graph.shortest_hops(od.origin, incident.affected_stations);
  const auto hops_d = graph.shortest_hops(od.destination, incident.affected_stations);
  const auto proportion = graph.overlap_proportion(od.origin, od.destination,
                                                   incident.affected_stations);
  if (!hops_o || !hops_d || !proportion) {
    throw UnreachableError("od (" + od.origin + "," + od.destination +
                           ") cannot reach the incident stations of " + incident.incident_id);
  }

  const double midpoint =
      static_cast<double>(interval) * kIntervalMinutes + 0.5 * kIntervalMinutes;
  const bool in_incident = midpoint >= incident.start_min && midpoint <= incident.end_min;

  EffectFeatureVector features;
  features.values = {incident.end_min - incident.start_min,
                     incident.max_delay,
                     static_cast<double>(incident.delay_5_num),
                     static_cast<double>(incident.evacuate_num),
                     static_cast<double>(incident.cancel_num),
                     static_cast<double>(incident.influence_station_num()),
                     static_cast<double>(*hops_d),
                     static_cast<double>(*hops_o),
                     *proportion,
                     midpoint - incident.start_min,
                     midpoint - incident.end_min,
                     in_incident ? 1.0 : 0.0,
                     x0};
  return features;
}

TrainingTables build_training_table(const std::vector<CausalEffectEstimate>& estimates,
                                    const std::vector<IncidentRecord>& incidents,
                                    const StationGraph& graph, const ODPanel& panel, double p1) {
  if (!(p1 > 0.0) || p1 > 1.0) throw DomainError("p1 must lie in (0,1]");
  // First incident on each day wins (one incident per day in practice).
  std::map<int, const IncidentRecord*> incident_by_day;
  for (const IncidentRecord& inc : incidents) {
    incident_by_day.try_emplace(inc.day_index, &inc);
  }

  TrainingTables tables;
  tables.effect_table.feature_names = EffectFeatureVector::schema();
  tables.p_table.feature_names = EffectFeatureVector::schema();
  for (const CausalEffectEstimate& e : estimates) {
    const auto it = incident_by_day.find(e.day);
    if (it == incident_by_day.end()) {
      throw DomainError("estimate on day " + std::to_string(e.day) +
                        " has no matching incident record");
    }
    if (!std::isfinite(e.p_value) || e.p_value < 0.0 || e.p_value >= 1.0) {
      throw DomainError("estimate (od=" + std::to_string(e.od) + ", day=" + std::to_string(e.day) +
                        ", interval=" + std::to_string(e.interval) +
                        ") lacks a valid p-value; run the placebo test first");
    }
    EffectFeatureVector features;
    try {
      features = build_features(*it->second, graph, panel.od_pair(e.od), e.day, e.interval,
                                e.counterfactual);
    } catch (const UnreachableError&) {
      continue;  // skipped from both tables to keep them consistent
    }
    tables.p_table.features.insert(tables.p_table.features.end(), features.values.begin(),
                                   features.values.end());
    tables.p_table.targets.push_back(e.p_value);
    if (e.p_value <= p1) {
      tables.effect_table.features.insert(tables.effect_table.features.end(),
                                          features.values.begin(), features.values.end());
      tables.effect_table.targets.push_back(e.effect);
    }
  }
  if (tables.effect_table.targets.empty()) {
    throw EmptyTrainingSetError("no estimates with p_value <= " + std::to_string(p1) +
                                "; effect-regression table is empty");
  }
  if (tables.p_table.targets.empty()) {
    throw EmptyTrainingSetError("no usable estimates; p-value-regression table is empty");
  }
  return tables;
}

}  // namespace odflow

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "odflow/network.hpp"
#include "odflow/panel.hpp"

namespace odflow {

// Knobs for the synthetic network + demand generator.
struct SimSpec {
  int n_lines = 2;
  int stations_per_line = 4;
  int n_transfer = 1;  // shared stations joining consecutive line pairs
  int n_days = 24;
  int n_intervals = 14;
  double base_demand = 40.0;     // mean flow per OD-interval before modifiers
  double weekend_factor = 0.6;   // multiplier on weekend days
  double weather_factor = 0.85;  // multiplier on non-sunny days
  double noise_sigma = 2.0;      // additive integer noise scale per cell
  // Idiosyncratic daily demand: each (od, day) latent level is scaled by
  // exp(U(-day_wobble, +day_wobble)). This unobserved heterogeneity is what
  // makes weakly affected cells genuinely hard to separate from daily chance.
  double day_wobble = 0.25;
  std::uint64_t seed = 1;

  void validate() const;
};

// Temporal/spatial shape of an injected disruption: demand is suppressed
// while the incident runs, then overshoots during the recovery window, with
// everything scaled by baseline flow and decaying in network distance.
struct InjectionProfile {
  double suppression_depth = 0.6;   // fraction of baseline removed during incident
  double recovery_overshoot = 0.35; // fraction of baseline added during recovery
  double spatial_decay = 0.3;       // e-folding scale in hops; reach cut at factor 0.05
  int recovery_window_min = 60;

  void validate() const;
};

// Ground-truth record for one touched cell (the pre-flooring additive delta).
struct InjectedEffect {
  int od = 0;
  int day = 0;
  int interval = 0;
  double true_effect = 0.0;
};

// n_lines path graphs joined at n_transfer shared stations.
std::vector<LineDef> generate_lines(const SimSpec& spec);
StationGraph generate_network(const SimSpec& spec);

// Baseline panel: rounded multiplicative demand (morning-peak interval
// profile x weekend/weather modifiers x per-OD popularity) plus integer
// noise, floored at 0. ODs are all ordered station pairs of the graph.
ODPanel generate_panel(const StationGraph& graph, const SimSpec& spec);

// Apply one incident to a panel copy. Returns the disrupted panel plus the
// exact per-cell effects (rounded to integers before flooring, so
// panel' − panel equals the recorded effect wherever flooring did not bind).
std::pair<ODPanel, std::vector<InjectedEffect>> inject_incident(const ODPanel& panel,
                                                                const StationGraph& graph,
                                                                const IncidentRecord& incident,
                                                                const InjectionProfile& profile);

// Full scenario: panel + auto-placed incidents (the last one on the final
// day serves as the held-out deployment incident) + accumulated ground truth.
struct ScenarioSpec {
  SimSpec sim;
  InjectionProfile profile;
  int n_incidents = 3;
  // Mid-morning incident: the tested window (start to end + 3 h) then spans
  // suppression, recovery, and several already-recovered intervals, like a
  // real post-incident monitoring horizon.
  double incident_start_min = 150.0;  // minutes since day start
  double incident_duration_min = 90.0;
  int incident_day_gap = 6;  // spacing between incident days, counting back from the last day

  void validate() const;
};

struct Scenario {
  std::vector<LineDef> lines;
  StationGraph graph;
  ODPanel panel;  // incidents applied
  std::vector<IncidentRecord> incidents;
  std::vector<InjectedEffect> truths;
};

Scenario build_scenario(const ScenarioSpec& spec);

// ground_truth_effects CSV: od_id,day_index,interval_index,true_effect
void save_injected_effects(const std::vector<InjectedEffect>& effects,
                           const std::filesystem::path& path);
std::vector<InjectedEffect> load_injected_effects(const std::filesystem::path& path);

}  // namespace odflow

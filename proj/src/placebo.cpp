#include "odflow/placebo.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "odflow/errors.hpp"
#include "odflow/parallel.hpp"
#include "odflow/rng.hpp"

namespace odflow {

namespace {

// Mirror of the estimate_effect seed so a placebo run for day i reproduces
// the exact fit that estimate_effect would compute for that cell.
constexpr std::uint64_t kEffectSalt = 0x65666665ULL;

std::uint64_t cell_seed(int od, int day, int interval) {
  return mix_seed(kEffectSalt, {static_cast<std::uint64_t>(od), static_cast<std::uint64_t>(day),
                                static_cast<std::uint64_t>(interval)});
}

}  // namespace

void PlaceboConfig::validate() const {
  syncontrol.validate();
  if (!(alpha > 0.0) || !(alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
  if (post_incident_window_min < 0) {
    throw ConfigError("post_incident_window_min must be >= 0");
  }
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

double p_value_from_errors(const std::vector<double>& errors, int treated_pos) {
  const int n = static_cast<int>(errors.size());
  if (n < 2) throw DomainError("p-value needs at least 2 leave-one-out errors");
  if (treated_pos < 0 || treated_pos >= n) {
    throw LookupError("treated index out of range: " + std::to_string(treated_pos));
  }
  const double treated_error = errors[static_cast<std::size_t>(treated_pos)];
  int below = 0;
  for (const double e : errors) {
    if (e < treated_error) ++below;
  }
  const int order = below + 1;  // minimum rank of the tied block
  return 1.0 - static_cast<double>(order) / static_cast<double>(n);
}

PlaceboResult leave_one_out_errors(const ODPanel& panel,
                                   const std::vector<IncidentRecord>& incidents, int od,
                                   int interval, int treated_day, const PlaceboConfig& config) {
  config.validate();
  if (treated_day < 0 || treated_day >= panel.n_days()) {
    throw LookupError("treated day out of range: " + std::to_string(treated_day));
  }

  // Donor pool: incident-free days, never the treated day.
  std::vector<int> pool = donor_days(panel, incidents);
  pool.erase(std::remove(pool.begin(), pool.end(), treated_day), pool.end());
  if (pool.size() < 2) {
    throw InsufficientDonorsError(
        "placebo test needs at least 2 incident-free donor days besides the treated day");
  }

  PlaceboResult result;
  result.treated_day = treated_day;
  result.days = pool;
  result.days.push_back(treated_day);
  std::sort(result.days.begin(), result.days.end());
  result.errors.assign(result.days.size(), 0.0);

  // With reuse_treated_v, the treated run's optimized V is shared by every
  // placebo run; otherwise each run re-optimizes V from scratch.
  std::vector<double> reused_v;
  CausalEffectEstimate treated_estimate;
  if (config.reuse_treated_v) {
    const DonorSet donors =
        build_donor_set(panel, pool, od, treated_day, interval, config.syncontrol.t_pre);
    const SyntheticFit fit =
        optimize_v(donors, config.syncontrol, cell_seed(od, treated_day, interval));
    reused_v = fit.v_diag;
    treated_estimate.counterfactual = fit.counterfactual;
  }

  std::vector<int> run_donors;
  for (std::size_t pos = 0; pos < result.days.size(); ++pos) {
    const int day = result.days[pos];
    run_donors.clear();
    for (const int candidate : pool) {
      if (candidate != day) run_donors.push_back(candidate);
    }
    const double observed = panel.flow(od, day, interval);
    double cf = 0.0;
    if (config.reuse_treated_v && day == treated_day) {
      cf = treated_estimate.counterfactual;  // already solved above
    } else {
      const DonorSet donors =
          build_donor_set(panel, run_donors, od, day, interval, config.syncontrol.t_pre);
      if (config.reuse_treated_v) {
        cf = fit_with_v(donors, reused_v, config.syncontrol).counterfactual;
      } else {
        cf = optimize_v(donors, config.syncontrol, cell_seed(od, day, interval)).counterfactual;
      }
    }
    result.errors[pos] = std::abs(cf - observed);
    if (day == treated_day) {
      treated_estimate.od = od;
      treated_estimate.day = day;
      treated_estimate.interval = interval;
      treated_estimate.observed = observed;
      if (!config.reuse_treated_v) treated_estimate.counterfactual = cf;
      treated_estimate.effect = observed - treated_estimate.counterfactual;
    }
  }

  const int treated_pos = static_cast<int>(
      std::lower_bound(result.days.begin(), result.days.end(), treated_day) -
      result.days.begin());
  result.p_value = p_value_from_errors(result.errors, treated_pos);
  int below = 0;
  for (const double e : result.errors) {
    if (e < result.errors[static_cast<std::size_t>(treated_pos)]) ++below;
  }
  result.order_of_treated = below + 1;
  treated_estimate.p_value = result.p_value;
  result.treated_estimate = treated_estimate;
  return result;
}

std::optional<std::pair<int, int>> incident_interval_window(const ODPanel& panel,
                                                            const IncidentRecord& incident,
                                                            const PlaceboConfig& config) {
  incident.validate();
  const double len = static_cast<double>(kIntervalMinutes);
  const double span_end = incident.end_min + static_cast<double>(config.post_incident_window_min);
  int lo = static_cast<int>(std::floor(incident.start_min / len));
  int hi = static_cast<int>(std::ceil(span_end / len)) - 1;
  lo = std::max(lo, std::max(2, config.syncontrol.t_pre));
  hi = std::min(hi, panel.n_intervals() - 1);
  if (hi < lo) return std::nullopt;
  return std::make_pair(lo, hi);
}

std::vector<CausalEffectEstimate> test_effects(const ODPanel& panel,
                                               const std::vector<IncidentRecord>& incidents,
                                               const std::vector<int>& ods,
                                               std::optional<std::pair<int, int>> interval_range,
                                               const PlaceboConfig& config) {
  config.validate();
  if (interval_range && interval_range->second < interval_range->first) {
    throw DomainError("interval range is empty");
  }
  for (const int od : ods) {
    if (od < 0 || od >= panel.n_ods()) {
      throw LookupError("od index out of range: " + std::to_string(od));
    }
  }

  struct Cell {
    int od;
    int day;
    int interval;
  };
  std::vector<Cell> cells;
  std::set<std::tuple<int, int, int>> seen;
  for (const IncidentRecord& incident : incidents) {
    std::pair<int, int> window;
    if (interval_range) {
      window = *interval_range;
    } else {
      const auto derived = incident_interval_window(panel, incident, config);
      if (!derived) continue;
      window = *derived;
    }
    for (const int od : ods) {
      for (int k = window.first; k <= window.second; ++k) {
        if (seen.emplace(od, incident.day_index, k).second) {
          cells.push_back({od, incident.day_index, k});
        }
      }
    }
  }

  std::vector<CausalEffectEstimate> estimates(cells.size());
  parallel_for(static_cast<int>(cells.size()), config.threads, [&](int i) {
    const Cell& cell = cells[static_cast<std::size_t>(i)];
    const PlaceboResult run =
        leave_one_out_errors(panel, incidents, cell.od, cell.interval, cell.day, config);
    estimates[static_cast<std::size_t>(i)] = run.treated_estimate;
  });
  return estimates;
}

}  // namespace odflow

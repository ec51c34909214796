#include "odflow/simgen.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <tuple>

#include "odflow/csv.hpp"
#include "odflow/errors.hpp"
#include "odflow/rng.hpp"

namespace odflow {

namespace {

constexpr std::uint64_t kPanelSalt = 0x70616e6c;       // per-cell noise stream
constexpr std::uint64_t kPopularitySalt = 0x706f7075;  // per-OD popularity
constexpr std::uint64_t kWeatherSalt = 0x77656174;     // per-day weather
constexpr std::uint64_t kWobbleSalt = 0x776f6262;      // per-(od, day) demand wobble

std::string station_name(int line, int pos) {
  return "L" + std::to_string(line) + "S" + std::to_string(pos);
}

// Mondays anchor the calendar so day_index % 7 in {5, 6} means weekend.
std::string date_label_for(int day_index) {
  using namespace std::chrono;
  const sys_days anchor = sys_days{year{2024} / March / 4};  // a Monday
  const year_month_day ymd{anchor + days{day_index}};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

// Morning-peak shaped interval profile in (0, 1.2]: flat floor plus a
// Gaussian bump centered at 40% of the service window.
double interval_profile(int interval, int n_intervals) {
  const double peak = std::round(0.4 * n_intervals);
  const double x = interval - peak;
  return 0.45 + 0.75 * std::exp(-x * x / 18.0);
}

}  // namespace

void SimSpec::validate() const {
  if (n_lines < 1) throw ConfigError("simgen: n_lines must be >= 1");
  if (stations_per_line < 2) throw ConfigError("simgen: stations_per_line must be >= 2");
  if (n_transfer < 0) throw ConfigError("simgen: n_transfer must be >= 0");
  if (n_lines == 1 && n_transfer > 0)
    throw ConfigError("simgen: transfers require at least 2 lines");
  if (n_days < 1) throw ConfigError("simgen: n_days must be >= 1");
  if (n_intervals < 3) throw ConfigError("simgen: n_intervals must be >= 3");
  if (!(base_demand > 0.0) || !std::isfinite(base_demand))
    throw ConfigError("simgen: base_demand must be positive and finite");
  if (!(weekend_factor > 0.0) || !std::isfinite(weekend_factor))
    throw ConfigError("simgen: weekend_factor must be positive and finite");
  if (!(weather_factor > 0.0) || !std::isfinite(weather_factor))
    throw ConfigError("simgen: weather_factor must be positive and finite");
  if (noise_sigma < 0.0 || !std::isfinite(noise_sigma))
    throw ConfigError("simgen: noise_sigma must be non-negative and finite");
  if (day_wobble < 0.0 || !std::isfinite(day_wobble))
    throw ConfigError("simgen: day_wobble must be non-negative and finite");
}

void InjectionProfile::validate() const {
  if (suppression_depth < 0.0 || suppression_depth > 1.0)
    throw ConfigError("injection: suppression_depth must lie in [0, 1]");
  if (recovery_overshoot < 0.0 || !std::isfinite(recovery_overshoot))
    throw ConfigError("injection: recovery_overshoot must be non-negative");
  if (!(spatial_decay > 0.0) || !std::isfinite(spatial_decay))
    throw ConfigError("injection: spatial_decay must be positive");
  if (recovery_window_min < 0)
    throw ConfigError("injection: recovery_window_min must be non-negative");
}

void ScenarioSpec::validate() const {
  sim.validate();
  profile.validate();
  if (n_incidents < 1) throw ConfigError("scenario: n_incidents must be >= 1");
  if (incident_day_gap < 1) throw ConfigError("scenario: incident_day_gap must be >= 1");
  if (!(incident_duration_min > 0.0))
    throw ConfigError("scenario: incident_duration_min must be positive");
  if (incident_start_min < 0.0)
    throw ConfigError("scenario: incident_start_min must be non-negative");
  const int span = (n_incidents - 1) * incident_day_gap;
  if (span >= sim.n_days)
    throw ConfigError("scenario: incident schedule does not fit inside n_days");
  const double end = incident_start_min + incident_duration_min;
  if (end > sim.n_intervals * static_cast<double>(kIntervalMinutes))
    throw ConfigError("scenario: incident window extends past the service day");
}

std::vector<LineDef> generate_lines(const SimSpec& spec) {
  spec.validate();
  std::vector<LineDef> lines;
  lines.reserve(static_cast<std::size_t>(spec.n_lines));
  for (int li = 0; li < spec.n_lines; ++li) {
    LineDef def;
    def.line_id = "L" + std::to_string(li);
    def.stations.reserve(static_cast<std::size_t>(spec.stations_per_line));
    for (int pos = 0; pos < spec.stations_per_line; ++pos)
      def.stations.push_back(station_name(li, pos));
    lines.push_back(std::move(def));
  }
  // Each transfer merges one station of a following line into the preceding
  // line, cycling through consecutive line pairs, then marching outward from
  // the middle of the line when a pair gets a second transfer.
  const int mid = spec.stations_per_line / 2;
  for (int t = 0; t < spec.n_transfer; ++t) {
    const int a = spec.n_lines > 1 ? t % (spec.n_lines - 1) : 0;
    const int b = a + 1;
    const int pos = mid + t / (spec.n_lines - 1);
    if (pos >= spec.stations_per_line)
      throw ConfigError("simgen: n_transfer too large for stations_per_line");
    lines[static_cast<std::size_t>(b)].stations[static_cast<std::size_t>(pos)] =
        lines[static_cast<std::size_t>(a)].stations[static_cast<std::size_t>(pos)];
  }
  return lines;
}

StationGraph generate_network(const SimSpec& spec) {
  return StationGraph::from_lines(generate_lines(spec));
}

ODPanel generate_panel(const StationGraph& graph, const SimSpec& spec) {
  spec.validate();
  const std::vector<std::string>& stations = graph.stations();
  std::vector<ODPair> pairs;
  for (const std::string& o : stations)
    for (const std::string& d : stations)
      if (o != d) pairs.push_back(ODPair{o, d});

  std::vector<DayMeta> days(static_cast<std::size_t>(spec.n_days));
  for (int day = 0; day < spec.n_days; ++day) {
    DayMeta& m = days[static_cast<std::size_t>(day)];
    m.day_index = day;
    m.date_label = date_label_for(day);
    m.is_weekend = (day % 7 == 5) || (day % 7 == 6);
    Rng wx(mix_seed(spec.seed, {kWeatherSalt, static_cast<std::uint64_t>(day)}));
    m.is_sunny = wx.uniform() < 0.7;
  }

  const int n_od = static_cast<int>(pairs.size());
  std::vector<double> popularity(pairs.size());
  for (int od = 0; od < n_od; ++od) {
    Rng pop(mix_seed(spec.seed, {kPopularitySalt, static_cast<std::uint64_t>(od)}));
    popularity[static_cast<std::size_t>(od)] = std::exp(pop.uniform(-0.6, 0.6));
  }

  std::vector<double> flows(pairs.size() * static_cast<std::size_t>(spec.n_days) *
                            static_cast<std::size_t>(spec.n_intervals));
  std::size_t idx = 0;
  for (int od = 0; od < n_od; ++od) {
    for (int day = 0; day < spec.n_days; ++day) {
      const DayMeta& m = days[static_cast<std::size_t>(day)];
      double modifier = popularity[static_cast<std::size_t>(od)];
      if (m.is_weekend) modifier *= spec.weekend_factor;
      if (!m.is_sunny) modifier *= spec.weather_factor;
      if (spec.day_wobble > 0.0) {
        Rng wob(mix_seed(spec.seed, {kWobbleSalt, static_cast<std::uint64_t>(od),
                                     static_cast<std::uint64_t>(day)}));
        modifier *= std::exp(wob.uniform(-spec.day_wobble, spec.day_wobble));
      }
      for (int k = 0; k < spec.n_intervals; ++k) {
        Rng cell(mix_seed(spec.seed, {kPanelSalt, static_cast<std::uint64_t>(od),
                                      static_cast<std::uint64_t>(day),
                                      static_cast<std::uint64_t>(k)}));
        const double latent =
            spec.base_demand * interval_profile(k, spec.n_intervals) * modifier;
        const long long noisy =
            std::llround(std::round(latent) + spec.noise_sigma * cell.normal());
        flows[idx++] = static_cast<double>(noisy < 0 ? 0 : noisy);
      }
    }
  }
  return ODPanel(std::move(pairs), std::move(days), spec.n_intervals, std::move(flows));
}

std::pair<ODPanel, std::vector<InjectedEffect>> inject_incident(const ODPanel& panel,
                                                                const StationGraph& graph,
                                                                const IncidentRecord& incident,
                                                                const InjectionProfile& profile) {
  incident.validate();
  profile.validate();
  if (incident.day_index < 0 || incident.day_index >= panel.n_days())
    throw LookupError("inject_incident: incident day outside the panel");

  const double inc_start = incident.start_min;
  const double inc_end = incident.end_min;
  const double rec_end = inc_end + profile.recovery_window_min;

  std::vector<double> flows = panel.flows();
  std::vector<InjectedEffect> effects;
  const int day = incident.day_index;
  for (int od = 0; od < panel.n_ods(); ++od) {
    const ODPair& pair = panel.od_pairs()[static_cast<std::size_t>(od)];
    const auto hops_o = graph.shortest_hops(pair.origin, incident.affected_stations);
    const auto hops_d = graph.shortest_hops(pair.destination, incident.affected_stations);
    if (!hops_o || !hops_d) continue;  // disconnected from the disruption
    const int dist = std::min(*hops_o, *hops_d);
    const double reach = std::exp(-static_cast<double>(dist) / profile.spatial_decay);
    if (reach < 0.05) continue;

    for (int k = 0; k < panel.n_intervals(); ++k) {
      const double lo = k * static_cast<double>(kIntervalMinutes);
      const double hi = lo + kIntervalMinutes;
      const double sup_overlap =
          std::max(0.0, std::min(hi, inc_end) - std::max(lo, inc_start));
      const double rec_overlap =
          std::max(0.0, std::min(hi, rec_end) - std::max(lo, inc_end));
      if (sup_overlap <= 0.0 && rec_overlap <= 0.0) continue;
      const std::size_t at = panel.offset(od, day, k);
      const double baseline = flows[at];
      const double delta =
          reach * baseline *
          (profile.recovery_overshoot * (rec_overlap / kIntervalMinutes) -
           profile.suppression_depth * (sup_overlap / kIntervalMinutes));
      const long long delta_int = std::llround(delta);
      if (delta_int == 0) continue;
      const double updated = std::max(0.0, baseline + static_cast<double>(delta_int));
      flows[at] = updated;
      effects.push_back(InjectedEffect{od, day, k, static_cast<double>(delta_int)});
    }
  }
  ODPanel disrupted(panel.od_pairs(), panel.day_meta(), panel.n_intervals(), std::move(flows));
  return {std::move(disrupted), std::move(effects)};
}

Scenario build_scenario(const ScenarioSpec& spec) {
  spec.validate();
  Scenario out;
  out.lines = generate_lines(spec.sim);
  out.graph = StationGraph::from_lines(out.lines);
  out.panel = generate_panel(out.graph, spec.sim);

  // Incidents alternate lines and march backwards from the final day; the
  // final-day incident is the deployment target, earlier ones are history.
  for (int i = 0; i < spec.n_incidents; ++i) {
    const int back = spec.n_incidents - 1 - i;
    IncidentRecord rec;
    rec.incident_id = "INC" + std::to_string(i);
    const std::size_t line_idx = static_cast<std::size_t>(i) %
                                 static_cast<std::size_t>(spec.sim.n_lines);
    rec.line_id = out.lines[line_idx].line_id;
    const std::vector<std::string>& line_stations = out.lines[line_idx].stations;
    const std::size_t mid = line_stations.size() / 2;
    rec.affected_stations.push_back(line_stations[mid - 1]);
    rec.affected_stations.push_back(line_stations[mid]);
    rec.day_index = spec.sim.n_days - 1 - back * spec.incident_day_gap;
    rec.start_min = spec.incident_start_min;
    rec.end_min = spec.incident_start_min + spec.incident_duration_min;
    rec.max_delay = 10.0 + 5.0 * (i % 3);
    rec.delay_5_num = 2 + i % 4;
    rec.cancel_num = i % 3;
    rec.evacuate_num = i % 2;
    out.incidents.push_back(std::move(rec));
  }
  for (const IncidentRecord& rec : out.incidents) {
    auto [next, truths] = inject_incident(out.panel, out.graph, rec, spec.profile);
    out.panel = std::move(next);
    out.truths.insert(out.truths.end(), truths.begin(), truths.end());
  }
  return out;
}

void save_injected_effects(const std::vector<InjectedEffect>& effects,
                           const std::filesystem::path& path) {
  std::string text = "od_id,day_index,interval_index,true_effect\n";
  std::vector<InjectedEffect> sorted = effects;
  std::sort(sorted.begin(), sorted.end(), [](const InjectedEffect& a, const InjectedEffect& b) {
    return std::tie(a.od, a.day, a.interval) < std::tie(b.od, b.day, b.interval);
  });
  for (const InjectedEffect& e : sorted) {
    csv::append_row(text, {csv::format_int(e.od), csv::format_int(e.day),
                           csv::format_int(e.interval), csv::format_double(e.true_effect)});
  }
  csv::write_text_atomic(path, text);
}

std::vector<InjectedEffect> load_injected_effects(const std::filesystem::path& path) {
  const csv::Table table = csv::read_table(path);
  csv::require_header(table, {"od_id", "day_index", "interval_index", "true_effect"});
  std::vector<InjectedEffect> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const std::vector<std::string>& row = table.rows[i];
    const std::string where = table.where(i);
    InjectedEffect e;
    e.od = static_cast<int>(csv::parse_int(row[0], where + " od_id"));
    e.day = static_cast<int>(csv::parse_int(row[1], where + " day_index"));
    e.interval = static_cast<int>(csv::parse_int(row[2], where + " interval_index"));
    e.true_effect = csv::parse_double(row[3], where + " true_effect");
    out.push_back(e);
  }
  return out;
}

}  // namespace odflow

#include "odflow/panel.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "odflow/csv.hpp"
#include "odflow/errors.hpp"

namespace odflow {

namespace {

std::string cell_name(int od, int day, int interval) {
  return "(od=" + std::to_string(od) + ", day=" + std::to_string(day) +
         ", interval=" + std::to_string(interval) + ")";
}

}  // namespace

ODPanel::ODPanel(std::vector<ODPair> od_pairs, std::vector<DayMeta> day_meta,
                 int n_intervals, std::vector<double> flows)
    : od_pairs_(std::move(od_pairs)),
      day_meta_(std::move(day_meta)),
      n_intervals_(n_intervals),
      flows_(std::move(flows)) {
  if (od_pairs_.empty()) throw DomainError("panel needs at least one OD pair");
  if (day_meta_.empty()) throw DomainError("panel needs at least one day");
  if (n_intervals_ <= 0) throw DomainError("panel needs at least one interval per day");
  const std::size_t expected = static_cast<std::size_t>(od_pairs_.size()) *
                               static_cast<std::size_t>(day_meta_.size()) *
                               static_cast<std::size_t>(n_intervals_);
  if (flows_.size() != expected) {
    throw ShapeError("flow matrix has " + std::to_string(flows_.size()) +
                     " cells, expected " + std::to_string(expected));
  }
  for (std::size_t i = 0; i < day_meta_.size(); ++i) {
    if (day_meta_[i].day_index != static_cast<int>(i)) {
      throw DomainError("day_index values must be contiguous from 0; position " +
                        std::to_string(i) + " holds day_index " +
                        std::to_string(day_meta_[i].day_index));
    }
  }
  for (const double v : flows_) {
    if (!std::isfinite(v)) throw DomainError("flow values must be finite");
    if (v < 0.0) throw DomainError("flow values must be nonnegative");
  }
}

std::size_t ODPanel::offset(int od, int day, int interval) const {
  if (od < 0 || od >= n_ods()) throw LookupError("od index out of range: " + std::to_string(od));
  if (day < 0 || day >= n_days()) throw LookupError("day index out of range: " + std::to_string(day));
  if (interval < 0 || interval >= n_intervals_) {
    throw LookupError("interval index out of range: " + std::to_string(interval));
  }
  return (static_cast<std::size_t>(od) * static_cast<std::size_t>(n_days()) +
          static_cast<std::size_t>(day)) *
             static_cast<std::size_t>(n_intervals_) +
         static_cast<std::size_t>(interval);
}

const ODPair& ODPanel::od_pair(int od) const {
  if (od < 0 || od >= n_ods()) throw LookupError("od index out of range: " + std::to_string(od));
  return od_pairs_[static_cast<std::size_t>(od)];
}

const DayMeta& ODPanel::day(int day) const {
  if (day < 0 || day >= n_days()) throw LookupError("day index out of range: " + std::to_string(day));
  return day_meta_[static_cast<std::size_t>(day)];
}

double ODPanel::flow(int od, int day, int interval) const {
  return flows_[offset(od, day, interval)];
}

void IncidentRecord::validate() const {
  if (incident_id.empty()) throw DomainError("incident_id must be nonempty");
  if (affected_stations.empty()) {
    throw DomainError("incident " + incident_id + ": affected_stations must be nonempty");
  }
  if (day_index < 0) throw DomainError("incident " + incident_id + ": day_index must be >= 0");
  if (!(end_min > start_min)) {
    throw DomainError("incident " + incident_id + ": end_min must exceed start_min");
  }
  if (start_min < 0.0) throw DomainError("incident " + incident_id + ": start_min must be >= 0");
  if (max_delay < 0.0 || delay_5_num < 0 || cancel_num < 0 || evacuate_num < 0) {
    throw DomainError("incident " + incident_id + ": counts and delays must be >= 0");
  }
}

ODPanel load_panel(const std::filesystem::path& flows_path,
                   const std::filesystem::path& meta_path) {
  // Day metadata first: it fixes n_days.
  const csv::Table meta = csv::read_table(meta_path);
  csv::require_header(meta, {"day_index", "date", "is_weekend", "is_sunny"});
  std::vector<DayMeta> day_meta(meta.rows.size());
  std::vector<bool> day_seen(meta.rows.size(), false);
  for (std::size_t r = 0; r < meta.rows.size(); ++r) {
    const auto& row = meta.rows[r];
    const std::string where = meta.where(r);
    const long long day = csv::parse_int(row[0], where);
    if (day < 0 || day >= static_cast<long long>(meta.rows.size())) {
      throw DomainError(where + ": day_index " + std::to_string(day) +
                        " outside contiguous range 0.." + std::to_string(meta.rows.size() - 1));
    }
    if (day_seen[static_cast<std::size_t>(day)]) {
      throw DomainError(where + ": duplicate day_index " + std::to_string(day));
    }
    day_seen[static_cast<std::size_t>(day)] = true;
    DayMeta& m = day_meta[static_cast<std::size_t>(day)];
    m.day_index = static_cast<int>(day);
    m.date_label = row[1];
    m.is_weekend = csv::parse_bool01(row[2], where);
    m.is_sunny = csv::parse_bool01(row[3], where);
  }
  const int n_days = static_cast<int>(day_meta.size());

  const csv::Table table = csv::read_table(flows_path);
  csv::require_header(table,
                      {"od_id", "origin", "destination", "day_index", "interval_index", "count"});
  if (table.rows.empty()) throw DomainError(flows_path.string() + ": no flow rows");

  // Pass 1: establish dimensions.
  long long max_od = -1;
  long long max_interval = -1;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string where = table.where(r);
    const long long od = csv::parse_int(table.rows[r][0], where);
    const long long interval = csv::parse_int(table.rows[r][4], where);
    if (od < 0) throw DomainError(where + ": od_id must be >= 0");
    if (interval < 0) throw DomainError(where + ": interval_index must be >= 0");
    max_od = std::max(max_od, od);
    max_interval = std::max(max_interval, interval);
  }
  const int n_ods = static_cast<int>(max_od + 1);
  const int n_intervals = static_cast<int>(max_interval + 1);

  // Pass 2: fill cells, tracking duplicates and OD naming consistency.
  std::vector<ODPair> od_pairs(static_cast<std::size_t>(n_ods));
  std::vector<bool> od_named(static_cast<std::size_t>(n_ods), false);
  const std::size_t n_cells = static_cast<std::size_t>(n_ods) *
                              static_cast<std::size_t>(n_days) *
                              static_cast<std::size_t>(n_intervals);
  std::vector<double> flows(n_cells, 0.0);
  std::vector<bool> filled(n_cells, false);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = table.where(r);
    const int od = static_cast<int>(csv::parse_int(row[0], where));
    const int day = static_cast<int>(csv::parse_int(row[3], where));
    const int interval = static_cast<int>(csv::parse_int(row[4], where));
    if (day < 0 || day >= n_days) {
      throw DomainError(where + ": day_index " + std::to_string(day) +
                        " not present in the day-metadata file");
    }
    const double count = csv::parse_double(row[5], where);
    if (!std::isfinite(count)) throw DomainError(where + ": count must be finite");
    if (count < 0.0) throw DomainError(where + ": count must be nonnegative");
    ODPair pair{row[1], row[2]};
    auto& slot = od_pairs[static_cast<std::size_t>(od)];
    if (od_named[static_cast<std::size_t>(od)]) {
      if (!(slot == pair)) {
        throw ParseError(where + ": od_id " + std::to_string(od) +
                         " maps to conflicting station pairs");
      }
    } else {
      slot = std::move(pair);
      od_named[static_cast<std::size_t>(od)] = true;
    }
    const std::size_t idx = (static_cast<std::size_t>(od) * static_cast<std::size_t>(n_days) +
                             static_cast<std::size_t>(day)) *
                                static_cast<std::size_t>(n_intervals) +
                            static_cast<std::size_t>(interval);
    if (filled[idx]) {
      throw DuplicateCellError(where + ": duplicate cell " + cell_name(od, day, interval));
    }
    filled[idx] = true;
    flows[idx] = count;
  }
  for (int od = 0; od < n_ods; ++od) {
    if (!od_named[static_cast<std::size_t>(od)]) {
      throw DomainError(flows_path.string() + ": od_id range has a gap at " + std::to_string(od));
    }
  }
  for (std::size_t idx = 0; idx < n_cells; ++idx) {
    if (!filled[idx]) {
      const int interval = static_cast<int>(idx % static_cast<std::size_t>(n_intervals));
      const int day = static_cast<int>((idx / static_cast<std::size_t>(n_intervals)) %
                                       static_cast<std::size_t>(n_days));
      const int od = static_cast<int>(idx / (static_cast<std::size_t>(n_intervals) *
                                             static_cast<std::size_t>(n_days)));
      throw DomainError(flows_path.string() + ": missing cell " + cell_name(od, day, interval));
    }
  }
  return ODPanel(std::move(od_pairs), std::move(day_meta), n_intervals, std::move(flows));
}

void save_panel(const ODPanel& panel, const std::filesystem::path& flows_path,
                const std::filesystem::path& meta_path) {
  std::string meta_out = "day_index,date,is_weekend,is_sunny\n";
  for (const DayMeta& m : panel.day_meta()) {
    csv::append_row(meta_out, {csv::format_int(m.day_index), m.date_label,
                               m.is_weekend ? "1" : "0", m.is_sunny ? "1" : "0"});
  }
  csv::write_text_atomic(meta_path, meta_out);

  std::string out = "od_id,origin,destination,day_index,interval_index,count\n";
  for (int od = 0; od < panel.n_ods(); ++od) {
    const ODPair& pair = panel.od_pair(od);
    for (int day = 0; day < panel.n_days(); ++day) {
      for (int k = 0; k < panel.n_intervals(); ++k) {
        csv::append_row(out, {csv::format_int(od), pair.origin, pair.destination,
                              csv::format_int(day), csv::format_int(k),
                              csv::format_double(panel.flow(od, day, k))});
      }
    }
  }
  csv::write_text_atomic(flows_path, out);
}

std::vector<IncidentRecord> load_incidents(const std::filesystem::path& path) {
  const csv::Table table = csv::read_table(path);
  csv::require_header(table, {"incident_id", "line_id", "affected_stations", "day_index",
                              "start_min", "end_min", "max_delay", "delay_5_num", "cancel_num",
                              "evacuate_num"});
  std::vector<IncidentRecord> incidents;
  incidents.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = table.where(r);
    IncidentRecord inc;
    inc.incident_id = row[0];
    inc.line_id = row[1];
    for (const auto part : csv::split(row[2], '|')) {
      if (part.empty()) throw ParseError(where + ": empty station id in affected_stations");
      inc.affected_stations.emplace_back(part);
    }
    inc.day_index = static_cast<int>(csv::parse_int(row[3], where));
    inc.start_min = csv::parse_double(row[4], where);
    inc.end_min = csv::parse_double(row[5], where);
    inc.max_delay = csv::parse_double(row[6], where);
    inc.delay_5_num = static_cast<int>(csv::parse_int(row[7], where));
    inc.cancel_num = static_cast<int>(csv::parse_int(row[8], where));
    inc.evacuate_num = static_cast<int>(csv::parse_int(row[9], where));
    inc.validate();
    incidents.push_back(std::move(inc));
  }
  return incidents;
}

void save_incidents(const std::vector<IncidentRecord>& incidents,
                    const std::filesystem::path& path) {
  std::string out =
      "incident_id,line_id,affected_stations,day_index,start_min,end_min,max_delay,"
      "delay_5_num,cancel_num,evacuate_num\n";
  for (const IncidentRecord& inc : incidents) {
    inc.validate();
    std::string stations;
    for (std::size_t i = 0; i < inc.affected_stations.size(); ++i) {
      if (i) stations += '|';
      stations += inc.affected_stations[i];
    }
    csv::append_row(out, {inc.incident_id, inc.line_id, stations, csv::format_int(inc.day_index),
                          csv::format_double(inc.start_min), csv::format_double(inc.end_min),
                          csv::format_double(inc.max_delay), csv::format_int(inc.delay_5_num),
                          csv::format_int(inc.cancel_num), csv::format_int(inc.evacuate_num)});
  }
  csv::write_text_atomic(path, out);
}

void save_effects(const std::vector<CausalEffectEstimate>& estimates,
                  const std::filesystem::path& path) {
  std::vector<CausalEffectEstimate> sorted = estimates;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.od != b.od) return a.od < b.od;
    if (a.interval != b.interval) return a.interval < b.interval;
    return a.day < b.day;
  });
  std::string out = "od_id,day_index,interval_index,observed,counterfactual,effect,p_value\n";
  for (const CausalEffectEstimate& e : sorted) {
    csv::append_row(out, {csv::format_int(e.od), csv::format_int(e.day),
                          csv::format_int(e.interval), csv::format_double(e.observed),
                          csv::format_double(e.counterfactual), csv::format_double(e.effect),
                          csv::format_double(e.p_value)});
  }
  csv::write_text_atomic(path, out);
}

std::vector<CausalEffectEstimate> load_effects(const std::filesystem::path& path) {
  const csv::Table table = csv::read_table(path);
  csv::require_header(table, {"od_id", "day_index", "interval_index", "observed",
                              "counterfactual", "effect", "p_value"});
  std::vector<CausalEffectEstimate> estimates;
  estimates.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = table.where(r);
    CausalEffectEstimate e;
    e.od = static_cast<int>(csv::parse_int(row[0], where));
    e.day = static_cast<int>(csv::parse_int(row[1], where));
    e.interval = static_cast<int>(csv::parse_int(row[2], where));
    e.observed = csv::parse_double(row[3], where);
    e.counterfactual = csv::parse_double(row[4], where);
    e.effect = csv::parse_double(row[5], where);
    e.p_value = csv::parse_double(row[6], where);
    estimates.push_back(e);
  }
  return estimates;
}

CovariateVector covariates_at(const ODPanel& panel, int od, int day, int interval) {
  if (interval < 2) {
    throw InsufficientHistoryError("covariates need two lagged intervals; interval " +
                                   std::to_string(interval) + " is too early");
  }
  const DayMeta& meta = panel.day(day);
  CovariateVector cov;
  cov.schema = {"is_sunny", "is_weekend", "lag1_flow", "lag2_flow"};
  cov.values = {meta.is_sunny ? 1.0 : 0.0, meta.is_weekend ? 1.0 : 0.0,
                panel.flow(od, day, interval - 1), panel.flow(od, day, interval - 2)};
  return cov;
}

}  // namespace odflow

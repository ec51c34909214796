#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace odflow {

// Fixed temporal granularity: every interval index spans 30 minutes.
inline constexpr int kIntervalMinutes = 30;

// Per-day context shared by every OD series: calendar flag, weather flag, and
// a display date. All logic is keyed on day_index; the date is metadata only.
struct DayMeta {
  int day_index = 0;
  bool is_weekend = false;
  bool is_sunny = true;
  std::string date_label;  // ISO-8601, e.g. "2024-03-18"
};

struct ODPair {
  std::string origin;
  std::string destination;

  bool operator==(const ODPair&) const = default;
};

// Dense panel of passenger counts indexed (od, day, interval). Intervals are
// fixed-length slots within a day (30 minutes in the shipped scenarios).
// Immutable after construction; safe to share across threads.
class ODPanel {
 public:
  ODPanel() = default;
  // Takes flows in row-major (od, day, interval) order. Validates shape,
  // nonnegativity and finiteness, and day_index contiguity.
  ODPanel(std::vector<ODPair> od_pairs, std::vector<DayMeta> day_meta,
          int n_intervals, std::vector<double> flows);

  int n_ods() const { return static_cast<int>(od_pairs_.size()); }
  int n_days() const { return static_cast<int>(day_meta_.size()); }
  int n_intervals() const { return n_intervals_; }

  const std::vector<ODPair>& od_pairs() const { return od_pairs_; }
  const std::vector<DayMeta>& day_meta() const { return day_meta_; }

  const ODPair& od_pair(int od) const;
  const DayMeta& day(int day) const;
  double flow(int od, int day, int interval) const;

  // Raw row-major storage, exposed so derived panels can be built by
  // transforming a copy (the panel itself is never mutated in place).
  const std::vector<double>& flows() const { return flows_; }

  // Bounds-checked index into flows() for cell (od, day, interval).
  std::size_t offset(int od, int day, int interval) const;

 private:
  std::vector<ODPair> od_pairs_;
  std::vector<DayMeta> day_meta_;
  int n_intervals_ = 0;
  std::vector<double> flows_;
};

// One service disruption. Times are minutes since the start of day day_index.
struct IncidentRecord {
  std::string incident_id;
  std::string line_id;
  std::vector<std::string> affected_stations;  // contiguous stretch of a line
  int day_index = 0;
  double start_min = 0.0;
  double end_min = 0.0;
  double max_delay = 0.0;  // minutes
  int delay_5_num = 0;     // trains delayed >5 minutes
  int cancel_num = 0;      // cancelled trains
  int evacuate_num = 0;    // evacuated (cleared) trains

  // Derived, so the "count matches the station list" invariant cannot drift.
  int influence_station_num() const { return static_cast<int>(affected_stations.size()); }

  // Throws DomainError on violated invariants (end ≤ start, negative counts,
  // empty station list, negative day index).
  void validate() const;
};

// Ordered feature vector handed to the synthetic-control matcher.
struct CovariateVector {
  std::vector<double> values;
  std::vector<std::string> schema;
};

// Effect of one treated cell: the observed flow minus its synthetic
// counterfactual, plus the placebo-test p-value once the cell has been
// significance-tested (NaN until then).
struct CausalEffectEstimate {
  int od = 0;
  int day = 0;
  int interval = 0;
  double observed = 0.0;
  double counterfactual = 0.0;
  double effect = 0.0;
  double p_value = std::numeric_limits<double>::quiet_NaN();
};

// ---- CSV ingestion/serialization (schemas documented in README) ----

// flows CSV: od_id,origin,destination,day_index,interval_index,count
// meta  CSV: day_index,date,is_weekend,is_sunny          (booleans 0/1)
ODPanel load_panel(const std::filesystem::path& flows_path,
                   const std::filesystem::path& meta_path);
void save_panel(const ODPanel& panel, const std::filesystem::path& flows_path,
                const std::filesystem::path& meta_path);

// incidents CSV: incident_id,line_id,affected_stations,day_index,start_min,
//                end_min,max_delay,delay_5_num,cancel_num,evacuate_num
// affected_stations is a '|'-separated station list.
std::vector<IncidentRecord> load_incidents(const std::filesystem::path& path);
void save_incidents(const std::vector<IncidentRecord>& incidents,
                    const std::filesystem::path& path);

// effects CSV: od_id,day_index,interval_index,observed,counterfactual,effect,p_value
// Rows are written sorted by (od, interval, day).
void save_effects(const std::vector<CausalEffectEstimate>& estimates,
                  const std::filesystem::path& path);
std::vector<CausalEffectEstimate> load_effects(const std::filesystem::path& path);

// Matching covariates for one cell: (is_sunny, is_weekend, lag1_flow,
// lag2_flow) where lag1/lag2 are the same OD's flows at interval-1/interval-2
// on the same day. Requires interval ≥ 2.
CovariateVector covariates_at(const ODPanel& panel, int od, int day, int interval);

}  // namespace odflow

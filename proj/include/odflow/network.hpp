#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace odflow {

// One metro line as an ordered station sequence. Consecutive stations are
// connected; a station id appearing on several lines becomes a transfer node.
struct LineDef {
  std::string line_id;
  std::vector<std::string> stations;
};

// Immutable undirected station graph with hop-count queries. Adjacency lists
// are kept in lexicographic station-id order so path tie-breaking is
// deterministic (smallest station-id sequence wins).
class StationGraph {
 public:
  static StationGraph from_lines(const std::vector<LineDef>& lines);

  bool has_station(const std::string& id) const;
  const std::vector<std::string>& stations() const { return station_ids_; }
  // Line ids a station belongs to, sorted. Throws LookupError if unknown.
  const std::vector<std::string>& lines_of(const std::string& id) const;

  // Minimum hop count from `from` to the nearest member of `to_set`
  // (0 when `from` is itself a member); nullopt when no member is reachable.
  std::optional<int> shortest_hops(const std::string& from,
                                   const std::vector<std::string>& to_set) const;

  // One minimum-hop path o -> d including both endpoints. Among equal-length
  // paths, returns the lexicographically smallest station-id sequence.
  // nullopt when d is unreachable from o.
  std::optional<std::vector<std::string>> shortest_path(const std::string& o,
                                                        const std::string& d) const;

  // Fraction of the o->d shortest path's stations that lie inside
  // incident_stations; nullopt when o and d are disconnected.
  std::optional<double> overlap_proportion(const std::string& o, const std::string& d,
                                           const std::vector<std::string>& incident_stations) const;

 private:
  int index_of(const std::string& id) const;  // throws LookupError

  std::vector<std::string> station_ids_;       // sorted
  std::vector<std::vector<int>> adjacency_;    // sorted neighbor indices
  std::vector<std::vector<std::string>> line_of_;
};

// network CSV: line_id,seq,station_id. Rows with the same line_id, ordered by
// seq, define that line's station sequence.
StationGraph load_network(const std::filesystem::path& path);
std::vector<LineDef> load_network_lines(const std::filesystem::path& path);
void save_network(const std::vector<LineDef>& lines, const std::filesystem::path& path);

}  // namespace odflow

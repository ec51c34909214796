#include "odflow/network.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include "odflow/csv.hpp"
#include "odflow/errors.hpp"

namespace odflow {

StationGraph StationGraph::from_lines(const std::vector<LineDef>& lines) {
  if (lines.empty()) throw DomainError("network needs at least one line");
  std::set<std::string> ids;
  for (const LineDef& line : lines) {
    if (line.line_id.empty()) throw DomainError("line_id must be nonempty");
    if (line.stations.size() < 2) {
      throw DomainError("line " + line.line_id + " needs at least 2 stations");
    }
    std::set<std::string> seen;
    for (const std::string& s : line.stations) {
      if (s.empty()) throw DomainError("line " + line.line_id + " has an empty station id");
      if (!seen.insert(s).second) {
        throw DomainError("line " + line.line_id + " visits station " + s + " twice");
      }
      ids.insert(s);
    }
  }

  StationGraph graph;
  graph.station_ids_.assign(ids.begin(), ids.end());  // sorted by std::set
  graph.adjacency_.resize(graph.station_ids_.size());
  graph.line_of_.resize(graph.station_ids_.size());

  std::vector<std::set<int>> neighbor_sets(graph.station_ids_.size());
  for (const LineDef& line : lines) {
    for (std::size_t i = 0; i < line.stations.size(); ++i) {
      const int u = graph.index_of(line.stations[i]);
      auto& lines_here = graph.line_of_[static_cast<std::size_t>(u)];
      if (std::find(lines_here.begin(), lines_here.end(), line.line_id) == lines_here.end()) {
        lines_here.push_back(line.line_id);
      }
      if (i + 1 < line.stations.size()) {
        const int v = graph.index_of(line.stations[i + 1]);
        if (u == v) {
          throw DomainError("line " + line.line_id + " repeats station " + line.stations[i] +
                            " consecutively (self-loop)");
        }
        neighbor_sets[static_cast<std::size_t>(u)].insert(v);
        neighbor_sets[static_cast<std::size_t>(v)].insert(u);
      }
    }
  }
  for (std::size_t i = 0; i < neighbor_sets.size(); ++i) {
    // Station ids are sorted, so sorted indices == lexicographic neighbor order.
    graph.adjacency_[i].assign(neighbor_sets[i].begin(), neighbor_sets[i].end());
    std::sort(graph.line_of_[i].begin(), graph.line_of_[i].end());
  }
  return graph;
}

int StationGraph::index_of(const std::string& id) const {
  const auto it = std::lower_bound(station_ids_.begin(), station_ids_.end(), id);
  if (it == station_ids_.end() || *it != id) {
    throw LookupError("unknown station id: " + id);
  }
  return static_cast<int>(it - station_ids_.begin());
}

bool StationGraph::has_station(const std::string& id) const {
  return std::binary_search(station_ids_.begin(), station_ids_.end(), id);
}

const std::vector<std::string>& StationGraph::lines_of(const std::string& id) const {
  return line_of_[static_cast<std::size_t>(index_of(id))];
}

std::optional<int> StationGraph::shortest_hops(const std::string& from,
                                               const std::vector<std::string>& to_set) const {
  if (to_set.empty()) throw DomainError("shortest_hops needs a nonempty target set");
  const int src = index_of(from);
  std::vector<bool> target(station_ids_.size(), false);
  for (const std::string& t : to_set) target[static_cast<std::size_t>(index_of(t))] = true;
  if (target[static_cast<std::size_t>(src)]) return 0;

  std::vector<int> dist(station_ids_.size(), -1);
  dist[static_cast<std::size_t>(src)] = 0;
  std::deque<int> queue{src};
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (const int v : adjacency_[static_cast<std::size_t>(u)]) {
      if (dist[static_cast<std::size_t>(v)] != -1) continue;
      dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
      if (target[static_cast<std::size_t>(v)]) return dist[static_cast<std::size_t>(v)];
      queue.push_back(v);
    }
  }
  return std::nullopt;
}

std::optional<std::vector<std::string>> StationGraph::shortest_path(const std::string& o,
                                                                    const std::string& d) const {
  const int src = index_of(o);
  const int dst = index_of(d);
  if (src == dst) throw DomainError("shortest_path requires distinct endpoints, got " + o);

  // Breadth-first search with FIFO dequeue and lexicographically sorted
  // adjacency: within each layer nodes are discovered in the lexicographic
  // order of their minimal paths, so taking the first-discovered parent yields
  // the lexicographically smallest shortest path overall.
  std::vector<int> parent(station_ids_.size(), -2);  // -2 unvisited, -1 root
  parent[static_cast<std::size_t>(src)] = -1;
  std::deque<int> queue{src};
  bool found = false;
  while (!queue.empty() && !found) {
    const int u = queue.front();
    queue.pop_front();
    for (const int v : adjacency_[static_cast<std::size_t>(u)]) {
      if (parent[static_cast<std::size_t>(v)] != -2) continue;
      parent[static_cast<std::size_t>(v)] = u;
      if (v == dst) {
        found = true;
        break;
      }
      queue.push_back(v);
    }
  }
  if (!found) return std::nullopt;
  std::vector<std::string> path;
  for (int v = dst; v != -1; v = parent[static_cast<std::size_t>(v)]) {
    path.push_back(station_ids_[static_cast<std::size_t>(v)]);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::optional<double> StationGraph::overlap_proportion(
    const std::string& o, const std::string& d,
    const std::vector<std::string>& incident_stations) const {
  const auto path = shortest_path(o, d);
  if (!path) return std::nullopt;
  std::set<std::string> incident(incident_stations.begin(), incident_stations.end());
  for (const std::string& s : incident) index_of(s);  // validate ids
  std::size_t inside = 0;
  for (const std::string& s : *path) inside += incident.count(s);
  return static_cast<double>(inside) / static_cast<double>(path->size());
}

std::vector<LineDef> load_network_lines(const std::filesystem::path& path) {
  const csv::Table table = csv::read_table(path);
  csv::require_header(table, {"line_id", "seq", "station_id"});
  // Group by line (first-appearance order), position stations by seq.
  std::vector<std::string> line_order;
  std::map<std::string, std::map<long long, std::string>> by_line;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = table.where(r);
    const std::string& line_id = row[0];
    const long long seq = csv::parse_int(row[1], where);
    if (line_id.empty()) throw ParseError(where + ": empty line_id");
    if (row[2].empty()) throw ParseError(where + ": empty station_id");
    auto [it, inserted] = by_line.try_emplace(line_id);
    if (inserted) line_order.push_back(line_id);
    if (!it->second.emplace(seq, row[2]).second) {
      throw ParseError(where + ": duplicate seq " + std::to_string(seq) + " on line " + line_id);
    }
  }
  std::vector<LineDef> lines;
  lines.reserve(line_order.size());
  for (const std::string& line_id : line_order) {
    LineDef def;
    def.line_id = line_id;
    for (auto& [seq, station] : by_line[line_id]) def.stations.push_back(std::move(station));
    lines.push_back(std::move(def));
  }
  return lines;
}

StationGraph load_network(const std::filesystem::path& path) {
  return StationGraph::from_lines(load_network_lines(path));
}

void save_network(const std::vector<LineDef>& lines, const std::filesystem::path& path) {
  std::string out = "line_id,seq,station_id\n";
  for (const LineDef& line : lines) {
    for (std::size_t i = 0; i < line.stations.size(); ++i) {
      csv::append_row(out, {line.line_id, csv::format_int(static_cast<long long>(i)),
                            line.stations[i]});
    }
  }
  csv::write_text_atomic(path, out);
}

}  // namespace odflow

#include <doctest.h>

#include <algorithm>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "odflow/csv.hpp"
#include "odflow/errors.hpp"
#include "odflow/network.hpp"
#include "temp_dir.hpp"

using namespace odflow;
using odflow::testing::TempDir;

namespace {

// Independent breadth-first-search distance oracle over an explicit edge list.
std::map<std::string, int> bfs_distances(const std::vector<std::pair<std::string, std::string>>& edges,
                                         const std::string& from) {
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::map<std::string, int> dist;
  std::queue<std::string> frontier;
  dist[from] = 0;
  frontier.push(from);
  while (!frontier.empty()) {
    const auto cur = frontier.front();
    frontier.pop();
    for (const auto& next : adj[cur]) {
      if (!dist.count(next)) {
        dist[next] = dist[cur] + 1;
        frontier.push(next);
      }
    }
  }
  return dist;
}

std::vector<std::pair<std::string, std::string>> line_edges(const std::vector<LineDef>& lines) {
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& line : lines) {
    for (std::size_t i = 1; i < line.stations.size(); ++i) {
      edges.emplace_back(line.stations[i - 1], line.stations[i]);
    }
  }
  return edges;
}

}  // namespace

TEST_CASE("five-station line distances match the hand oracle") {
  const std::vector<LineDef> lines{{"L1", {"A", "B", "C", "D", "E"}}};
  const auto graph = StationGraph::from_lines(lines);
  CHECK(graph.shortest_hops("A", {"D", "E"}) == 3);
  CHECK(graph.shortest_hops("D", {"D", "E"}) == 0);
  CHECK(graph.shortest_hops("E", {"A"}) == 4);
  CHECK_THROWS_AS(graph.shortest_hops("Z", {"A"}), LookupError);
  CHECK_THROWS_AS((void)graph.shortest_hops("A", {}), DomainError);

  const auto path = graph.shortest_path("A", "D");
  REQUIRE(path.has_value());
  CHECK(*path == std::vector<std::string>{"A", "B", "C", "D"});
  const auto adjacent = graph.shortest_path("B", "C");
  REQUIRE(adjacent.has_value());
  CHECK(*adjacent == std::vector<std::string>{"B", "C"});
}

TEST_CASE("disconnected components are unreachable, not an error") {
  const std::vector<LineDef> lines{{"L1", {"A", "B"}}, {"L2", {"X", "Y"}}};
  const auto graph = StationGraph::from_lines(lines);
  CHECK_FALSE(graph.shortest_hops("A", {"X", "Y"}).has_value());
  CHECK_FALSE(graph.shortest_path("A", "Y").has_value());
  CHECK_FALSE(graph.overlap_proportion("A", "Y", {"X"}).has_value());
  CHECK(graph.shortest_hops("A", {"B", "X"}) == 1);  // nearest reachable member
}

TEST_CASE("equal-length paths break ties toward the smaller station sequence") {
  // Square: A-B-D and A-C-D are both 2 hops; A,B,D < A,C,D lexicographically.
  const std::vector<LineDef> lines{{"L1", {"A", "B", "D"}}, {"L2", {"A", "C", "D"}}};
  const auto graph = StationGraph::from_lines(lines);
  const auto path = graph.shortest_path("A", "D");
  REQUIRE(path.has_value());
  CHECK(*path == std::vector<std::string>{"A", "B", "D"});
  // Reverse direction: D,B,A vs D,C,A -> B side again.
  const auto back = graph.shortest_path("D", "A");
  REQUIRE(back.has_value());
  CHECK(*back == std::vector<std::string>{"D", "B", "A"});
}

TEST_CASE("transfer stations merge lines into one node") {
  const std::vector<LineDef> lines{{"L1", {"A", "B", "C"}}, {"L2", {"X", "B", "Y"}}};
  const auto graph = StationGraph::from_lines(lines);
  CHECK(graph.stations().size() == 5);
  CHECK(graph.shortest_hops("A", {"Y"}) == 2);  // A-B-Y through the transfer
  const auto lb = graph.lines_of("B");
  CHECK(lb == std::vector<std::string>{"L1", "L2"});
  CHECK(graph.lines_of("A") == std::vector<std::string>{"L1"});
  CHECK_THROWS_AS(graph.lines_of("nope"), LookupError);
}

TEST_CASE("overlap proportion counts path stations inside the incident set") {
  const std::vector<LineDef> lines{{"L1", {"A", "B", "C", "D", "E"}}};
  const auto graph = StationGraph::from_lines(lines);
  // Path A..E has 5 stations; {B, D} covers 2 of them.
  CHECK(graph.overlap_proportion("A", "E", {"B", "D"}) == doctest::Approx(0.4));
  CHECK(graph.overlap_proportion("A", "E", {"A", "B", "C", "D", "E"}) == doctest::Approx(1.0));
  CHECK(graph.overlap_proportion("A", "B", {"D", "E"}) == doctest::Approx(0.0));
  // Stations outside the path never count.
  CHECK(graph.overlap_proportion("A", "C", {"D", "E", "B"}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("overlap proportion is monotone in the incident set and bounded") {
  const std::vector<LineDef> lines{{"L1", {"A", "B", "C", "D", "E", "F"}},
                                   {"L2", {"C", "X", "Y"}}};
  const auto graph = StationGraph::from_lines(lines);
  std::mt19937 gen(5);
  const auto& ids = graph.stations();
  for (int trial = 0; trial < 50; ++trial) {
    const auto& o = ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(gen)];
    const auto& d = ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(gen)];
    if (o == d) continue;
    std::vector<std::string> small, big;
    for (const auto& s : ids) {
      const bool in_small = std::uniform_real_distribution<double>(0, 1)(gen) < 0.3;
      if (in_small) small.push_back(s);
      if (in_small || std::uniform_real_distribution<double>(0, 1)(gen) < 0.3) big.push_back(s);
    }
    if (small.empty() || big.empty()) continue;
    const auto p_small = graph.overlap_proportion(o, d, small);
    const auto p_big = graph.overlap_proportion(o, d, big);
    REQUIRE(p_small.has_value());
    REQUIRE(p_big.has_value());
    CHECK(*p_small >= 0.0);
    CHECK(*p_small <= 1.0);
    CHECK(*p_big >= *p_small);  // superset can only add covered stations
  }
}

TEST_CASE("hop distances satisfy the BFS oracle and the triangle inequality") {
  const std::vector<LineDef> lines{{"L1", {"A", "B", "C", "D", "E"}},
                                   {"L2", {"F", "C", "G", "H"}},
                                   {"L3", {"H", "E", "I"}}};
  const auto graph = StationGraph::from_lines(lines);
  const auto edges = line_edges(lines);
  const auto& ids = graph.stations();

  for (const auto& from : ids) {
    const auto oracle = bfs_distances(edges, from);
    for (const auto& to : ids) {
      if (from == to) continue;
      const auto got = graph.shortest_hops(from, {to});
      REQUIRE(got.has_value());
      CHECK(*got == oracle.at(to));
      // Path node count = hops + 1.
      const auto path = graph.shortest_path(from, to);
      REQUIRE(path.has_value());
      CHECK(static_cast<int>(path->size()) == *got + 1);
      CHECK(path->front() == from);
      CHECK(path->back() == to);
    }
  }

  std::mt19937 gen(17);
  std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto& a = ids[pick(gen)];
    const auto& b = ids[pick(gen)];
    const auto& c = ids[pick(gen)];
    const auto ab = a == b ? 0 : *graph.shortest_hops(a, {b});
    const auto bc = b == c ? 0 : *graph.shortest_hops(b, {c});
    const auto ac = a == c ? 0 : *graph.shortest_hops(a, {c});
    CHECK(ac <= ab + bc);
  }
}

TEST_CASE("shortest_hops over a set equals the min over singletons") {
  const std::vector<LineDef> lines{{"L1", {"A", "B", "C", "D", "E"}},
                                   {"L2", {"F", "C", "G", "H"}}};
  const auto graph = StationGraph::from_lines(lines);
  const auto& ids = graph.stations();
  std::mt19937 gen(29);
  for (int trial = 0; trial < 50; ++trial) {
    const auto& from = ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(gen)];
    std::vector<std::string> to_set;
    for (const auto& s : ids) {
      if (std::uniform_real_distribution<double>(0, 1)(gen) < 0.4) to_set.push_back(s);
    }
    if (to_set.empty()) continue;
    int best = 1 << 20;
    for (const auto& t : to_set) {
      const auto h = from == t ? 0 : *graph.shortest_hops(from, {t});
      best = std::min(best, h);
    }
    CHECK(graph.shortest_hops(from, to_set) == best);
  }
}

TEST_CASE("graph construction rejects malformed lines") {
  CHECK_THROWS_AS(StationGraph::from_lines({}), DomainError);
  CHECK_THROWS_AS(StationGraph::from_lines({{"L1", {"A"}}}), DomainError);
  CHECK_THROWS_AS(StationGraph::from_lines({{"L1", {"A", "A"}}}), DomainError);
  CHECK_THROWS_AS(StationGraph::from_lines({{"L1", {"A", "B", "A"}}}), DomainError);
  CHECK_THROWS_AS(StationGraph::from_lines({{"", {"A", "B"}}}), DomainError);
}

TEST_CASE("network CSV round-trip preserves line order and induces transfers") {
  TempDir dir;
  const std::vector<LineDef> lines{{"L1", {"A", "B", "C", "D"}}, {"L2", {"X", "B", "Y"}}};
  const auto path = dir.file("network.csv");
  save_network(lines, path);
  const auto loaded = load_network_lines(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].line_id == "L1");
  CHECK(loaded[0].stations == lines[0].stations);
  CHECK(loaded[1].stations == lines[1].stations);

  const auto graph = load_network(path);
  CHECK(graph.shortest_hops("A", {"Y"}) == 2);  // A-B, transfer at B, B-Y

  // Byte-identical re-save.
  const auto path2 = dir.file("network2.csv");
  save_network(loaded, path2);
  CHECK(csv::read_text_file(path2) == csv::read_text_file(path));

  // Duplicate seq on one line is rejected with the line number.
  const auto bad = dir.file("bad.csv");
  csv::write_text_atomic(bad,
                         "line_id,seq,station_id\nL1,0,A\nL1,1,B\nL1,1,C\n");
  CHECK_THROWS_AS(load_network(bad), ParseError);
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "odflow/csv.hpp"
#include "odflow/errors.hpp"
#include "odflow/panel.hpp"
#include "temp_dir.hpp"

using namespace odflow;
using odflow::testing::TempDir;

namespace {

ODPanel make_random_panel(unsigned seed, int n_ods, int n_days, int n_intervals) {
  std::mt19937 gen(seed);
  std::uniform_int_distribution<int> count(0, 500);
  std::vector<ODPair> ods;
  for (int i = 0; i < n_ods; ++i) {
    ods.push_back({"S" + std::to_string(i), "T" + std::to_string(i)});
  }
  std::vector<DayMeta> days;
  for (int d = 0; d < n_days; ++d) {
    days.push_back({d, d % 7 >= 5, d % 3 != 0, "2024-03-" + std::to_string(10 + d)});
  }
  std::vector<double> flows(static_cast<std::size_t>(n_ods) * n_days * n_intervals);
  for (auto& f : flows) f = static_cast<double>(count(gen));
  return ODPanel(std::move(ods), std::move(days), n_intervals, std::move(flows));
}

}  // namespace

TEST_CASE("format_double emits shortest round-tripping decimal") {
  for (double v : {0.0, 1.0, -1.0, 0.1, 1.0 / 3.0, 1e-17, 123456789.123456789,
                   -2.5e-8, 3.0000000000000004}) {
    const std::string s = csv::format_double(v);
    CHECK(csv::parse_double(s, "test") == v);
  }
  CHECK(csv::format_double(2.0) == "2");
  CHECK(csv::format_double(0.5) == "0.5");
  CHECK(csv::format_int(-42) == "-42");
}

TEST_CASE("strict parsing rejects trailing garbage and empties") {
  CHECK(csv::parse_double("3.5", "t") == 3.5);
  CHECK(csv::parse_int("17", "t") == 17);
  CHECK(csv::parse_bool01("1", "t"));
  CHECK_FALSE(csv::parse_bool01("0", "t"));
  CHECK_THROWS_AS(csv::parse_double("3.5x", "t"), ParseError);
  CHECK_THROWS_AS(csv::parse_double("", "t"), ParseError);
  CHECK_THROWS_AS(csv::parse_int("1.5", "t"), ParseError);
  CHECK_THROWS_AS(csv::parse_bool01("2", "t"), ParseError);
  CHECK_THROWS_AS(csv::parse_bool01("true", "t"), ParseError);
}

TEST_CASE("split keeps empty fields and does not merge separators") {
  const auto parts = csv::split("a,,c", ',');
  REQUIRE(parts.size() == 3);
  CHECK(parts[0] == "a");
  CHECK(parts[1] == "");
  CHECK(parts[2] == "c");
  CHECK(csv::split("", ',').size() == 1);
  CHECK(csv::split("x|y|z", '|').size() == 3);
}

TEST_CASE("read_table enforces rectangular rows and reports line numbers") {
  TempDir dir;
  const auto path = dir.file("bad.csv");
  csv::write_text_atomic(path, "a,b\n1,2\n3\n");
  try {
    csv::read_table(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("require_header is exact and order-sensitive") {
  TempDir dir;
  const auto path = dir.file("t.csv");
  csv::write_text_atomic(path, "a,b\n1,2\n");
  const auto table = csv::read_table(path);
  CHECK_NOTHROW(csv::require_header(table, {"a", "b"}));
  CHECK_THROWS_AS(csv::require_header(table, {"b", "a"}), ParseError);
  CHECK_THROWS_AS(csv::require_header(table, {"a"}), ParseError);
  CHECK(table.col("b") == 1);
  CHECK_THROWS_AS(table.col("missing"), ParseError);
}

TEST_CASE("panel constructor validates shape, finiteness and day order") {
  std::vector<ODPair> ods{{"A", "B"}};
  std::vector<DayMeta> days{{0, false, true, "2024-03-04"}, {1, false, true, "2024-03-05"}};
  CHECK_THROWS_AS(ODPanel(ods, days, 2, std::vector<double>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(ODPanel(ods, days, 2, std::vector<double>{1, 2, 3, -1}), DomainError);
  std::vector<DayMeta> gap{{0, false, true, "a"}, {2, false, true, "b"}};
  CHECK_THROWS_AS(ODPanel(ods, gap, 2, std::vector<double>{1, 2, 3, 4}), DomainError);
  const ODPanel ok(ods, days, 2, std::vector<double>{1, 2, 3, 4});
  CHECK(ok.flow(0, 1, 0) == 3);
  CHECK_THROWS_AS(ok.flow(0, 2, 0), LookupError);
  CHECK_THROWS_AS(ok.flow(1, 0, 0), LookupError);
}

TEST_CASE("covariates example and random-lag oracle") {
  std::vector<ODPair> ods{{"A", "B"}};
  std::vector<DayMeta> days{{0, true, true, "2024-03-09"}};
  // Flows 5, 7 sit at intervals k-2, k-1 for the queried interval k = 2.
  const ODPanel panel(ods, days, 4, std::vector<double>{5, 7, 11, 13});
  const auto cov = covariates_at(panel, 0, 0, 2);
  REQUIRE(cov.values.size() == 4);
  CHECK(cov.schema == std::vector<std::string>{"is_sunny", "is_weekend", "lag1_flow", "lag2_flow"});
  CHECK(cov.values[0] == 1.0);
  CHECK(cov.values[1] == 1.0);
  CHECK(cov.values[2] == 7.0);  // previous interval
  CHECK(cov.values[3] == 5.0);  // two intervals back
  CHECK_THROWS_AS(covariates_at(panel, 0, 0, 0), InsufficientHistoryError);
  CHECK_THROWS_AS(covariates_at(panel, 0, 0, 1), InsufficientHistoryError);

  const auto big = make_random_panel(7, 5, 6, 8);
  std::mt19937 gen(99);
  for (int i = 0; i < 100; ++i) {
    const int od = std::uniform_int_distribution<int>(0, 4)(gen);
    const int day = std::uniform_int_distribution<int>(0, 5)(gen);
    const int k = std::uniform_int_distribution<int>(2, 7)(gen);
    const auto c = covariates_at(big, od, day, k);
    CHECK(c.values[2] == big.flow(od, day, k - 1));
    CHECK(c.values[3] == big.flow(od, day, k - 2));
    CHECK(c.values[0] == (big.day(day).is_sunny ? 1.0 : 0.0));
    CHECK(c.values[1] == (big.day(day).is_weekend ? 1.0 : 0.0));
  }
}

TEST_CASE("panel save/load round-trip is the identity and order-insensitive") {
  TempDir dir;
  const auto panel = make_random_panel(3, 4, 5, 6);
  const auto flows_path = dir.file("flows.csv");
  const auto meta_path = dir.file("meta.csv");
  save_panel(panel, flows_path, meta_path);

  const auto loaded = load_panel(flows_path, meta_path);
  REQUIRE(loaded.n_ods() == panel.n_ods());
  REQUIRE(loaded.n_days() == panel.n_days());
  REQUIRE(loaded.n_intervals() == panel.n_intervals());
  CHECK(loaded.flows() == panel.flows());
  CHECK(loaded.od_pairs() == panel.od_pairs());
  for (int d = 0; d < panel.n_days(); ++d) {
    CHECK(loaded.day(d).is_weekend == panel.day(d).is_weekend);
    CHECK(loaded.day(d).is_sunny == panel.day(d).is_sunny);
    CHECK(loaded.day(d).date_label == panel.day(d).date_label);
  }

  // Shuffle data rows; the loaded panel must be identical.
  auto text = csv::read_text_file(flows_path);
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  std::shuffle(lines.begin() + 1, lines.end(), std::mt19937(11));
  std::string shuffled = lines[0] + "\n";
  for (std::size_t i = 1; i < lines.size(); ++i) shuffled += lines[i] + "\n";
  const auto shuffled_path = dir.file("flows_shuffled.csv");
  csv::write_text_atomic(shuffled_path, shuffled);
  const auto reloaded = load_panel(shuffled_path, meta_path);
  CHECK(reloaded.flows() == panel.flows());
  CHECK(reloaded.od_pairs() == panel.od_pairs());

  // Save -> load -> save is byte-identical.
  const auto flows2 = dir.file("flows2.csv");
  const auto meta2 = dir.file("meta2.csv");
  save_panel(loaded, flows2, meta2);
  CHECK(csv::read_text_file(flows2) == csv::read_text_file(flows_path));
  CHECK(csv::read_text_file(meta2) == csv::read_text_file(meta_path));
}

TEST_CASE("panel loading rejects duplicates, gaps, malformed rows, negatives") {
  TempDir dir;
  const auto meta = dir.file("meta.csv");
  csv::write_text_atomic(meta, "day_index,date,is_weekend,is_sunny\n0,2024-03-04,0,1\n");
  const auto flows = dir.file("flows.csv");

  const std::string header = "od_id,origin,destination,day_index,interval_index,count\n";
  csv::write_text_atomic(flows, header +
                                    "0,A,B,0,0,5\n"
                                    "0,A,B,0,1,6\n"
                                    "0,A,B,0,1,7\n");
  CHECK_THROWS_AS(load_panel(flows, meta), DuplicateCellError);

  // Incomplete grid: od 1 lacks interval 1 while od 0 has it.
  csv::write_text_atomic(flows, header +
                                    "0,A,B,0,0,5\n"
                                    "0,A,B,0,1,6\n"
                                    "1,C,D,0,0,2\n");
  CHECK_THROWS_AS(load_panel(flows, meta), DomainError);

  csv::write_text_atomic(flows, header + "0,A,B,0,zero,5\n");
  try {
    load_panel(flows, meta);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  csv::write_text_atomic(flows, header + "0,A,B,0,0,-3\n");
  CHECK_THROWS_AS(load_panel(flows, meta), DomainError);
}

TEST_CASE("incident record validation and CSV round-trip") {
  IncidentRecord rec;
  rec.incident_id = "I1";
  rec.line_id = "L1";
  rec.affected_stations = {"L1S2", "L1S3"};
  rec.day_index = 4;
  rec.start_min = 255;
  rec.end_min = 345;
  rec.max_delay = 12.5;
  rec.delay_5_num = 3;
  rec.cancel_num = 1;
  rec.evacuate_num = 2;
  CHECK_NOTHROW(rec.validate());
  CHECK(rec.influence_station_num() == 2);

  auto bad = rec;
  bad.end_min = rec.start_min;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = rec;
  bad.affected_stations.clear();
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = rec;
  bad.delay_5_num = -1;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = rec;
  bad.day_index = -1;
  CHECK_THROWS_AS(bad.validate(), DomainError);

  TempDir dir;
  IncidentRecord rec2 = rec;
  rec2.incident_id = "I2";
  rec2.affected_stations = {"L2S1"};
  rec2.day_index = 7;
  const auto path = dir.file("incidents.csv");
  save_incidents({rec, rec2}, path);
  const auto loaded = load_incidents(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].incident_id == "I1");
  CHECK(loaded[0].affected_stations == rec.affected_stations);
  CHECK(loaded[0].start_min == rec.start_min);
  CHECK(loaded[0].max_delay == rec.max_delay);
  CHECK(loaded[1].affected_stations == std::vector<std::string>{"L2S1"});
  CHECK(loaded[1].day_index == 7);

  // Byte-identical re-save.
  const auto path2 = dir.file("incidents2.csv");
  save_incidents(loaded, path2);
  CHECK(csv::read_text_file(path2) == csv::read_text_file(path));
}

TEST_CASE("effects CSV: header-only empty file, sorted rows, identity round-trip") {
  TempDir dir;
  const auto path = dir.file("effects.csv");
  save_effects({}, path);
  CHECK(csv::read_text_file(path) ==
        "od_id,day_index,interval_index,observed,counterfactual,effect,p_value\n");

  std::mt19937 gen(21);
  std::uniform_real_distribution<double> real(-50, 50);
  std::vector<CausalEffectEstimate> est;
  for (int i = 0; i < 40; ++i) {
    CausalEffectEstimate e;
    e.od = std::uniform_int_distribution<int>(0, 5)(gen);
    e.day = std::uniform_int_distribution<int>(0, 9)(gen);
    e.interval = std::uniform_int_distribution<int>(0, 7)(gen);
    e.observed = real(gen);
    e.counterfactual = real(gen);
    e.effect = e.observed - e.counterfactual;
    e.p_value = i % 4 == 0 ? std::numeric_limits<double>::quiet_NaN()
                           : std::uniform_real_distribution<double>(0, 1)(gen);
    est.push_back(e);
  }
  save_effects(est, path);
  const auto loaded = load_effects(path);
  REQUIRE(loaded.size() == est.size());
  // Rows come back sorted by (od, interval, day).
  for (std::size_t i = 1; i < loaded.size(); ++i) {
    const auto a = std::tuple{loaded[i - 1].od, loaded[i - 1].interval, loaded[i - 1].day};
    const auto b = std::tuple{loaded[i].od, loaded[i].interval, loaded[i].day};
    CHECK(a <= b);
  }
  // Identity on every field (after sorting the originals the same way).
  std::sort(est.begin(), est.end(), [](const auto& a, const auto& b) {
    return std::tuple{a.od, a.interval, a.day} < std::tuple{b.od, b.interval, b.day};
  });
  for (std::size_t i = 0; i < est.size(); ++i) {
    CHECK(loaded[i].od == est[i].od);
    CHECK(loaded[i].day == est[i].day);
    CHECK(loaded[i].interval == est[i].interval);
    CHECK(loaded[i].observed == est[i].observed);
    CHECK(loaded[i].counterfactual == est[i].counterfactual);
    CHECK(loaded[i].effect == est[i].effect);
    if (std::isnan(est[i].p_value)) {
      CHECK(std::isnan(loaded[i].p_value));
    } else {
      CHECK(loaded[i].p_value == est[i].p_value);
    }
  }
}

TEST_CASE("write_text_atomic replaces content without partial states") {
  TempDir dir;
  const auto path = dir.file("x.txt");
  csv::write_text_atomic(path, "first");
  csv::write_text_atomic(path, "second");
  CHECK(csv::read_text_file(path) == "second");
  CHECK_THROWS_AS(csv::read_text_file(dir.file("absent.txt")), IoError);
}

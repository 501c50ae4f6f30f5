#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "ssr/csv.hpp"
#include "ssr/ingest.hpp"
#include "ssr/random.hpp"
#include "support.hpp"

using namespace ssr;
using namespace ssr::ingest;

namespace {

RawTable table_of(std::vector<std::vector<std::string>> rows) {
    RawTable t;
    t.column_names = {"a", "b"};
    t.rows = std::move(rows);
    return t;
}

MeasurementRecord meas(const std::string& pid, const std::string& prd, const std::string& kqi) {
    MeasurementRecord m;
    m.id = {pid, prd};
    m.kqi = kqi;
    m.is_monitor = kqi.find("MON") != std::string::npos;
    return m;
}

std::vector<WaferRecord> wafers(std::size_t n) {
    std::vector<WaferRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        WaferRecord w;
        w.id = {"P" + std::to_string(i / 3), "W" + std::to_string(i)};
        w.steps.push_back({static_cast<Timestamp>(i), {}, {}});
        out.push_back(w);
    }
    return out;
}

std::vector<std::string> ids(const std::vector<WaferRecord>& ws) {
    std::vector<std::string> out;
    for (const auto& w : ws) out.push_back(w.id.str());
    return out;
}

}  // namespace

TEST_CASE("csv: header plus three rows") {
    auto t = parse_csv("x,y\n1,2\n3,4\n5,6\n");
    CHECK(t.column_names == std::vector<std::string>{"x", "y"});
    CHECK(t.rows.size() == 3);
    CHECK(t.rows[2][1] == "6");
    CHECK(t.index("y") == 1);
    CHECK_FALSE(t.find("z").has_value());
}

TEST_CASE("csv: ragged row reports its line") {
    try {
        parse_csv("x,y\n1,2\n3\n");
        FAIL("expected CsvError");
    } catch (const CsvError& e) {
        CHECK(std::string(e.what()).starts_with("ragged row at line 3"));
    }
}

TEST_CASE("csv: quoting, CRLF and missing trailing newline") {
    auto t = parse_csv("x,y\r\n\"a,b\",\"say \"\"hi\"\"\"\r\n\"multi\nline\",z");
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][0] == "a,b");
    CHECK(t.rows[0][1] == "say \"hi\"");
    CHECK(t.rows[1][0] == "multi\nline");
    CHECK(t.rows[1][1] == "z");
}

TEST_CASE("csv: missing required column is named") {
    testing::TempDir dir("csv");
    testing::write_file(dir / "t.csv", "x,y\n1,2\n");
    std::vector<std::string> req{"x", "kqi"};
    CHECK_THROWS_WITH_AS(load_table(dir / "t.csv", req), doctest::Contains("'kqi'"), CsvError);
}

TEST_CASE("csv: write then parse is lossless") {
    testing::TempDir dir("csv");
    RawTable t;
    t.column_names = {"a", "b c", "d"};
    t.rows = {{"1", "", "x,y"}, {"\"q\"", "line\nbreak", " pad "}};
    write_table(dir / "t.csv", t);
    auto back = parse_csv(testing::read_file(dir / "t.csv"));
    CHECK(back.column_names == t.column_names);
    CHECK(back.rows == t.rows);
}

TEST_CASE("format_double round trips exactly") {
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        double v;
        std::uint64_t bits = rng();
        std::memcpy(&v, &bits, sizeof v);
        if (!std::isfinite(v)) continue;
        CHECK(parse_double(format_double(v)).value() == v);
    }
    CHECK(format_double(0.5) == "0.5");
    CHECK(std::isnan(*parse_double(format_double(std::nan("")))));
    CHECK(*parse_double(format_double(std::numeric_limits<double>::infinity())) > 0);
    CHECK_FALSE(parse_double("").has_value());
    CHECK_THROWS_AS(parse_double("1.5x"), CsvError);
}

TEST_CASE("empty numeric cell stays missing") {
    RawTable t;
    t.column_names = {"processing_id", "product_id", "timestamp", "s0", "s1", "c0"};
    t.rows = {{"P", "W", "2022-01-01T00:00:00", "", "0", "L"}};
    auto steps = parse_sensor_table(t, {{"s0", "s1"}, {"c0"}});
    const auto& s = steps.at({"P", "W"}).at(0);
    CHECK_FALSE(s.numeric[0].has_value());
    REQUIRE(s.numeric[1].has_value());
    CHECK(*s.numeric[1] == 0.0);
    CHECK(s.categorical[0] == "L");
}

TEST_CASE("dedupe keeps first occurrences") {
    std::vector<std::string> A{"1", "x"}, B{"2", "y"};
    CHECK(dedupe(table_of({A, A, B})).rows == std::vector<std::vector<std::string>>{A, B});
    CHECK(dedupe(table_of({A, B})).rows == std::vector<std::vector<std::string>>{A, B});
    CHECK(dedupe(table_of({A, B, A})).rows == std::vector<std::vector<std::string>>{A, B});
    // Cell boundaries matter: ("1x","") is not ("1","x").
    CHECK(dedupe(table_of({A, {"1x", ""}})).rows.size() == 2);
}

TEST_CASE("split_monitor partitions by flag") {
    auto mon = meas("P", "W1", "KQI-MON-1");
    auto non1 = meas("P", "W2", "KQI-1");
    auto non2 = meas("P", "W3", "KQI-1");
    auto s = split_monitor({mon, non1, non2});
    CHECK(s.monitor == std::vector<MeasurementRecord>{mon});
    CHECK(s.non_monitor == std::vector<MeasurementRecord>{non1, non2});
    auto all = split_monitor({mon, mon});
    CHECK(all.monitor.size() == 2);
    CHECK(all.non_monitor.empty());
}

TEST_CASE("metrology parser classifies by the monitor marker") {
    RawTable t;
    t.column_names = metrology_columns();
    t.rows = {{"P1", "W1", "KQI-MON-1", "T", "S", "E", "PR", "19.3292", "PASS", "", "1", "30"},
              {"P1", "W2", "KQI-1", "T", "S", "E", "PR", "19.3292", "FAIL_AVG_HI", "REWORK", "", ""}};
    auto ms = parse_metrology_table(t, "MON");
    REQUIRE(ms.size() == 2);
    CHECK(ms[0].is_monitor);
    CHECK_FALSE(ms[1].is_monitor);
    CHECK(ms[0].targ_min == 1.0);
    CHECK_FALSE(ms[1].targ_min.has_value());
    CHECK(ms[1].passfail == PassFail::FailAvgHi);
    CHECK(ms[1].inspection == Inspection::Rework);
    CHECK(group_key(ms[0]) == group_key(ms[1]));
    CHECK(parse_metrology_table(t, "NOPE")[0].is_monitor == false);
}

TEST_CASE("limit table uses canonical kqi") {
    RawTable t;
    t.column_names = limit_columns();
    t.rows = {{"KQI-MON-1", "T", "S", "0", "10"}};
    auto lim = parse_limit_table(t, "MON");
    CHECK(lim.at({"KQI-1", "T", "S"}) == std::pair{0.0, 10.0});
}

TEST_CASE("assemble sorts steps, attaches measurements and drops invalid wafers") {
    SensorSteps steps;
    steps[{"P", "W1"}] = {{30, {}, {}}, {10, {}, {}}, {20, {}, {}}};
    for (int i = 0; i < 10; ++i) steps[{"P", "W2"}].push_back({i, {}, {}});
    auto a = assemble_wafers(steps, {meas("P", "W1", "K"), meas("P", "W2", "K"), meas("P", "W9", "K")});
    REQUIRE(a.wafers.size() == 1);
    CHECK(a.wafers[0].steps[0].timestamp == 10);
    CHECK(a.wafers[0].steps[2].timestamp == 30);
    CHECK(a.wafers[0].measurements.size() == 1);
    CHECK(a.orphan_measurements == 1);
    CHECK(a.diagnostics.size() == 1);
}

TEST_CASE("split sizes follow 7:2:1") {
    auto s10 = split_sizes(10);
    CHECK((s10.train == 7 && s10.val == 2 && s10.test == 1));
    auto s100 = split_sizes(100);
    CHECK((s100.train == 70 && s100.val == 20 && s100.test == 10));
    for (std::size_t n = 0; n < 200; ++n) {
        auto s = split_sizes(n);
        CHECK(s.train + s.val + s.test == n);
        CHECK(s.val == n * 2 / 10);
    }
}

TEST_CASE("split is a deterministic partition independent of input order") {
    auto ws = wafers(57);
    auto a = split_train_val_test(ws, 11);
    auto reversed = std::vector<WaferRecord>(ws.rbegin(), ws.rend());
    auto b = split_train_val_test(reversed, 11);
    CHECK(ids(a.train) == ids(b.train));
    CHECK(ids(a.val) == ids(b.val));
    CHECK(ids(a.test) == ids(b.test));

    std::set<std::string> seen;
    for (const auto* part : {&a.train, &a.val, &a.test})
        for (const auto& id : ids(*part)) CHECK(seen.insert(id).second);
    CHECK(seen.size() == ws.size());

    auto c = split_train_val_test(ws, 12);
    CHECK(ids(a.train) != ids(c.train));
}

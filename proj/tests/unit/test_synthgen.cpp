#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "ssr/csv.hpp"
#include "ssr/eval.hpp"
#include "ssr/ingest.hpp"
#include "ssr/synthgen.hpp"
#include "support.hpp"

using namespace ssr;
using namespace ssr::synth;

namespace {

double round4(double v) { return std::round(v * 1e4) / 1e4; }

std::string index_label(const std::string& label) { return label.substr(label.rfind('-') + 1); }

}  // namespace

TEST_CASE("config validation") {
    SynthConfig c;
    CHECK_NOTHROW(c.validate());
    c.step_weights = {0.5, 0.4};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.fail_rate = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.max_batch_wafers = 1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.n_wafers = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("normal quantile and signal helpers") {
    CHECK(two_sided_normal_quantile(0.05) == doctest::Approx(1.959964).epsilon(1e-6));
    CHECK(two_sided_normal_quantile(0.3173105) == doctest::Approx(1.0).epsilon(1e-6));
    // Weights 1, 1, 2 over projections 1, 0, 1: (1 + 0 + 2) / sqrt(6).
    std::vector<std::vector<double>> steps{{1, 0}, {0, 0}, {1, 0}};
    CHECK(sequence_signal(steps, {1, 0}) == doctest::Approx(3 / std::sqrt(6.0)));
    CHECK(sequence_signal({{2, 0}}, {1, 0}) == doctest::Approx(2.0));
}

TEST_CASE("noise-free measurements equal the documented formula") {
    SynthConfig cfg;
    cfg.n_wafers = 600;
    cfg.noise_sd = 0;
    cfg.missing_rate = 0;
    cfg.duplicate_rate = 0;
    cfg.seed = 77;
    auto out = generate(cfg);
    const auto& m = out.manifest;
    auto mu = m["sensor_mu"].get<std::vector<double>>();
    auto sigma = m["sensor_sigma"].get<std::vector<double>>();
    auto a = m["direction"].get<std::vector<double>>();
    auto ko = m["kqi_offsets"].get<std::vector<double>>();
    auto to = m["type_offsets"].get<std::vector<double>>();
    auto so = m["stage_offsets"].get<std::vector<double>>();
    const double base = m["base"].get<double>();
    const double rel = m["config"]["rel_spread"].get<double>();

    std::map<WaferId, std::vector<std::vector<double>>> steps;
    for (const auto& row : out.sensor.rows) {
        std::vector<double> u;
        for (std::size_t j = 0; j < mu.size(); ++j) u.push_back((*parse_double(row[3 + j]) - mu[j]) / sigma[j]);
        steps[{row[0], row[1]}].push_back(u);  // rows are emitted in time order
    }

    std::map<std::string, double> monitor_z;
    std::size_t checked = 0;
    for (const auto& row : out.metrology.rows) {
        const bool monitor = row[2].find("MON") != std::string::npos;
        if (monitor) monitor_z[row[0]] = sequence_signal(steps.at({row[0], row[1]}), a);
        double mean = base + ko[std::stoul(index_label(row[2])) - 1] + to[std::stoul(index_label(row[3])) - 1] +
                      so[std::stoul(index_label(row[4])) - 1];
        double expect = round4(mean + rel * mean * monitor_z.at(row[0]));
        CHECK(*parse_double(row[7]) == expect);
        ++checked;
    }
    CHECK(checked > 600);
}

TEST_CASE("same seed gives byte-identical files") {
    SynthConfig cfg;
    cfg.n_wafers = 300;
    cfg.seed = 5;
    testing::TempDir a("synth_a"), b("synth_b");
    write_output(a.path(), generate(cfg));
    write_output(b.path(), generate(cfg));
    for (const char* f : {kSensorFile, kMetrologyFile, kLimitsFile, kTruthFile})
        CHECK(testing::read_file(a.path() / f) == testing::read_file(b.path() / f));
    cfg.seed = 6;
    testing::TempDir c("synth_c");
    write_output(c.path(), generate(cfg));
    CHECK(testing::read_file(a.path() / kSensorFile) != testing::read_file(c.path() / kSensorFile));
}

TEST_CASE("fail-label fraction tracks the configured rate") {
    SynthConfig cfg;
    cfg.n_wafers = 10000;
    cfg.fail_rate = 0.02;
    auto out = generate(cfg);
    auto metro = ingest::dedupe(out.metrology);
    auto limits = ingest::parse_limit_table(out.limits, cfg.monitor_marker);
    auto records = ingest::parse_metrology_table(metro, cfg.monitor_marker);
    std::size_t fails = 0;
    for (const auto& r : records) {
        auto [lcl, ucl] = limits.at(group_key(r));
        fails += eval::label_fail_wafer(r, ControlLimits(lcl, ucl, LimitSource::LclUcl));
    }
    double frac = static_cast<double>(fails) / static_cast<double>(records.size());
    INFO("fail fraction " << frac);
    CHECK(frac >= 0.01);
    CHECK(frac <= 0.04);
}

TEST_CASE("labels agree with limits on noise-free data") {
    SynthConfig cfg;
    cfg.n_wafers = 3000;
    cfg.noise_sd = 0;
    cfg.fail_rate = 0.1;
    auto out = generate(cfg);
    auto limits = ingest::parse_limit_table(out.limits, cfg.monitor_marker);
    std::size_t hi = 0, lo = 0;
    for (const auto& r : ingest::parse_metrology_table(out.metrology, cfg.monitor_marker)) {
        auto [lcl, ucl] = limits.at(group_key(r));
        // meas_med is rounded to 4 decimals; allow that much slack at the boundary.
        if (r.passfail == PassFail::FailAvgHi) {
            ++hi;
            CHECK(r.meas_med >= ucl - 5e-5);
        } else if (r.passfail == PassFail::FailAvgLow) {
            ++lo;
            CHECK(r.meas_med <= lcl + 5e-5);
        } else {
            CHECK((r.meas_med >= lcl - 5e-5 && r.meas_med <= ucl + 5e-5));
        }
        if (r.targ_min) {
            CHECK(*r.targ_min == lcl);
            CHECK(*r.targ_max == ucl);
        }
    }
    CHECK(hi > 0);
    CHECK(lo > 0);
}

TEST_CASE("missing cells only in numeric columns and duplicates are exact") {
    SynthConfig cfg;
    cfg.n_wafers = 500;
    cfg.missing_rate = 0.1;
    cfg.duplicate_rate = 0.05;
    auto out = generate(cfg);
    const std::size_t first_cat = 3 + cfg.n_numeric_sensors;
    std::size_t missing = 0;
    for (const auto& row : out.sensor.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (!row[c].empty()) continue;
            ++missing;
            CHECK(c >= 3);
            CHECK(c < first_cat);
        }
    }
    CHECK(missing > 0);
    for (const auto& row : out.metrology.rows)
        for (std::size_t c = 0; c < 10; ++c) CHECK_FALSE(row[c].empty());
    auto deduped = ingest::dedupe(out.sensor);
    CHECK(out.sensor.rows.size() - deduped.rows.size() == out.manifest["counts"]["sensor_duplicates"].get<std::size_t>());
}

TEST_CASE("product wafers inherit the monitor value") {
    SynthConfig cfg;
    cfg.n_wafers = 800;
    auto out = generate(cfg);
    auto records = ingest::parse_metrology_table(out.metrology, cfg.monitor_marker);
    std::map<std::pair<std::string, GroupKey>, double> monitor_value;
    std::set<std::string> monitor_wafer;
    for (const auto& r : records)
        if (r.is_monitor) {
            monitor_value[{r.id.processing_id, group_key(r)}] = r.meas_med;
            monitor_wafer.insert(r.id.str());
        }
    std::size_t products = 0;
    for (const auto& r : records) {
        if (r.is_monitor) continue;
        ++products;
        CHECK(monitor_wafer.count(r.id.str()) == 0);
        CHECK(monitor_value.at({r.id.processing_id, group_key(r)}) == r.meas_med);
    }
    CHECK(products > 0);
}

TEST_CASE("step counts follow the configured weights") {
    SynthConfig cfg;
    cfg.n_wafers = 4000;
    cfg.duplicate_rate = 0;
    auto out = generate(cfg);
    std::map<WaferId, std::size_t> steps;
    for (const auto& row : out.sensor.rows) ++steps[{row[0], row[1]}];
    CHECK(steps.size() == cfg.n_wafers);
    std::map<std::string, std::size_t> batch_steps;
    for (const auto& [id, n] : steps) batch_steps[id.processing_id] = n;
    std::array<double, 5> freq{};
    for (const auto& [pid, n] : batch_steps) {
        REQUIRE(n >= 1);
        REQUIRE(n <= 5);
        freq[n - 1] += 1.0 / static_cast<double>(batch_steps.size());
    }
    for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(freq[k] - cfg.step_weights[k]) < 0.05);
}

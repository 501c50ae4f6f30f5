#include <doctest.h>

#include <cmath>
#include <limits>

#include "ssr/eval.hpp"
#include "ssr/random.hpp"
#include "support.hpp"

using namespace ssr;
using namespace ssr::eval;

namespace {

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53; }

const ControlLimits kLimits(0, 10, LimitSource::LclUcl);

std::vector<LabeledPrediction> random_predictions(Rng& rng, std::size_t n) {
    std::vector<LabeledPrediction> out;
    for (std::size_t i = 0; i < n; ++i) {
        double lcl = uniform(rng, -10, 10);
        ControlLimits lim(lcl, lcl + uniform(rng, 0.1, 20), LimitSource::Targ);
        out.push_back({uniform(rng, lcl - 5, lim.ucl + 5), lim, rng() % 4 == 0});
    }
    return out;
}

}  // namespace

TEST_CASE("relative error") {
    auto e = relative_error(5, 5);
    CHECK(e.eta == 0);
    CHECK(e.epsilon == 0);
    auto f = relative_error(11, 10);
    CHECK(f.eta == doctest::Approx(0.1));
    CHECK(f.epsilon == doctest::Approx(1));
    auto z = relative_error(0.2, 0);
    CHECK(std::isinf(z.eta));
    CHECK(z.epsilon == doctest::Approx(0.2));
    CHECK(z.group == 2);
}

TEST_CASE("group assignment") {
    CHECK(assign_group(0.004, 2.0) == 1);
    CHECK(assign_group(std::numeric_limits<double>::infinity(), 0.05) == 1);
    CHECK(assign_group(0.6, 7) == 5);
    CHECK(assign_group(1.5, 20) == 6);
    // Strict thresholds.
    CHECK(assign_group(0.01, 0.1) == 2);
    CHECK(assign_group(1.0, 10.0) == 6);
    CHECK(assign_group(0, 0) == 1);
}

TEST_CASE("group is the first band either error clears") {
    Rng rng(4);
    for (int i = 0; i < 20000; ++i) {
        double eta = std::pow(10.0, uniform(rng, -3, 1));
        double eps = std::pow(10.0, uniform(rng, -2, 2));
        int g = assign_group(eta, eps);
        int oracle = 6;
        for (int k = 0; k < 5; ++k)
            if (eta < kGroupThresholds[k].first || eps < kGroupThresholds[k].second) {
                oracle = k + 1;
                break;
            }
        CHECK(g == oracle);
    }
}

TEST_CASE("grouping report") {
    std::vector<double> y{1, 2, 3};
    auto perfect = grouping_report(y, y);
    CHECK(perfect.counts == std::array<std::size_t, 6>{3, 0, 0, 0, 0, 0});
    CHECK(perfect.decent_rate == 1.0);

    // One sample per group, truth 100.
    std::vector<double> truth(6, 100.0);
    std::vector<double> pred{100.5, 103, 108, 140, 190, 250};
    auto r = grouping_report(pred, truth);
    CHECK(r.counts == std::array<std::size_t, 6>{1, 1, 1, 1, 1, 1});
    CHECK(r.decent_rate == doctest::Approx(1.0 / 3.0));
    CHECK(format_counts(r) == "[1, 1, 1, 1, 1, 1]");

    CHECK_THROWS_AS(grouping_report(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(grouping_report(pred, y), std::invalid_argument);
}

TEST_CASE("grouping counts always sum to N") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 1 + rng() % 300;
        std::vector<double> p(n), t(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = rng() % 10 == 0 ? 0.0 : uniform(rng, -900, 900);
            p[i] = t[i] + uniform(rng, -50, 50) * std::pow(10.0, uniform(rng, -4, 0));
        }
        auto r = grouping_report(p, t);
        std::size_t sum = 0;
        for (auto c : r.counts) sum += c;
        CHECK(sum == n);
        CHECK(r.total == n);
        CHECK(r.decent_rate == doctest::Approx(static_cast<double>(r.counts[0] + r.counts[1]) / n));
    }
}

TEST_CASE("report arithmetic on a published count row") {
    auto r = report_from_counts({2554, 2859, 257, 68, 10, 1});
    CHECK(r.total == 5749);
    CHECK(r.counts[0] + r.counts[1] == 5413);
    CHECK(std::round(r.decent_rate * 10000) / 100 == 94.16);
}

TEST_CASE("fail labels need all three conditions") {
    CHECK(label_fail_wafer(PassFail::FailAvgHi, Inspection::Rework, 11, kLimits));
    CHECK(label_fail_wafer(PassFail::FailAvgLow, Inspection::Scrap, -1, kLimits));
    CHECK_FALSE(label_fail_wafer(PassFail::FailAvgHi, Inspection::None, 11, kLimits));
    CHECK_FALSE(label_fail_wafer(PassFail::Pass, Inspection::Scrap, 5, kLimits));
    CHECK_FALSE(label_fail_wafer(PassFail::FailAvgHi, Inspection::Rework, 10, kLimits));
    CHECK_FALSE(label_fail_wafer(PassFail::Pass, Inspection::Rework, 11, kLimits));
}

TEST_CASE("fail predicate uses an open pass interval") {
    CHECK(predict_fail(10, FailPredicate(0, 10, 0)));
    CHECK(predict_fail(0, FailPredicate(0, 10, 0)));
    CHECK_FALSE(predict_fail(9.999, FailPredicate(0, 10, 0)));
    CHECK_FALSE(predict_fail(5, FailPredicate(0, 10, 0.35)));
    CHECK(predict_fail(3.5, FailPredicate(0, 10, 0.35)));
    CHECK(predict_fail(6.5, FailPredicate(0, 10, 0.35)));
    CHECK(FailPredicate(kLimits, 0.1).r() == 10);
    CHECK_THROWS_AS(FailPredicate(1, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(FailPredicate(0, 1, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(FailPredicate(0, 1, -0.1), std::invalid_argument);
}

TEST_CASE("confusion arithmetic") {
    ConfusionCounts c{2, 2, 1, 7};
    CHECK(c.recall() == 0.5);
    CHECK(c.fpr() == 0.125);
    CHECK(std::isnan(ConfusionCounts{0, 0, 1, 1}.recall()));
    CHECK(std::isnan(ConfusionCounts{1, 1, 0, 0}.fpr()));
}

TEST_CASE("sweep: everything predicted fail") {
    std::vector<LabeledPrediction> preds{{-1, kLimits, true}, {11, kLimits, false}, {10, kLimits, true}};
    auto s = recall_fpr_sweep(preds, {0.0});
    REQUIRE(s.rows.size() == 1);
    CHECK(s.rows[0].recall == 1.0);
    CHECK(s.rows[0].fpr == 1.0);
    CHECK(s.warnings.empty());
}

TEST_CASE("sweep warns on a degenerate label set") {
    std::vector<LabeledPrediction> preds{{5, kLimits, false}};
    auto s = recall_fpr_sweep(preds, default_f_grid());
    CHECK(std::isnan(s.rows[0].recall));
    CHECK(s.warnings.size() == 1);
}

TEST_CASE("sweep is monotone in f and sorted") {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        auto preds = random_predictions(rng, 1 + rng() % 200);
        auto grid = default_f_grid();
        std::reverse(grid.begin(), grid.end());
        auto s = recall_fpr_sweep(preds, grid);
        REQUIRE(s.rows.size() == 6);
        for (std::size_t i = 1; i < s.rows.size(); ++i) {
            CHECK(s.rows[i].f > s.rows[i - 1].f);
            if (!std::isnan(s.rows[i].recall)) CHECK(s.rows[i].recall >= s.rows[i - 1].recall);
            if (!std::isnan(s.rows[i].fpr)) CHECK(s.rows[i].fpr >= s.rows[i - 1].fpr);
            const auto& c = s.rows[i].counts;
            CHECK(c.tp + c.fn + c.fp + c.tn == preds.size());
        }
    }
}

TEST_CASE("reports render every model") {
    ModelEvaluation re{"RE", report_from_counts({5, 4, 3, 2, 1, 0}), {}, 0, 0};
    std::vector<LabeledPrediction> preds{{-1, kLimits, true}, {5, kLimits, false}};
    re.sweep = recall_fpr_sweep(preds, default_f_grid());
    auto nl1 = re;
    nl1.name = "NL1";
    std::vector<ModelEvaluation> models{re, nl1};
    auto text = render_text_report(models);
    CHECK(text.find("[5, 4, 3, 2, 1, 0]") != std::string::npos);
    CHECK(text.find("NL1") != std::string::npos);

    testing::TempDir dir("report");
    write_report_csv(dir / "r.csv", models);
    write_plot_csv(dir / "p.csv", re.sweep);
    auto csv = testing::read_file(dir / "r.csv");
    CHECK(csv.starts_with("model,metric,f,value\n"));
    CHECK(csv.find("NL1,group6,") != std::string::npos);
    auto plot = testing::read_file(dir / "p.csv");
    CHECK(plot.starts_with("f,recall,fpr\n0,1,0\n"));
}

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ssr/preprocess.hpp"
#include "ssr/random.hpp"
#include "ssr/synthgen.hpp"
#include "ssr/train.hpp"
#include "support.hpp"

using namespace ssr;
using namespace ssr::train;

namespace {

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Tiny regression set: two-step rows of width S and a measurement row of width M.
struct TinyData {
    std::vector<std::vector<double>> rows;
    Dataset data;
};

TinyData tiny(std::size_t count, std::size_t S, std::size_t M, std::uint64_t seed) {
    Rng rng(seed);
    TinyData t;
    t.rows.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t n = 1 + i % 2;
        t.rows[i].resize(n * S + M);
        for (auto& v : t.rows[i]) v = uniform(rng, 0, 1);
    }
    for (std::size_t i = 0; i < count; ++i) {
        double y = 20 + 10 * t.rows[i][0] - 5 * t.rows[i].back();
        t.data.samples.push_back({&t.rows[i], 1 + i % 2, y, 1.0 / std::max(std::abs(y), 10.0)});
    }
    return t;
}

}  // namespace

TEST_CASE("relative error loss examples") {
    CHECK(re_loss(19.3292, 19.3292) == 0.0);
    CHECK(re_loss(6, 5, {10}) == doctest::Approx(0.1));
    CHECK(re_loss(90, 100, {10}) == doctest::Approx(0.1));
}

TEST_CASE("re_loss is eta above c and epsilon / c below") {
    Rng rng(1);
    const RELossConfig cfg{10};
    for (int i = 0; i < 10000; ++i) {
        double y = uniform(rng, -100, 100);
        double yhat = uniform(rng, -150, 150);
        double eps = std::abs(yhat - y);
        double expect = std::abs(y) >= cfg.c ? eps / std::abs(y) : eps / cfg.c;
        CHECK(re_loss(yhat, y, cfg) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("normalized L1 loss") {
    normgroups::NormalizationGroup g{{"K", "T", "S"}, 0, 10};
    CHECK(nl1_loss(normgroups::normalize_target(7, g), 7, g) == 0.0);
    CHECK(nl1_loss(1.0, 5, g) == doctest::Approx(0.5));
    Rng rng(2);
    for (int i = 0; i < 1000; ++i) {
        double shift = uniform(rng, -500, 500);
        double y = uniform(rng, -50, 50);
        double yt = uniform(rng, -2, 2);
        normgroups::NormalizationGroup h{{"K", "T", "S"}, g.b1 + shift, g.b2 + shift};
        CHECK(nl1_loss(yt, y + shift, h) == doctest::Approx(nl1_loss(yt, y, g)).epsilon(1e-9));
    }
}

TEST_CASE("both losses are convex in the prediction") {
    Rng rng(3);
    normgroups::NormalizationGroup g{{"K", "T", "S"}, 3, 9};
    for (int i = 0; i < 5000; ++i) {
        double y = uniform(rng, -100, 100);
        double a = uniform(rng, -200, 200), b = uniform(rng, -200, 200);
        double mid = 0.5 * (a + b);
        CHECK(re_loss(mid, y) <= 0.5 * (re_loss(a, y) + re_loss(b, y)) + 1e-12);
        CHECK(nl1_loss(mid, y, g) <= 0.5 * (nl1_loss(a, y, g) + nl1_loss(b, y, g)) + 1e-12);
    }
}

TEST_CASE("loss kind parsing") {
    CHECK(parse_loss("re") == LossKind::RE);
    CHECK(parse_loss("NL1") == LossKind::NL1);
    CHECK_THROWS_AS(parse_loss("bogus"), std::invalid_argument);
    CHECK(parse_loss(to_string(LossKind::NL1)) == LossKind::NL1);
}

TEST_CASE("adam: zero gradient leaves params and decays moments") {
    std::vector<double> p{1.0, -2.0};
    AdamState<double> st{{0.5, 0.5}, {0.25, 0.25}, 3};
    std::vector<double> zero{0.0, 0.0};
    AdamConfig cfg;
    auto before = p;
    adam_step<double>(p, zero, st, cfg);
    // A zero gradient with nonzero moments still moves along m; from zero moments it must not.
    AdamState<double> fresh;
    auto q = before;
    adam_step<double>(q, zero, fresh, cfg);
    CHECK(q == before);
    CHECK(st.m[0] == doctest::Approx(0.45));
    CHECK(st.v[0] == doctest::Approx(0.25 * 0.999));
    CHECK(st.t == 4);
}

TEST_CASE("adam: constant gradient steps approach the learning rate") {
    AdamConfig cfg;
    for (double g : {1e-3, 0.5, 42.0, -7.0}) {
        std::vector<double> p{0.0};
        std::vector<double> grad{g};
        AdamState<double> st;
        double last = 0;
        for (int i = 0; i < 1000; ++i) {
            double before = p[0];
            adam_step<double>(p, grad, st, cfg);
            last = std::abs(p[0] - before);
        }
        CHECK(last == doctest::Approx(cfg.learning_rate).epsilon(1e-4));
        CHECK(std::abs(p[0]) == doctest::Approx(1000 * cfg.learning_rate).epsilon(1e-4));
    }
}

TEST_CASE("early stopping uses strict improvement") {
    EarlyStopping es(2);
    std::vector<double> losses{5, 4, 3, 3, 3, 3, 3};
    std::size_t stopped_at = 0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        es.update(losses[i]);
        if (es.should_stop()) {
            stopped_at = i + 1;
            break;
        }
    }
    CHECK(stopped_at == 5);
    CHECK(es.best_epoch() == 3);
    CHECK(es.best() == 3);
}

TEST_CASE("config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.patience = 0;
    CHECK_THROWS(c.validate());
    c = {};
    c.batch_size = 0;
    CHECK_THROWS(c.validate());
    c = {};
    c.re.c = 0;
    CHECK_THROWS(c.validate());
}

TEST_CASE("prepare builds weighted L1 targets") {
    preprocess::JoinedSample a, b;
    a.target = 5;
    a.key = {"K", "T", "S"};
    b.target = 100;
    b.key = {"K2", "T", "S"};
    normgroups::GroupTable groups{{a.key, {a.key, 0, 10}}};
    auto re = prepare({a, b}, LossKind::RE, groups);
    REQUIRE(re.samples.size() == 2);
    CHECK(re.samples[0].weight == doctest::Approx(0.1));
    CHECK(re.samples[1].weight == doctest::Approx(0.01));
    CHECK(sample_loss(6, re.samples[0]) == doctest::Approx(re_loss(6, 5)));
    auto nl1 = prepare({a, b}, LossKind::NL1, groups);
    CHECK(nl1.samples.size() == 1);
    CHECK(nl1.excluded == 1);
    CHECK(nl1.samples[0].target == 0.5);
}

TEST_CASE("fit overfits eight samples") {
    auto t = tiny(8, 4, 2, 5);
    TrainConfig cfg;
    cfg.adam.learning_rate = 1e-3;
    cfg.batch_size = 4;
    cfg.max_epochs = 200;
    cfg.patience = 200;
    nn::ArchConfig arch{4, 2, 8, 16, 2};
    auto first = mean_loss(nn::init_params<float>(arch, cfg.seed), t.data);
    auto r = fit(arch, t.data, t.data, cfg);
    CHECK(r.history.back().train_loss <= 0.5 * first);
    CHECK(r.best_val_loss <= 0.5 * first);
}

TEST_CASE("fit keeps the best epoch and is deterministic") {
    auto tr = tiny(64, 3, 2, 6);
    auto va = tiny(16, 3, 2, 7);
    TrainConfig cfg;
    cfg.adam.learning_rate = 3e-3;
    cfg.max_epochs = 15;
    cfg.patience = 3;
    cfg.seed = 9;
    nn::ArchConfig arch{3, 2, 4, 8, 2};
    std::vector<EpochRecord> seen;
    auto a = fit(arch, tr.data, va.data, cfg, [&](const EpochRecord& r) { seen.push_back(r); });
    auto b = fit(arch, tr.data, va.data, cfg);
    CHECK(a.best.values == b.best.values);
    CHECK(seen.size() == a.history.size());
    REQUIRE_FALSE(a.history.empty());

    double min_val = 1e300;
    std::size_t argmin = 0;
    for (const auto& h : a.history)
        if (h.val_loss < min_val) {
            min_val = h.val_loss;
            argmin = h.epoch;
        }
    CHECK(a.best_val_loss == min_val);
    CHECK(a.best_epoch == argmin);
    CHECK(mean_loss(a.best, va.data) == doctest::Approx(min_val).epsilon(1e-9));
    CHECK(a.history.size() <= cfg.max_epochs);
    if (a.stopped_early) CHECK(a.history.size() == a.best_epoch + cfg.patience);

    auto c = fit(arch, tr.data, va.data, [&] {
        auto k = cfg;
        k.seed = 10;
        return k;
    }());
    CHECK(c.best.values != a.best.values);
}

TEST_CASE("fit returns best-so-far when max_epochs is reached") {
    auto tr = tiny(32, 3, 2, 8);
    TrainConfig cfg;
    cfg.adam.learning_rate = 1e-3;
    cfg.max_epochs = 4;
    cfg.patience = 100;
    auto r = fit({3, 2, 4, 8, 2}, tr.data, tr.data, cfg);
    CHECK(r.history.size() == 4);
    CHECK_FALSE(r.stopped_early);
    CHECK(r.best_epoch >= 1);
}

TEST_CASE("diverging training aborts") {
    auto tr = tiny(16, 3, 2, 8);
    for (auto& s : tr.data.samples) s.target = std::numeric_limits<double>::infinity();
    TrainConfig cfg;
    cfg.max_epochs = 2;
    CHECK_THROWS_AS(fit({3, 2, 4, 8, 2}, tr.data, tr.data, cfg), TrainingError);
}

TEST_CASE("predict matches per-sample forward in input order") {
    auto t = tiny(40, 3, 2, 11);
    auto p = nn::init_params<double>({3, 2, 4, 8, 2}, 1);
    auto out = predict(p, std::span<const PreparedSample>(t.data.samples), 7);
    for (std::size_t i = 0; i < t.data.samples.size(); ++i) {
        std::vector<const std::vector<double>*> one{t.data.samples[i].features};
        auto b = nn::make_batch<double>(one, t.data.samples[i].n_steps, 3, 2);
        CHECK(out[i] == doctest::Approx(nn::forward(p, b)[0]).epsilon(1e-12));
    }
}

TEST_CASE("history csv") {
    testing::TempDir dir("hist");
    write_history_csv((dir / "h.csv").string(), {{1, 0.5, 0.25, true}, {2, 0.4, 0.3, false}});
    CHECK(testing::read_file(dir / "h.csv") == "epoch,train_loss,val_loss,is_best\n1,0.5,0.25,1\n2,0.4,0.3,0\n");
}

TEST_CASE("synthetic generator data is learnable") {
    synth::SynthConfig sc;
    sc.n_wafers = 800;
    auto data = synth::generate(sc);
    auto pre = preprocess::run_preprocess(data.sensor, data.metrology, data.limits,
                                          {sc.schema(), sc.monitor_marker, false, 0});
    auto tr = prepare(pre.regression.train, LossKind::RE, pre.groups);
    auto va = prepare(pre.regression.val, LossKind::RE, pre.groups);
    TrainConfig cfg;
    cfg.adam.learning_rate = 3e-3;
    cfg.max_epochs = 60;
    nn::ArchConfig arch{pre.transforms.sensor_width(), pre.transforms.meas_width(), 16, 32, 2};
    auto r = fit(arch, tr, va, cfg);
    CHECK(r.best_val_loss < 0.05);
}

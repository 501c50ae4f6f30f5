#include "ssr/synthgen.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "ssr/random.hpp"

namespace ssr::synth {

namespace {

class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : rng_(seed) {}

    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform_index(rng_, n)); }
    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller, one value per call.
    double normal() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::size_t categorical(const std::vector<double>& weights) {
        double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        double r = uniform() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (r < weights[i]) return i;
            r -= weights[i];
        }
        return weights.size() - 1;
    }

    Rng& engine() { return rng_; }

private:
    Rng rng_;
};

std::string padded(const char* prefix, std::size_t i, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
    return buf;
}

double round4(double v) { return std::round(v * 1e4) / 1e4; }

}  // namespace

void SynthConfig::validate() const {
    if (n_wafers == 0) throw std::invalid_argument("synth.n_wafers must be positive");
    if (step_weights.empty() || step_weights.size() > kMaxSteps)
        throw std::invalid_argument("synth.step_weights needs 1..9 entries");
    double total = 0.0;
    for (double w : step_weights) {
        if (w < 0) throw std::invalid_argument("synth.step_weights must be non-negative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("synth.step_weights must sum to 1");
    if (n_numeric_sensors == 0) throw std::invalid_argument("synth.n_numeric_sensors must be positive");
    for (auto v : sensor_cat_vocab)
        if (v == 0) throw std::invalid_argument("synth.sensor_cat_vocab entries must be positive");
    if (!n_kqi || !n_type || !n_stage || !n_equip || !n_prod)
        throw std::invalid_argument("synth category counts must be positive");
    if (max_batch_wafers < 2) throw std::invalid_argument("synth.max_batch_wafers must be >= 2");
    if (max_keys_per_batch == 0) throw std::invalid_argument("synth.max_keys_per_batch must be positive");
    if (noise_sd < 0 || jitter_sd < 0) throw std::invalid_argument("synth noise levels must be non-negative");
    if (!(rel_spread > 0)) throw std::invalid_argument("synth.rel_spread must be positive");
    if (!(fail_rate > 0 && fail_rate < 1)) throw std::invalid_argument("synth.fail_rate must lie in (0, 1)");
    for (double p : {missing_rate, duplicate_rate, targ_fraction})
        if (p < 0 || p > 1) throw std::invalid_argument("synth rates must lie in [0, 1]");
    if (monitor_marker.empty()) throw std::invalid_argument("synth.monitor_marker must be non-empty");
}

std::vector<std::string> SynthConfig::numeric_columns() const {
    std::vector<std::string> cols;
    for (std::size_t j = 0; j < n_numeric_sensors; ++j) cols.push_back(padded("s", j, 2));
    return cols;
}

std::vector<std::string> SynthConfig::categorical_columns() const {
    std::vector<std::string> cols;
    for (std::size_t j = 0; j < sensor_cat_vocab.size(); ++j) cols.push_back("c" + std::to_string(j));
    return cols;
}

double sequence_signal(const std::vector<std::vector<double>>& standardized_steps,
                       const std::vector<double>& direction) {
    double sum = 0.0, norm = 0.0;
    for (std::size_t t = 0; t < standardized_steps.size(); ++t) {
        const double w = t + 1 == standardized_steps.size() ? 2.0 : 1.0;
        double proj = 0.0;
        for (std::size_t j = 0; j < direction.size(); ++j) proj += direction[j] * standardized_steps[t][j];
        sum += w * proj;
        norm += w * w;
    }
    return sum / std::sqrt(norm);
}

double two_sided_normal_quantile(double p) {
    if (!(p > 0 && p < 1)) throw std::invalid_argument("quantile probability must lie in (0, 1)");
    double lo = 0.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (std::erfc(mid / std::sqrt(2.0)) > p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

SynthOutput generate(const SynthConfig& cfg) {
    cfg.validate();
    Sampler rs(cfg.seed);
    const std::size_t P = cfg.n_numeric_sensors;

    std::vector<double> mu(P), sigma(P), direction(P);
    for (std::size_t j = 0; j < P; ++j) {
        mu[j] = round4(rs.uniform(-50.0, 500.0));
        sigma[j] = round4(rs.uniform(0.5, 20.0));
    }
    double dnorm = 0.0;
    for (auto& a : direction) {
        a = rs.normal();
        dnorm += a * a;
    }
    for (auto& a : direction) a /= std::sqrt(dnorm);

    const double base = 20.0;
    std::vector<double> off_kqi(cfg.n_kqi), off_type(cfg.n_type), off_stage(cfg.n_stage);
    for (auto& v : off_kqi) v = round4(rs.uniform(0.0, 60.0));
    for (auto& v : off_type) v = round4(rs.uniform(0.0, 15.0));
    for (auto& v : off_stage) v = round4(rs.uniform(0.0, 10.0));
    const double q = two_sided_normal_quantile(cfg.fail_rate);

    struct KeyTruth {
        std::size_t kqi, type, stage;
        double mean, spread, lcl, ucl;
    };
    std::vector<KeyTruth> keys;
    for (std::size_t k = 0; k < cfg.n_kqi; ++k)
        for (std::size_t t = 0; t < cfg.n_type; ++t)
            for (std::size_t s = 0; s < cfg.n_stage; ++s) {
                double m = base + off_kqi[k] + off_type[t] + off_stage[s];
                double sd = cfg.rel_spread * m;
                keys.push_back({k, t, s, m, sd, m - q * sd, m + q * sd});
            }

    auto kqi_label = [](std::size_t k) { return "KQI-" + std::to_string(k + 1); };
    auto kqi_monitor_label = [&](std::size_t k) { return "KQI-" + cfg.monitor_marker + "-" + std::to_string(k + 1); };
    auto type_label = [](std::size_t t) { return "TYPE-" + std::to_string(t + 1); };
    auto stage_label = [](std::size_t s) { return "STAGE-" + std::to_string(s + 1); };

    SynthOutput out;
    out.sensor.column_names = {"processing_id", "product_id", "timestamp"};
    for (const auto& c : cfg.numeric_columns()) out.sensor.column_names.push_back(c);
    for (const auto& c : cfg.categorical_columns()) out.sensor.column_names.push_back(c);
    out.metrology.column_names = ingest::metrology_columns();
    out.limits.column_names = ingest::limit_columns();
    for (const auto& k : keys)
        out.limits.rows.push_back({kqi_label(k.kqi), type_label(k.type), stage_label(k.stage), format_double(k.lcl),
                                   format_double(k.ucl)});

    const Timestamp year_start = parse_timestamp("2022-01-01T00:00:00");
    std::size_t wafer_index = 0, batch_index = 0;
    std::size_t monitor_wafers = 0;
    while (wafer_index < cfg.n_wafers) {
        const std::size_t batch_wafers =
            std::min(cfg.n_wafers - wafer_index, 2 + rs.index(cfg.max_batch_wafers - 1));
        const std::size_t n_steps = 1 + rs.categorical(cfg.step_weights);
        const std::string pid = padded("P", ++batch_index, 6);

        Timestamp t0 = year_start + static_cast<Timestamp>(rs.index(365)) * 86400 +
                       static_cast<Timestamp>(rs.index(86400));
        std::vector<Timestamp> times{t0};
        for (std::size_t t = 1; t < n_steps; ++t) times.push_back(times.back() + 600 + static_cast<Timestamp>(rs.index(6600)));

        std::vector<std::vector<double>> latent(n_steps, std::vector<double>(P));
        for (auto& row : latent)
            for (auto& v : row) v = rs.normal();
        std::vector<std::vector<std::string>> cats(n_steps);
        for (auto& row : cats)
            for (std::size_t c = 0; c < cfg.sensor_cat_vocab.size(); ++c)
                row.push_back("c" + std::to_string(c) + "_L" + std::to_string(rs.index(cfg.sensor_cat_vocab[c])));
        const std::string equip = "EQ-" + std::to_string(rs.index(cfg.n_equip) + 1);
        const std::string prod = "PROD-" + std::to_string(rs.index(cfg.n_prod) + 1);

        std::vector<std::size_t> key_order(keys.size());
        std::iota(key_order.begin(), key_order.end(), std::size_t{0});
        shuffle_in_place(std::span<std::size_t>(key_order), rs.engine());
        key_order.resize(std::min(keys.size(), 1 + rs.index(cfg.max_keys_per_batch)));

        double monitor_z = 0.0;
        struct Reading {
            double meas, clean;
            PassFail pf;
            Inspection insp;
        };
        std::vector<Reading> readings;
        for (std::size_t w = 0; w < batch_wafers; ++w, ++wafer_index) {
            const bool monitor = w == 0;
            const std::string wid = padded("W", wafer_index + 1, 7);
            std::vector<std::vector<double>> standardized(n_steps, std::vector<double>(P));
            for (std::size_t t = 0; t < n_steps; ++t) {
                std::vector<std::string> row{pid, wid, format_timestamp(times[t] + static_cast<Timestamp>(w) * 60)};
                for (std::size_t j = 0; j < P; ++j) {
                    double x = round4(mu[j] + sigma[j] * (latent[t][j] + cfg.jitter_sd * rs.normal()));
                    standardized[t][j] = (x - mu[j]) / sigma[j];
                    row.push_back(rs.bernoulli(cfg.missing_rate) ? std::string() : format_double(x));
                }
                row.insert(row.end(), cats[t].begin(), cats[t].end());
                out.sensor.rows.push_back(std::move(row));
            }
            if (monitor) {
                ++monitor_wafers;
                monitor_z = sequence_signal(standardized, direction);
                for (auto k : key_order) {
                    const auto& kt = keys[k];
                    Reading r;
                    r.clean = kt.mean + kt.spread * monitor_z;
                    r.meas = r.clean + cfg.noise_sd * rs.normal();
                    r.pf = r.clean > kt.ucl ? PassFail::FailAvgHi
                                            : (r.clean < kt.lcl ? PassFail::FailAvgLow : PassFail::Pass);
                    double u = rs.uniform();
                    if (r.pf != PassFail::Pass)
                        r.insp = u < 0.6 ? Inspection::Rework : (u < 0.95 ? Inspection::Scrap : Inspection::None);
                    else
                        r.insp = u < 0.01 ? Inspection::Rework : Inspection::None;
                    readings.push_back(r);
                }
            }
            for (std::size_t i = 0; i < key_order.size(); ++i) {
                const auto& kt = keys[key_order[i]];
                const auto& r = readings[i];
                bool targ = rs.bernoulli(cfg.targ_fraction);
                out.metrology.rows.push_back({pid, wid, monitor ? kqi_monitor_label(kt.kqi) : kqi_label(kt.kqi),
                                              type_label(kt.type), stage_label(kt.stage), equip, prod,
                                              format_double(round4(r.meas)), std::string(to_string(r.pf)),
                                              std::string(to_string(r.insp)), targ ? format_double(kt.lcl) : "",
                                              targ ? format_double(kt.ucl) : ""});
            }
        }
    }

    auto inject_duplicates = [&](RawTable& t) {
        std::vector<std::vector<std::string>> dups;
        for (const auto& row : t.rows)
            if (rs.bernoulli(cfg.duplicate_rate)) dups.push_back(row);
        t.rows.insert(t.rows.end(), dups.begin(), dups.end());
        return dups.size();
    };
    std::size_t sensor_dups = inject_duplicates(out.sensor);
    std::size_t metro_dups = inject_duplicates(out.metrology);

    nlohmann::json groups = nlohmann::json::array();
    for (const auto& k : keys)
        groups.push_back({{"kqi", kqi_label(k.kqi)},
                          {"type", type_label(k.type)},
                          {"stage", stage_label(k.stage)},
                          {"mean", k.mean},
                          {"spread", k.spread},
                          {"lcl", k.lcl},
                          {"ucl", k.ucl}});
    out.manifest = {
        {"format", "ssr-synth-1"},
        {"formula",
         "x_tj = round4(mu_j + sigma_j * (u_tj + jitter)); u'_tj = (x_tj - mu_j) / sigma_j; "
         "z = sum_t w_t (a . u'_t) / sqrt(sum_t w_t^2), w_t = 1 except last step 2, using the monitor wafer's u'; "
         "clean = mean_g + spread_g * z; meas_med = round4(clean + noise_sd * N(0,1)); "
         "mean_g = base + kqi_offset + type_offset + stage_offset; spread_g = rel_spread * mean_g; "
         "lcl/ucl = mean_g -/+ q * spread_g; product wafers inherit the monitor wafer's meas_med"},
        {"config",
         {{"n_wafers", cfg.n_wafers},
          {"step_weights", cfg.step_weights},
          {"n_numeric_sensors", cfg.n_numeric_sensors},
          {"sensor_cat_vocab", cfg.sensor_cat_vocab},
          {"n_kqi", cfg.n_kqi},
          {"n_type", cfg.n_type},
          {"n_stage", cfg.n_stage},
          {"n_equip", cfg.n_equip},
          {"n_prod", cfg.n_prod},
          {"max_batch_wafers", cfg.max_batch_wafers},
          {"max_keys_per_batch", cfg.max_keys_per_batch},
          {"noise_sd", cfg.noise_sd},
          {"jitter_sd", cfg.jitter_sd},
          {"rel_spread", cfg.rel_spread},
          {"fail_rate", cfg.fail_rate},
          {"missing_rate", cfg.missing_rate},
          {"duplicate_rate", cfg.duplicate_rate},
          {"targ_fraction", cfg.targ_fraction},
          {"monitor_marker", cfg.monitor_marker},
          {"seed", cfg.seed}}},
        {"sensor_mu", mu},
        {"sensor_sigma", sigma},
        {"direction", direction},
        {"base", base},
        {"kqi_offsets", off_kqi},
        {"type_offsets", off_type},
        {"stage_offsets", off_stage},
        {"q", q},
        {"groups", groups},
        {"counts",
         {{"wafers", wafer_index},
          {"batches", batch_index},
          {"monitor_wafers", monitor_wafers},
          {"sensor_rows", out.sensor.rows.size()},
          {"metrology_rows", out.metrology.rows.size()},
          {"sensor_duplicates", sensor_dups},
          {"metrology_duplicates", metro_dups}}}};
    return out;
}

void write_output(const std::filesystem::path& dir, const SynthOutput& out) {
    std::filesystem::create_directories(dir);
    write_table(dir / kSensorFile, out.sensor);
    write_table(dir / kMetrologyFile, out.metrology);
    write_table(dir / kLimitsFile, out.limits);
    std::ofstream m(dir / kTruthFile, std::ios::binary);
    if (!m) throw std::runtime_error("cannot write " + (dir / kTruthFile).string());
    m << out.manifest.dump(1) << '\n';
}

}  // namespace ssr::synth

#include "ssr/preprocess.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <set>
#include <stdexcept>

#include "ssr/random.hpp"

namespace ssr::preprocess {

std::pair<double, double> datetime_features(Timestamp t) {
    using namespace std::chrono;
    Timestamp days = t >= 0 ? t / 86400 : -((-t + 86399) / 86400);
    Timestamp secs = t - days * 86400;
    sys_days day{std::chrono::days{days}};
    year_month_day ymd{day};
    auto ordinal0 = (day - sys_days{ymd.year() / January / 1}).count();
    return {static_cast<double>(secs) / 86400.0, static_cast<double>(ordinal0) / 366.0};
}

std::vector<std::size_t> drop_degenerate_columns(const std::vector<NumericRow>& train_rows, std::size_t n_cols) {
    std::vector<std::size_t> kept;
    for (std::size_t c = 0; c < n_cols; ++c) {
        std::optional<double> first;
        bool varies = false;
        for (const auto& row : train_rows) {
            const auto& v = row[c];
            if (!v) continue;
            if (!first)
                first = *v;
            else if (*v != *first) {
                varies = true;
                break;
            }
        }
        if (varies) kept.push_back(c);
    }
    return kept;
}

NumericRow select_columns(const NumericRow& row, std::span<const std::size_t> kept) {
    NumericRow out;
    out.reserve(kept.size());
    for (auto c : kept) out.push_back(row[c]);
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of empty sample");
    auto mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    double hi = values[mid];
    if (values.size() % 2 == 1) return hi;
    double lo = *std::max_element(values.begin(), values.begin() + mid);
    return 0.5 * (lo + hi);
}

void FittedScaler::apply(NumericRow& row) const {
    for (std::size_t c = 0; c < row.size(); ++c)
        if (row[c]) row[c] = apply(*row[c], c);
}

FittedScaler fit_minmax(const std::vector<NumericRow>& train_rows, std::size_t n_cols) {
    FittedScaler s;
    s.min.assign(n_cols, 0.0);
    s.max.assign(n_cols, 0.0);
    for (std::size_t c = 0; c < n_cols; ++c) {
        bool any = false;
        for (const auto& row : train_rows) {
            if (!row[c]) continue;
            double v = *row[c];
            if (!any) {
                s.min[c] = s.max[c] = v;
                any = true;
            } else {
                s.min[c] = std::min(s.min[c], v);
                s.max[c] = std::max(s.max[c], v);
            }
        }
        if (!any || !(s.max[c] > s.min[c]))
            throw std::invalid_argument("degenerate column " + std::to_string(c) + " reached min-max scaling");
    }
    return s;
}

std::vector<double> FittedImputer::apply(const NumericRow& row) const {
    std::vector<double> out(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) out[c] = row[c] ? *row[c] : median[c];
    return out;
}

FittedImputer fit_impute(const std::vector<NumericRow>& train_rows, std::size_t n_cols) {
    FittedImputer imp;
    imp.median.resize(n_cols);
    std::vector<double> present;
    for (std::size_t c = 0; c < n_cols; ++c) {
        present.clear();
        for (const auto& row : train_rows)
            if (row[c]) present.push_back(*row[c]);
        if (present.empty())
            throw std::invalid_argument("all-missing column " + std::to_string(c) + " reached imputation");
        imp.median[c] = median(present);
    }
    return imp;
}

OneHotVocabulary OneHotVocabulary::fit(const std::vector<std::vector<std::string>>& train_rows, std::size_t n_cols) {
    std::vector<std::set<std::string>> seen(n_cols);
    for (const auto& row : train_rows)
        for (std::size_t c = 0; c < n_cols; ++c)
            if (!row[c].empty()) seen[c].insert(row[c]);
    OneHotVocabulary v;
    for (auto& s : seen) v.labels.emplace_back(s.begin(), s.end());
    return v;
}

std::size_t OneHotVocabulary::total_width() const {
    std::size_t w = 0;
    for (std::size_t c = 0; c < labels.size(); ++c) w += width(c);
    return w;
}

std::size_t OneHotVocabulary::slot(std::size_t col, const std::string& label) const {
    const auto& l = labels[col];
    auto it = std::lower_bound(l.begin(), l.end(), label);
    if (label.empty() || it == l.end() || *it != label) return l.size();
    return static_cast<std::size_t>(it - l.begin());
}

void OneHotVocabulary::encode_row(std::span<const std::string> row, std::vector<double>& out) const {
    for (std::size_t c = 0; c < labels.size(); ++c) {
        auto base = out.size();
        out.resize(base + width(c), 0.0);
        out[base + slot(c, row[c])] = 1.0;
    }
}

std::vector<double> one_hot(const OneHotVocabulary& vocab, std::size_t col, const std::string& label) {
    std::vector<double> v(vocab.width(col), 0.0);
    v[vocab.slot(col, label)] = 1.0;
    return v;
}

std::vector<double> join_features(const std::vector<std::vector<double>>& steps, std::span<const double> meas) {
    if (steps.empty()) throw std::invalid_argument("join needs at least one step");
    const auto width = steps.front().size();
    std::vector<double> out;
    out.reserve(steps.size() * width + meas.size());
    for (const auto& s : steps) {
        if (s.size() != width) throw std::invalid_argument("step rows differ in width");
        out.insert(out.end(), s.begin(), s.end());
    }
    out.insert(out.end(), meas.begin(), meas.end());
    return out;
}

JoinedSample join_wafer(const std::vector<std::vector<double>>& steps, std::span<const double> meas, double target) {
    JoinedSample s;
    s.n_steps = steps.size();
    s.features = join_features(steps, meas);
    s.target = target;
    return s;
}

UnjoinedFeatures unjoin(std::span<const double> features, std::size_t n_steps, std::size_t sensor_width,
                        std::size_t meas_width) {
    if (features.size() != n_steps * sensor_width + meas_width)
        throw std::invalid_argument("feature width " + std::to_string(features.size()) + " != " +
                                    std::to_string(n_steps) + "*" + std::to_string(sensor_width) + "+" +
                                    std::to_string(meas_width));
    UnjoinedFeatures out;
    for (std::size_t t = 0; t < n_steps; ++t) {
        auto row = features.subspan(t * sensor_width, sensor_width);
        out.steps.emplace_back(row.begin(), row.end());
    }
    auto m = features.subspan(n_steps * sensor_width);
    out.meas.assign(m.begin(), m.end());
    return out;
}

std::vector<JoinedSample> filter_outlier_targets(std::vector<JoinedSample> train) {
    std::erase_if(train, [](const JoinedSample& s) { return s.target < kTargetMin || s.target > kTargetMax; });
    return train;
}

std::vector<std::vector<std::size_t>> bucket_batches(std::span<const std::size_t> n_steps, std::size_t batch_size,
                                                     std::uint64_t seed) {
    if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
    std::map<std::size_t, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < n_steps.size(); ++i) buckets[n_steps[i]].push_back(i);
    std::vector<std::vector<std::size_t>> batches;
    for (auto& [n, idx] : buckets) {
        Rng rng(derive_seed(seed, n));
        shuffle_in_place(std::span<std::size_t>(idx), rng);
        for (std::size_t b = 0; b < idx.size(); b += batch_size)
            batches.emplace_back(idx.begin() + b, idx.begin() + std::min(idx.size(), b + batch_size));
    }
    return batches;
}

namespace {

NumericRow raw_numeric(const SensorTimeStep& step) {
    auto [tod, doy] = datetime_features(step.timestamp);
    NumericRow row{tod, doy};
    row.insert(row.end(), step.numeric.begin(), step.numeric.end());
    return row;
}

std::vector<std::string> meas_labels(const MeasurementRecord& m, const std::string& marker) {
    return {canonical_kqi(m.kqi, marker), m.mtype, m.stage, m.equipid, m.prod};
}

}  // namespace

std::vector<double> FittedTransforms::encode_step(const SensorTimeStep& step) const {
    auto row = select_columns(raw_numeric(step), kept);
    scaler.apply(row);
    auto out = imputer.apply(row);
    sensor_vocab.encode_row(step.categorical, out);
    return out;
}

std::vector<double> FittedTransforms::encode_measurement(const MeasurementRecord& m,
                                                         const std::string& monitor_marker) const {
    std::vector<double> out;
    out.reserve(meas_width());
    meas_vocab.encode_row(meas_labels(m, monitor_marker), out);
    return out;
}

PreprocessResult run_preprocess(const RawTable& sensor, const RawTable& metrology, const RawTable& limits,
                                const PreprocessConfig& cfg) {
    PreprocessResult res;
    auto sensor_d = ingest::dedupe(sensor);
    auto metro_d = ingest::dedupe(metrology);
    res.sensor_rows = sensor_d.rows.size();
    res.metrology_rows = metro_d.rows.size();

    auto steps = ingest::parse_sensor_table(sensor_d, cfg.schema);
    auto meas = ingest::parse_metrology_table(metro_d, cfg.monitor_marker);
    auto limit_table = ingest::parse_limit_table(limits, cfg.monitor_marker);
    auto assembly = ingest::assemble_wafers(std::move(steps), meas);
    res.diagnostics = std::move(assembly.diagnostics);
    if (assembly.orphan_measurements)
        res.diagnostics.push_back(std::to_string(assembly.orphan_measurements) +
                                  " measurements without sensor rows dropped");
    if (assembly.wafers.empty()) throw std::invalid_argument("no wafers with sensor data");

    auto split = ingest::split_train_val_test(std::move(assembly.wafers), cfg.seed);
    res.wafers_train = split.train.size();
    res.wafers_val = split.val.size();
    res.wafers_test = split.test.size();

    auto& tf = res.transforms;
    tf.numeric_names = {"time_of_day", "day_of_year"};
    tf.numeric_names.insert(tf.numeric_names.end(), cfg.schema.numeric_columns.begin(),
                            cfg.schema.numeric_columns.end());

    std::vector<NumericRow> train_rows;
    std::vector<std::vector<std::string>> train_cats;
    std::vector<std::vector<std::string>> train_meas_labels;
    for (const auto& w : split.train) {
        for (const auto& s : w.steps) {
            train_rows.push_back(raw_numeric(s));
            train_cats.push_back(s.categorical);
        }
        for (const auto& m : w.measurements) train_meas_labels.push_back(meas_labels(m, cfg.monitor_marker));
    }
    tf.kept = drop_degenerate_columns(train_rows, tf.numeric_names.size());
    for (auto& row : train_rows) row = select_columns(row, tf.kept);
    tf.scaler = fit_minmax(train_rows, tf.kept.size());
    for (auto& row : train_rows) tf.scaler.apply(row);
    tf.imputer = fit_impute(train_rows, tf.kept.size());
    tf.sensor_vocab = OneHotVocabulary::fit(train_cats, cfg.schema.categorical_columns.size());
    tf.meas_vocab = OneHotVocabulary::fit(train_meas_labels, 5);

    auto build = [&](const std::vector<WaferRecord>& wafers, std::vector<JoinedSample>& regression,
                     std::vector<JoinedSample>& labeling) {
        for (const auto& w : wafers) {
            if (w.measurements.empty()) continue;
            std::vector<std::vector<double>> step_rows;
            for (const auto& s : w.steps) step_rows.push_back(tf.encode_step(s));
            for (const auto& m : w.measurements) {
                auto mrow = tf.encode_measurement(m, cfg.monitor_marker);
                auto sample = join_wafer(step_rows, mrow, m.meas_med);
                sample.id = w.id;
                sample.key = GroupKey{canonical_kqi(m.kqi, cfg.monitor_marker), m.mtype, m.stage};
                sample.passfail = m.passfail;
                sample.inspection = m.inspection;
                sample.limits = normgroups::resolve_control_limits(m, limit_table, &res.diagnostics);
                bool to_labeling = m.is_monitor != cfg.swap_streams;
                (to_labeling ? labeling : regression).push_back(std::move(sample));
            }
        }
    };
    build(split.train, res.regression.train, res.labeling.train);
    build(split.val, res.regression.val, res.labeling.val);
    build(split.test, res.regression.test, res.labeling.test);

    auto before = res.regression.train.size();
    res.regression.train = filter_outlier_targets(std::move(res.regression.train));
    res.outliers_dropped = before - res.regression.train.size();

    std::vector<std::pair<GroupKey, ControlLimits>> resolved;
    for (const auto& s : res.regression.train)
        if (s.limits) resolved.emplace_back(s.key, *s.limits);
    res.groups = normgroups::build_groups(resolved);
    return res;
}

}  // namespace ssr::preprocess

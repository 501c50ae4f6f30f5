#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ssr/csv.hpp"
#include "ssr/domain.hpp"
#include "ssr/ingest.hpp"
#include "ssr/normgroups.hpp"

namespace ssr::preprocess {

using NumericRow = std::vector<std::optional<double>>;

/// (seconds since midnight / 86400, (ordinal day - 1) / 366). Both in [0, 1).
std::pair<double, double> datetime_features(Timestamp t);

/// Indices of columns that have at least two distinct non-missing values in
/// the training rows.
std::vector<std::size_t> drop_degenerate_columns(const std::vector<NumericRow>& train_rows, std::size_t n_cols);

/// Keeps only `kept` columns of a row, in order.
NumericRow select_columns(const NumericRow& row, std::span<const std::size_t> kept);

/// Median of a non-empty sample; even counts average the two middle values.
double median(std::vector<double> values);

struct FittedScaler {
    std::vector<double> min;
    std::vector<double> max;

    /// (x - min) / (max - min); no clamping.
    double apply(double x, std::size_t col) const { return (x - min[col]) / (max[col] - min[col]); }
    /// Scales present entries, leaves missing ones missing.
    void apply(NumericRow& row) const;
};

/// Throws std::invalid_argument if a column is degenerate.
FittedScaler fit_minmax(const std::vector<NumericRow>& train_rows, std::size_t n_cols);

struct FittedImputer {
    std::vector<double> median;

    std::vector<double> apply(const NumericRow& row) const;
};

/// Throws std::invalid_argument if a column has no training values.
FittedImputer fit_impute(const std::vector<NumericRow>& train_rows, std::size_t n_cols);

/// Per categorical column, the sorted labels seen in training. Each column
/// encodes to |labels| + 1 slots; the last is UNKNOWN.
struct OneHotVocabulary {
    std::vector<std::vector<std::string>> labels;

    static OneHotVocabulary fit(const std::vector<std::vector<std::string>>& train_rows, std::size_t n_cols);

    std::size_t width(std::size_t col) const { return labels[col].size() + 1; }
    std::size_t total_width() const;
    /// Slot of `label` within column `col` (UNKNOWN slot for unseen or empty labels).
    std::size_t slot(std::size_t col, const std::string& label) const;
    /// Concatenated indicator vectors for one row of labels.
    void encode_row(std::span<const std::string> row, std::vector<double>& out) const;
};

std::vector<double> one_hot(const OneHotVocabulary& vocab, std::size_t col, const std::string& label);

inline constexpr double kTargetMin = -1.0;
inline constexpr double kTargetMax = 1000.0;

/// One (wafer, measurement) pair: the wafer's step rows concatenated, then the
/// measurement row.
struct JoinedSample {
    WaferId id;
    std::size_t n_steps = 0;
    std::vector<double> features;
    double target = 0.0;
    GroupKey key;
    PassFail passfail = PassFail::Pass;
    Inspection inspection = Inspection::None;
    std::optional<ControlLimits> limits;

    bool operator==(const JoinedSample&) const = default;
};

/// features = step_1 | ... | step_n | meas. Throws std::invalid_argument on
/// inconsistent widths.
std::vector<double> join_features(const std::vector<std::vector<double>>& steps, std::span<const double> meas);

JoinedSample join_wafer(const std::vector<std::vector<double>>& steps, std::span<const double> meas, double target);

struct UnjoinedFeatures {
    std::vector<std::vector<double>> steps;
    std::vector<double> meas;
};

/// Inverse of join_features.
UnjoinedFeatures unjoin(std::span<const double> features, std::size_t n_steps, std::size_t sensor_width,
                        std::size_t meas_width);

/// Removes samples whose target lies outside [kTargetMin, kTargetMax]. Apply to training data only.
std::vector<JoinedSample> filter_outlier_targets(std::vector<JoinedSample> train);

/// Groups sample indices by step count and cuts each group into batches of
/// `batch_size`. Buckets come out in ascending step count; each is shuffled
/// by `seed` first; the last partial batch of each bucket is kept.
std::vector<std::vector<std::size_t>> bucket_batches(std::span<const std::size_t> n_steps, std::size_t batch_size,
                                                     std::uint64_t seed);

struct PreprocessConfig {
    ingest::SensorSchema schema;
    std::string monitor_marker = "MON";
    /// When true the regression stream uses monitor rows and labeling uses
    /// non-monitor rows.
    bool swap_streams = false;
    std::uint64_t seed = 0;
};

/// Everything fitted on training rows.
struct FittedTransforms {
    std::vector<std::string> numeric_names;  ///< candidate numeric columns, datetime first
    std::vector<std::size_t> kept;           ///< indices into numeric_names
    FittedScaler scaler;
    FittedImputer imputer;
    OneHotVocabulary sensor_vocab;
    OneHotVocabulary meas_vocab;

    std::size_t sensor_width() const { return kept.size() + sensor_vocab.total_width(); }
    std::size_t meas_width() const { return meas_vocab.total_width(); }

    std::vector<double> encode_step(const SensorTimeStep& step) const;
    std::vector<double> encode_measurement(const MeasurementRecord& m, const std::string& monitor_marker) const;
};

struct SampleSplit {
    std::vector<JoinedSample> train, val, test;
};

struct PreprocessResult {
    FittedTransforms transforms;
    SampleSplit regression;  ///< model fitting / grouping evaluation
    SampleSplit labeling;    ///< pass/fail evaluation
    normgroups::GroupTable groups;
    std::size_t wafers_train = 0, wafers_val = 0, wafers_test = 0;
    std::size_t sensor_rows = 0, metrology_rows = 0;
    std::size_t outliers_dropped = 0;
    std::vector<std::string> diagnostics;
};

/// dedupe -> split -> datetime features -> degenerate-column drop -> min-max
/// -> median impute -> outlier filter (train) -> one-hot -> join.
PreprocessResult run_preprocess(const RawTable& sensor, const RawTable& metrology, const RawTable& limits,
                                const PreprocessConfig& cfg);

}  // namespace ssr::preprocess

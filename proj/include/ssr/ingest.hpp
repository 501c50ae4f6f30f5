#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ssr/csv.hpp"
#include "ssr/domain.hpp"

namespace ssr::ingest {

/// Column roles of the sensor table beyond the three fixed leading columns
/// (processing_id, product_id, timestamp).
struct SensorSchema {
    std::vector<std::string> numeric_columns;
    std::vector<std::string> categorical_columns;

    std::vector<std::string> required_columns() const;
};

/// Fixed metrology columns.
const std::vector<std::string>& metrology_columns();
/// Fixed control-limit columns.
const std::vector<std::string>& limit_columns();

/// Drops rows that exactly repeat an earlier row; keeps first-occurrence order.
RawTable dedupe(const RawTable& table);

/// Parsed sensor rows grouped by wafer (unsorted, as read).
using SensorSteps = std::map<WaferId, std::vector<SensorTimeStep>>;

SensorSteps parse_sensor_table(const RawTable& table, const SensorSchema& schema);

/// Parses metrology rows. `is_monitor` is set when the KQI label contains
/// `monitor_marker`.
std::vector<MeasurementRecord> parse_metrology_table(const RawTable& table, const std::string& monitor_marker);

/// Per-key (lcl, ucl) fallback limits. Keys use the canonical KQI.
using LimitTable = std::map<GroupKey, std::pair<double, double>>;

LimitTable parse_limit_table(const RawTable& table, const std::string& monitor_marker);

struct Assembly {
    std::vector<WaferRecord> wafers;  ///< sorted by id
    std::size_t orphan_measurements = 0;  ///< measurements with no sensor rows
    std::vector<std::string> diagnostics;
};

/// Sorts each wafer's steps chronologically and attaches its measurements.
/// Wafers failing validation are dropped and reported in `diagnostics`.
Assembly assemble_wafers(SensorSteps steps, const std::vector<MeasurementRecord>& measurements);

struct MonitorSplit {
    std::vector<MeasurementRecord> monitor;
    std::vector<MeasurementRecord> non_monitor;
};

MonitorSplit split_monitor(const std::vector<MeasurementRecord>& meas);

template <typename T>
struct TrainValTest {
    std::vector<T> train;
    std::vector<T> val;
    std::vector<T> test;
};

/// Sizes of a 7:2:1 split: val and test are floored, train takes the rest.
struct SplitSizes {
    std::size_t train, val, test;
};
SplitSizes split_sizes(std::size_t n);

/// Wafer-level 7:2:1 split, deterministic in `seed`. Input order does not
/// matter: wafers are ordered by id before shuffling.
TrainValTest<WaferRecord> split_train_val_test(std::vector<WaferRecord> wafers, std::uint64_t seed);

}  // namespace ssr::ingest

#include "ssr/ingest.hpp"

#include <algorithm>
#include <unordered_set>

#include "ssr/random.hpp"

namespace ssr::ingest {

std::vector<std::string> SensorSchema::required_columns() const {
    std::vector<std::string> cols{"processing_id", "product_id", "timestamp"};
    cols.insert(cols.end(), numeric_columns.begin(), numeric_columns.end());
    cols.insert(cols.end(), categorical_columns.begin(), categorical_columns.end());
    return cols;
}

const std::vector<std::string>& metrology_columns() {
    static const std::vector<std::string> cols{"processing_id", "product_id", "kqi",      "type",
                                               "stage",         "equipid",    "prod",     "meas_med",
                                               "passfail",      "inspection", "targ_min", "targ_max"};
    return cols;
}

const std::vector<std::string>& limit_columns() {
    static const std::vector<std::string> cols{"kqi", "type", "stage", "lcl", "ucl"};
    return cols;
}

RawTable dedupe(const RawTable& table) {
    RawTable out;
    out.column_names = table.column_names;
    std::unordered_set<std::string> seen;
    seen.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        std::string key;
        for (const auto& cell : row) {
            key += cell;
            key.push_back('\x1f');
        }
        if (seen.insert(std::move(key)).second) out.rows.push_back(row);
    }
    return out;
}

namespace {

double require_number(const std::string& cell, const char* what, std::size_t row) {
    auto v = parse_double(cell);
    if (!v) throw CsvError(std::string("missing ") + what + " at data row " + std::to_string(row + 1));
    return *v;
}

std::optional<double> optional_number(const std::string& cell, const char* what, std::size_t row) {
    try {
        return parse_double(cell);
    } catch (const CsvError&) {
        throw CsvError(std::string("bad ") + what + " '" + cell + "' at data row " + std::to_string(row + 1));
    }
}

}  // namespace

SensorSteps parse_sensor_table(const RawTable& table, const SensorSchema& schema) {
    const auto pid = table.index("processing_id");
    const auto prd = table.index("product_id");
    const auto ts = table.index("timestamp");
    std::vector<std::size_t> num, cat;
    for (const auto& c : schema.numeric_columns) num.push_back(table.index(c));
    for (const auto& c : schema.categorical_columns) cat.push_back(table.index(c));

    SensorSteps out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        SensorTimeStep step;
        step.timestamp = parse_timestamp(row[ts]);
        step.numeric.reserve(num.size());
        for (auto c : num) step.numeric.push_back(optional_number(row[c], table.column_names[c].c_str(), r));
        for (auto c : cat) step.categorical.push_back(row[c]);
        out[WaferId{row[pid], row[prd]}].push_back(std::move(step));
    }
    return out;
}

std::vector<MeasurementRecord> parse_metrology_table(const RawTable& table, const std::string& monitor_marker) {
    std::vector<std::size_t> idx;
    for (const auto& c : metrology_columns()) idx.push_back(table.index(c));
    std::vector<MeasurementRecord> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        MeasurementRecord m;
        m.id = {row[idx[0]], row[idx[1]]};
        m.kqi = row[idx[2]];
        m.mtype = row[idx[3]];
        m.stage = row[idx[4]];
        m.equipid = row[idx[5]];
        m.prod = row[idx[6]];
        m.meas_med = require_number(row[idx[7]], "meas_med", r);
        m.passfail = parse_passfail(row[idx[8]]);
        m.inspection = parse_inspection(row[idx[9]]);
        m.targ_min = optional_number(row[idx[10]], "targ_min", r);
        m.targ_max = optional_number(row[idx[11]], "targ_max", r);
        m.is_monitor = !monitor_marker.empty() && m.kqi.find(monitor_marker) != std::string::npos;
        out.push_back(std::move(m));
    }
    return out;
}

LimitTable parse_limit_table(const RawTable& table, const std::string& monitor_marker) {
    std::vector<std::size_t> idx;
    for (const auto& c : limit_columns()) idx.push_back(table.index(c));
    LimitTable out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        GroupKey key{canonical_kqi(row[idx[0]], monitor_marker), row[idx[1]], row[idx[2]]};
        out[key] = {require_number(row[idx[3]], "lcl", r), require_number(row[idx[4]], "ucl", r)};
    }
    return out;
}

Assembly assemble_wafers(SensorSteps steps, const std::vector<MeasurementRecord>& measurements) {
    Assembly result;
    std::map<WaferId, WaferRecord> wafers;
    for (auto& [id, s] : steps) {
        std::stable_sort(s.begin(), s.end(),
                         [](const SensorTimeStep& a, const SensorTimeStep& b) { return a.timestamp < b.timestamp; });
        wafers[id] = WaferRecord{id, std::move(s), {}};
    }
    for (const auto& m : measurements) {
        auto it = wafers.find(m.id);
        if (it == wafers.end()) {
            ++result.orphan_measurements;
            continue;
        }
        it->second.measurements.push_back(m);
    }
    result.wafers.reserve(wafers.size());
    for (auto& [id, w] : wafers) {
        try {
            validate_wafer(w);
        } catch (const ValidationError& e) {
            result.diagnostics.emplace_back(e.what());
            continue;
        }
        result.wafers.push_back(std::move(w));
    }
    return result;
}

MonitorSplit split_monitor(const std::vector<MeasurementRecord>& meas) {
    MonitorSplit out;
    for (const auto& m : meas) (m.is_monitor ? out.monitor : out.non_monitor).push_back(m);
    return out;
}

SplitSizes split_sizes(std::size_t n) {
    std::size_t val = n * 2 / 10;
    std::size_t test = n / 10;
    return {n - val - test, val, test};
}

TrainValTest<WaferRecord> split_train_val_test(std::vector<WaferRecord> wafers, std::uint64_t seed) {
    std::sort(wafers.begin(), wafers.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    Rng rng(seed);
    shuffle_in_place(std::span<WaferRecord>(wafers), rng);
    auto sizes = split_sizes(wafers.size());
    TrainValTest<WaferRecord> out;
    auto first = std::make_move_iterator(wafers.begin());
    out.train.assign(first, first + sizes.train);
    out.val.assign(first + sizes.train, first + sizes.train + sizes.val);
    out.test.assign(first + sizes.train + sizes.val, std::make_move_iterator(wafers.end()));
    return out;
}

}  // namespace ssr::ingest

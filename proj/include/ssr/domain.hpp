#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ssr {

/// Raised when a domain object violates one of its invariants.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A wafer is identified by its (processing id, product id) pair.
struct WaferId {
    std::string processing_id;
    std::string product_id;

    auto operator<=>(const WaferId&) const = default;
    bool operator==(const WaferId&) const = default;

    std::string str() const { return processing_id + "/" + product_id; }
};

struct WaferIdHash {
    std::size_t operator()(const WaferId& id) const noexcept;
};

/// Seconds since 1970-01-01T00:00:00 (UTC, no leap seconds).
using Timestamp = std::int64_t;

Timestamp parse_timestamp(std::string_view iso);
std::string format_timestamp(Timestamp t);

struct SensorTimeStep {
    Timestamp timestamp = 0;
    std::vector<std::optional<double>> numeric;
    std::vector<std::string> categorical;

    bool operator==(const SensorTimeStep&) const = default;
};

enum class PassFail { Pass, FailAvgHi, FailAvgLow, Other };
enum class Inspection { None, Rework, Scrap, Other };

PassFail parse_passfail(std::string_view s);
Inspection parse_inspection(std::string_view s);
std::string_view to_string(PassFail p);
std::string_view to_string(Inspection i);

/// (kqi, type, stage): the key used for target normalization.
struct GroupKey {
    std::string kqi;
    std::string mtype;
    std::string stage;

    auto operator<=>(const GroupKey&) const = default;
    bool operator==(const GroupKey&) const = default;

    std::string str() const { return kqi + "|" + mtype + "|" + stage; }
};

struct MeasurementRecord {
    WaferId id;
    std::string kqi;
    std::string mtype;
    std::string stage;
    std::string equipid;
    std::string prod;
    double meas_med = 0.0;
    PassFail passfail = PassFail::Pass;
    Inspection inspection = Inspection::None;
    std::optional<double> targ_min;
    std::optional<double> targ_max;
    bool is_monitor = false;

    bool operator==(const MeasurementRecord&) const = default;
};

/// Removes the monitor marker from a KQI label so that a monitor row and the
/// product rows inheriting its value share one category ("KQI-MON-1" -> "KQI-1").
std::string canonical_kqi(std::string_view kqi, std::string_view marker = "MON");

/// Group key of a measurement, using the canonical KQI.
GroupKey group_key(const MeasurementRecord& m);

/// Checks targ_min < targ_max when both are present.
void validate_measurement(const MeasurementRecord& m);

inline constexpr std::size_t kMaxSteps = 9;

struct WaferRecord {
    WaferId id;
    std::vector<SensorTimeStep> steps;
    std::vector<MeasurementRecord> measurements;

    bool operator==(const WaferRecord&) const = default;
};

/// Returns the record unchanged if the steps are non-empty, sorted by
/// timestamp, at most kMaxSteps long, and every measurement carries the
/// wafer's id. Throws ValidationError naming the violated invariant.
const WaferRecord& validate_wafer(const WaferRecord& record);

enum class LimitSource { Targ, LclUcl };
std::string_view to_string(LimitSource s);
LimitSource parse_limit_source(std::string_view s);

struct ControlLimits {
    double lcl = 0.0;
    double ucl = 0.0;
    LimitSource source = LimitSource::LclUcl;

    ControlLimits() = default;
    /// Throws ValidationError unless lcl < ucl.
    ControlLimits(double lcl, double ucl, LimitSource source);

    double width() const { return ucl - lcl; }
    bool operator==(const ControlLimits&) const = default;
};

/// Relative error eta (or +inf at zero truth), absolute error epsilon, and
/// the error band 1..6.
struct ErrorRecord {
    double eta = 0.0;
    double epsilon = 0.0;
    int group = 1;
};

void to_json(nlohmann::json& j, const WaferId& id);
void from_json(const nlohmann::json& j, WaferId& id);
void to_json(nlohmann::json& j, const SensorTimeStep& s);
void from_json(const nlohmann::json& j, SensorTimeStep& s);
void to_json(nlohmann::json& j, const MeasurementRecord& m);
void from_json(const nlohmann::json& j, MeasurementRecord& m);
void to_json(nlohmann::json& j, const WaferRecord& w);
void from_json(const nlohmann::json& j, WaferRecord& w);

}  // namespace ssr

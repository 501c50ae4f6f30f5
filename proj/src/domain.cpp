#include "ssr/domain.hpp"

#include <chrono>
#include <cstdio>
#include <functional>

namespace ssr {

std::size_t WaferIdHash::operator()(const WaferId& id) const noexcept {
    std::size_t h = std::hash<std::string>{}(id.processing_id);
    return h ^ (std::hash<std::string>{}(id.product_id) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

Timestamp parse_timestamp(std::string_view iso) {
    int y = 0, mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
    std::string buf(iso);
    char sep = 0;
    int n = std::sscanf(buf.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d", &y, &mo, &d, &sep, &hh, &mm, &ss);
    bool ok = (n == 3) || (n == 7 && (sep == 'T' || sep == ' '));
    if (!ok) throw ValidationError("unparseable timestamp '" + buf + "'");
    using namespace std::chrono;
    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 59)
        throw ValidationError("unparseable timestamp '" + buf + "'");
    auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<Timestamp>(days) * 86400 + hh * 3600 + mm * 60 + ss;
}

std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    auto days = t >= 0 ? t / 86400 : -((-t + 86399) / 86400);
    auto secs = t - days * 86400;
    year_month_day ymd{sys_days{std::chrono::days{days}}};
    char out[32];
    std::snprintf(out, sizeof out, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60), static_cast<int>(secs % 60));
    return out;
}

PassFail parse_passfail(std::string_view s) {
    if (s == "PASS") return PassFail::Pass;
    if (s == "FAIL_AVG_HI") return PassFail::FailAvgHi;
    if (s == "FAIL_AVG_LOW") return PassFail::FailAvgLow;
    return PassFail::Other;
}

Inspection parse_inspection(std::string_view s) {
    if (s.empty() || s == "NONE") return Inspection::None;
    if (s == "REWORK") return Inspection::Rework;
    if (s == "SCRAP") return Inspection::Scrap;
    return Inspection::Other;
}

std::string_view to_string(PassFail p) {
    switch (p) {
        case PassFail::Pass: return "PASS";
        case PassFail::FailAvgHi: return "FAIL_AVG_HI";
        case PassFail::FailAvgLow: return "FAIL_AVG_LOW";
        case PassFail::Other: break;
    }
    return "OTHER";
}

std::string_view to_string(Inspection i) {
    switch (i) {
        case Inspection::None: return "NONE";
        case Inspection::Rework: return "REWORK";
        case Inspection::Scrap: return "SCRAP";
        case Inspection::Other: break;
    }
    return "OTHER";
}

std::string_view to_string(LimitSource s) { return s == LimitSource::Targ ? "TARG" : "LCL_UCL"; }

LimitSource parse_limit_source(std::string_view s) {
    if (s == "TARG") return LimitSource::Targ;
    if (s == "LCL_UCL") return LimitSource::LclUcl;
    throw ValidationError("unknown limit source '" + std::string(s) + "'");
}

std::string canonical_kqi(std::string_view kqi, std::string_view marker) {
    std::string s(kqi);
    if (marker.empty()) return s;
    auto pos = s.find(marker);
    if (pos == std::string::npos) return s;
    auto end = pos + marker.size();
    // Swallow one adjoining separator so "KQI-MON-1" becomes "KQI-1".
    if (end < s.size() && (s[end] == '-' || s[end] == '_'))
        ++end;
    else if (pos > 0 && (s[pos - 1] == '-' || s[pos - 1] == '_'))
        --pos;
    s.erase(pos, end - pos);
    return s;
}

GroupKey group_key(const MeasurementRecord& m) { return {canonical_kqi(m.kqi), m.mtype, m.stage}; }

void validate_measurement(const MeasurementRecord& m) {
    if (m.targ_min && m.targ_max && !(*m.targ_min < *m.targ_max))
        throw ValidationError("targ_min must be below targ_max for wafer " + m.id.str());
}

const WaferRecord& validate_wafer(const WaferRecord& record) {
    if (record.steps.empty()) throw ValidationError("empty steps: wafer " + record.id.str());
    if (record.steps.size() > kMaxSteps)
        throw ValidationError("too many steps: wafer " + record.id.str() + " has " +
                              std::to_string(record.steps.size()));
    for (std::size_t i = 1; i < record.steps.size(); ++i)
        if (record.steps[i].timestamp < record.steps[i - 1].timestamp)
            throw ValidationError("unsorted steps: wafer " + record.id.str());
    for (const auto& m : record.measurements) {
        if (m.id != record.id)
            throw ValidationError("mismatched ids: measurement " + m.id.str() + " attached to wafer " +
                                  record.id.str());
        validate_measurement(m);
    }
    return record;
}

ControlLimits::ControlLimits(double lcl_, double ucl_, LimitSource source_)
    : lcl(lcl_), ucl(ucl_), source(source_) {
    if (!(lcl < ucl)) throw ValidationError("control limits require lcl < ucl");
}

void to_json(nlohmann::json& j, const WaferId& id) { j = {id.processing_id, id.product_id}; }

void from_json(const nlohmann::json& j, WaferId& id) {
    id.processing_id = j.at(0).get<std::string>();
    id.product_id = j.at(1).get<std::string>();
}

void to_json(nlohmann::json& j, const SensorTimeStep& s) {
    nlohmann::json numeric = nlohmann::json::array();
    for (const auto& v : s.numeric) numeric.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    j = {{"t", s.timestamp}, {"num", numeric}, {"cat", s.categorical}};
}

void from_json(const nlohmann::json& j, SensorTimeStep& s) {
    s.timestamp = j.at("t").get<Timestamp>();
    s.numeric.clear();
    for (const auto& v : j.at("num"))
        s.numeric.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
    s.categorical = j.at("cat").get<std::vector<std::string>>();
}

void to_json(nlohmann::json& j, const MeasurementRecord& m) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    j = {{"id", m.id},
         {"kqi", m.kqi},
         {"type", m.mtype},
         {"stage", m.stage},
         {"equipid", m.equipid},
         {"prod", m.prod},
         {"meas_med", m.meas_med},
         {"passfail", to_string(m.passfail)},
         {"inspection", to_string(m.inspection)},
         {"targ_min", opt(m.targ_min)},
         {"targ_max", opt(m.targ_max)},
         {"is_monitor", m.is_monitor}};
}

void from_json(const nlohmann::json& j, MeasurementRecord& m) {
    auto opt = [](const nlohmann::json& v) {
        return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
    };
    m.id = j.at("id").get<WaferId>();
    m.kqi = j.at("kqi").get<std::string>();
    m.mtype = j.at("type").get<std::string>();
    m.stage = j.at("stage").get<std::string>();
    m.equipid = j.at("equipid").get<std::string>();
    m.prod = j.at("prod").get<std::string>();
    m.meas_med = j.at("meas_med").get<double>();
    m.passfail = parse_passfail(j.at("passfail").get<std::string>());
    m.inspection = parse_inspection(j.at("inspection").get<std::string>());
    m.targ_min = opt(j.at("targ_min"));
    m.targ_max = opt(j.at("targ_max"));
    m.is_monitor = j.at("is_monitor").get<bool>();
}

void to_json(nlohmann::json& j, const WaferRecord& w) {
    j = {{"id", w.id}, {"steps", w.steps}, {"measurements", w.measurements}};
}

void from_json(const nlohmann::json& j, WaferRecord& w) {
    w.id = j.at("id").get<WaferId>();
    w.steps = j.at("steps").get<std::vector<SensorTimeStep>>();
    w.measurements = j.at("measurements").get<std::vector<MeasurementRecord>>();
}

}  // namespace ssr

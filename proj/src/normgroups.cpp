#include "ssr/normgroups.hpp"

#include "ssr/csv.hpp"

namespace ssr::normgroups {

std::optional<ControlLimits> resolve_control_limits(const MeasurementRecord& m, const ingest::LimitTable& fallback,
                                                    std::vector<std::string>* diagnostics) {
    if (m.targ_min && m.targ_max) {
        if (*m.targ_min >= *m.targ_max) {
            if (diagnostics)
                diagnostics->push_back("skipped " + m.id.str() + " " + group_key(m).str() +
                                       ": targ_min >= targ_max");
            return std::nullopt;
        }
        return ControlLimits(*m.targ_min, *m.targ_max, LimitSource::Targ);
    }
    auto it = fallback.find(group_key(m));
    if (it == fallback.end()) return std::nullopt;
    auto [lcl, ucl] = it->second;
    if (!(lcl < ucl)) {
        if (diagnostics) diagnostics->push_back("skipped " + group_key(m).str() + ": lcl >= ucl");
        return std::nullopt;
    }
    return ControlLimits(lcl, ucl, LimitSource::LclUcl);
}

GroupTable build_groups(const std::vector<std::pair<GroupKey, ControlLimits>>& resolved) {
    GroupTable out;
    for (const auto& [key, lim] : resolved) {
        double width = lim.ucl - lim.lcl;
        if (width < kMinWidth) continue;
        auto it = out.find(key);
        if (it == out.end()) {
            out.emplace(key, NormalizationGroup{key, lim.lcl, lim.ucl});
            continue;
        }
        double best = it->second.b2 - it->second.b1;
        if (width < best || (width == best && lim.lcl < it->second.b1)) it->second = {key, lim.lcl, lim.ucl};
    }
    return out;
}

void write_groups_csv(const std::filesystem::path& path, const GroupTable& groups) {
    RawTable t;
    t.column_names = {"kqi", "type", "stage", "b1", "b2"};
    for (const auto& [key, g] : groups)
        t.rows.push_back({key.kqi, key.mtype, key.stage, format_double(g.b1), format_double(g.b2)});
    write_table(path, t);
}

GroupTable read_groups_csv(const std::filesystem::path& path) {
    static const std::vector<std::string> cols{"kqi", "type", "stage", "b1", "b2"};
    auto t = load_table(path, cols);
    GroupTable out;
    for (const auto& row : t.rows) {
        GroupKey key{row[t.index("kqi")], row[t.index("type")], row[t.index("stage")]};
        out[key] = {key, parse_double(row[t.index("b1")]).value(), parse_double(row[t.index("b2")]).value()};
    }
    return out;
}

}  // namespace ssr::normgroups

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ssr/domain.hpp"
#include "ssr/ingest.hpp"

namespace ssr::normgroups {

/// A (kqi, type, stage) key with the constants used to rescale its targets.
struct NormalizationGroup {
    GroupKey key;
    double b1 = 0.0;
    double b2 = 1.0;

    bool operator==(const NormalizationGroup&) const = default;
};

using GroupTable = std::map<GroupKey, NormalizationGroup>;

/// Widths below this are degenerate and never selected.
inline constexpr double kMinWidth = 1e-9;

/// targ_min/targ_max when both are present, else the table's (lcl, ucl) for
/// the record's key, else nullopt. A record with targ_min >= targ_max is
/// skipped (nullopt) and a line is appended to `diagnostics` if given.
std::optional<ControlLimits> resolve_control_limits(const MeasurementRecord& m, const ingest::LimitTable& fallback,
                                                    std::vector<std::string>* diagnostics = nullptr);

/// Per key, the limit pair with the smallest width (ties: smallest b1).
GroupTable build_groups(const std::vector<std::pair<GroupKey, ControlLimits>>& resolved);

inline double normalize_target(double y, const NormalizationGroup& g) { return (y - g.b1) / (g.b2 - g.b1); }
inline double denormalize(double y_tilde, const NormalizationGroup& g) { return y_tilde * (g.b2 - g.b1) + g.b1; }

/// CSV with columns kqi, type, stage, b1, b2.
void write_groups_csv(const std::filesystem::path& path, const GroupTable& groups);
GroupTable read_groups_csv(const std::filesystem::path& path);

}  // namespace ssr::normgroups

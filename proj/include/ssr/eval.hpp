#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ssr/domain.hpp"

namespace ssr::eval {

/// epsilon = |yhat - y|; eta = epsilon / |y|, or +inf when y == 0.
ErrorRecord relative_error(double yhat, double y);

/// (eta, epsilon) thresholds of groups 1..5; group 6 is everything else.
inline constexpr std::array<std::pair<double, double>, 5> kGroupThresholds{
    {{0.01, 0.1}, {0.05, 0.5}, {0.10, 1.0}, {0.50, 5.0}, {1.00, 10.0}}};

/// Smallest k in 1..5 with eta < eta_k or epsilon < eps_k (strict), else 6.
int assign_group(double eta, double epsilon);
inline int assign_group(const ErrorRecord& e) { return assign_group(e.eta, e.epsilon); }

struct GroupingReport {
    std::array<std::size_t, 6> counts{};
    std::size_t total = 0;
    double decent_rate = 0.0;  ///< (n1 + n2) / total
};

/// Builds a report from group counts directly.
GroupingReport report_from_counts(const std::array<std::size_t, 6>& counts);

/// Throws std::invalid_argument when empty or lengths differ.
GroupingReport grouping_report(std::span<const double> predictions, std::span<const double> truths);

/// passfail in {FAIL_AVG_HI, FAIL_AVG_LOW}, inspection in {REWORK, SCRAP},
/// and meas_med outside [lcl, ucl]; all three required.
bool label_fail_wafer(PassFail passfail, Inspection inspection, double meas_med, const ControlLimits& limits);
inline bool label_fail_wafer(const MeasurementRecord& m, const ControlLimits& limits) {
    return label_fail_wafer(m.passfail, m.inspection, m.meas_med, limits);
}

/// Pass interval (b1* + f r, b2* - f r) with r = b2* - b1*.
struct FailPredicate {
    double b1_star = 0.0;
    double b2_star = 1.0;
    double f = 0.0;

    /// Throws std::invalid_argument unless b1* < b2* and 0 <= f < 0.5.
    FailPredicate(double b1_star, double b2_star, double f);
    FailPredicate(const ControlLimits& limits, double f) : FailPredicate(limits.lcl, limits.ucl, f) {}

    double r() const { return b2_star - b1_star; }
};

/// True iff yhat lies outside the open pass interval (boundaries fail).
bool predict_fail(double yhat, const FailPredicate& p);

struct ConfusionCounts {
    std::size_t tp = 0, fn = 0, fp = 0, tn = 0;

    /// NaN when there are no positives.
    double recall() const;
    /// NaN when there are no negatives.
    double fpr() const;
};

/// One labelled prediction for the pass/fail sweep.
struct LabeledPrediction {
    double yhat = 0.0;
    ControlLimits limits;
    bool is_fail = false;
};

struct SweepRow {
    double f = 0.0;
    ConfusionCounts counts;
    double recall = 0.0;
    double fpr = 0.0;
};

/// Default f grid {0, 0.1, 0.2, 0.3, 0.35, 0.4}.
const std::vector<double>& default_f_grid();

struct SweepResult {
    std::vector<SweepRow> rows;  ///< sorted by f
    std::vector<std::string> warnings;
};

SweepResult recall_fpr_sweep(std::span<const LabeledPrediction> predictions, std::vector<double> f_values);

/// "[n1, n2, n3, n4, n5, n6]"
std::string format_counts(const GroupingReport& r);

/// One named model's evaluation, for reports.
struct ModelEvaluation {
    std::string name;  ///< e.g. "RE", "NL1"
    GroupingReport grouping;
    SweepResult sweep;
    std::size_t excluded_no_group = 0;
    std::size_t excluded_no_limits = 0;
};

/// Human-readable text: grouping rows in table form, decent rate, sweep table.
std::string render_text_report(std::span<const ModelEvaluation> models);

/// CSV rows: section,model,key,value... (see README).
void write_report_csv(const std::filesystem::path& path, std::span<const ModelEvaluation> models);

/// CSV with columns f, recall, fpr.
void write_plot_csv(const std::filesystem::path& path, const SweepResult& sweep);

}  // namespace ssr::eval

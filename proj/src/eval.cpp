#include "ssr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ssr/csv.hpp"

namespace ssr::eval {

ErrorRecord relative_error(double yhat, double y) {
    ErrorRecord e;
    e.epsilon = std::abs(yhat - y);
    e.eta = y == 0.0 ? std::numeric_limits<double>::infinity() : e.epsilon / std::abs(y);
    e.group = assign_group(e.eta, e.epsilon);
    return e;
}

int assign_group(double eta, double epsilon) {
    for (std::size_t k = 0; k < kGroupThresholds.size(); ++k) {
        auto [eta_max, eps_max] = kGroupThresholds[k];
        if (eta < eta_max || epsilon < eps_max) return static_cast<int>(k) + 1;
    }
    return 6;
}

GroupingReport report_from_counts(const std::array<std::size_t, 6>& counts) {
    GroupingReport r;
    r.counts = counts;
    for (auto c : counts) r.total += c;
    r.decent_rate = r.total ? static_cast<double>(counts[0] + counts[1]) / static_cast<double>(r.total) : 0.0;
    return r;
}

GroupingReport grouping_report(std::span<const double> predictions, std::span<const double> truths) {
    if (predictions.size() != truths.size()) throw std::invalid_argument("prediction/truth length mismatch");
    if (predictions.empty()) throw std::invalid_argument("grouping report of empty input");
    std::array<std::size_t, 6> counts{};
    for (std::size_t i = 0; i < predictions.size(); ++i)
        ++counts[static_cast<std::size_t>(relative_error(predictions[i], truths[i]).group - 1)];
    return report_from_counts(counts);
}

bool label_fail_wafer(PassFail passfail, Inspection inspection, double meas_med, const ControlLimits& limits) {
    const bool fail_label = passfail == PassFail::FailAvgHi || passfail == PassFail::FailAvgLow;
    const bool inspected = inspection == Inspection::Rework || inspection == Inspection::Scrap;
    const bool outside = meas_med > limits.ucl || meas_med < limits.lcl;
    return fail_label && inspected && outside;
}

FailPredicate::FailPredicate(double b1, double b2, double f_) : b1_star(b1), b2_star(b2), f(f_) {
    if (!(b1_star < b2_star)) throw std::invalid_argument("fail predicate needs b1* < b2*");
    if (!(f >= 0.0 && f < 0.5)) throw std::invalid_argument("f must lie in [0, 0.5)");
}

bool predict_fail(double yhat, const FailPredicate& p) {
    const double lo = p.b1_star + p.f * p.r();
    const double hi = p.b2_star - p.f * p.r();
    return !(yhat > lo && yhat < hi);
}

double ConfusionCounts::recall() const {
    auto pos = tp + fn;
    return pos ? static_cast<double>(tp) / static_cast<double>(pos) : std::numeric_limits<double>::quiet_NaN();
}

double ConfusionCounts::fpr() const {
    auto neg = fp + tn;
    return neg ? static_cast<double>(fp) / static_cast<double>(neg) : std::numeric_limits<double>::quiet_NaN();
}

const std::vector<double>& default_f_grid() {
    static const std::vector<double> grid{0.0, 0.1, 0.2, 0.3, 0.35, 0.4};
    return grid;
}

SweepResult recall_fpr_sweep(std::span<const LabeledPrediction> predictions, std::vector<double> f_values) {
    std::sort(f_values.begin(), f_values.end());
    SweepResult res;
    std::size_t positives = 0;
    for (const auto& p : predictions) positives += p.is_fail ? 1 : 0;
    if (positives == 0) res.warnings.push_back("no fail wafers among evaluated samples: recall undefined");
    if (positives == predictions.size()) res.warnings.push_back("no passing wafers among evaluated samples: FPR undefined");
    for (double f : f_values) {
        SweepRow row;
        row.f = f;
        for (const auto& p : predictions) {
            bool flagged = predict_fail(p.yhat, FailPredicate(p.limits, f));
            auto& c = row.counts;
            if (p.is_fail)
                ++(flagged ? c.tp : c.fn);
            else
                ++(flagged ? c.fp : c.tn);
        }
        row.recall = row.counts.recall();
        row.fpr = row.counts.fpr();
        res.rows.push_back(row);
    }
    return res;
}

std::string format_counts(const GroupingReport& r) {
    std::string s = "[";
    for (std::size_t k = 0; k < r.counts.size(); ++k) {
        if (k) s += ", ";
        s += std::to_string(r.counts[k]);
    }
    return s + "]";
}

namespace {

std::string fixed(double v, int digits) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string render_text_report(std::span<const ModelEvaluation> models) {
    std::ostringstream os;
    os << "Error grouping (test set)\n";
    os << "model  counts [g1..g6]                         N       decent\n";
    for (const auto& m : models) {
        const auto& g = m.grouping;
        std::string counts = format_counts(g);
        os << m.name << std::string(m.name.size() < 7 ? 7 - m.name.size() : 1, ' ') << counts
           << std::string(counts.size() < 40 ? 40 - counts.size() : 1, ' ') << g.total << "  "
           << (g.counts[0] + g.counts[1]) << "/" << g.total << " = " << fixed(100.0 * g.decent_rate, 2) << "%\n";
        if (m.excluded_no_group) os << "  excluded (no normalization group): " << m.excluded_no_group << "\n";
    }
    for (const auto& m : models) {
        os << "\nPass/fail sweep for " << m.name << "\n";
        if (m.excluded_no_limits) os << "  excluded (no control limits): " << m.excluded_no_limits << "\n";
        for (const auto& w : m.sweep.warnings) os << "  warning: " << w << "\n";
        os << "  f      recall   fpr      tp   fn   fp   tn\n";
        for (const auto& r : m.sweep.rows) {
            char line[160];
            std::snprintf(line, sizeof line, "  %-5s  %-7s  %-7s  %-4zu %-4zu %-4zu %zu\n", format_double(r.f).c_str(),
                          fixed(r.recall, 4).c_str(), fixed(r.fpr, 4).c_str(), r.counts.tp, r.counts.fn, r.counts.fp,
                          r.counts.tn);
            os << line;
        }
    }
    return os.str();
}

void write_report_csv(const std::filesystem::path& path, std::span<const ModelEvaluation> models) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "model,metric,f,value\n";
    for (const auto& m : models) {
        for (std::size_t k = 0; k < 6; ++k)
            out << m.name << ",group" << (k + 1) << ",," << m.grouping.counts[k] << '\n';
        out << m.name << ",total,," << m.grouping.total << '\n';
        out << m.name << ",decent_rate,," << format_double(m.grouping.decent_rate) << '\n';
        out << m.name << ",excluded_no_group,," << m.excluded_no_group << '\n';
        out << m.name << ",excluded_no_limits,," << m.excluded_no_limits << '\n';
        for (const auto& r : m.sweep.rows) {
            auto f = format_double(r.f);
            out << m.name << ",recall," << f << ',' << format_double(r.recall) << '\n';
            out << m.name << ",fpr," << f << ',' << format_double(r.fpr) << '\n';
            out << m.name << ",tp," << f << ',' << r.counts.tp << '\n';
            out << m.name << ",fn," << f << ',' << r.counts.fn << '\n';
            out << m.name << ",fp," << f << ',' << r.counts.fp << '\n';
            out << m.name << ",tn," << f << ',' << r.counts.tn << '\n';
        }
    }
}

void write_plot_csv(const std::filesystem::path& path, const SweepResult& sweep) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "f,recall,fpr\n";
    for (const auto& r : sweep.rows)
        out << format_double(r.f) << ',' << format_double(r.recall) << ',' << format_double(r.fpr) << '\n';
}

}  // namespace ssr::eval

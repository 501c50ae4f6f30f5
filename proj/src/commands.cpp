#include "ssr/commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>

#include "ssr/csv.hpp"
#include "ssr/synthgen.hpp"
#include "ssr/train.hpp"

namespace ssr::cli {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
    auto probe = dir / ".write_probe";
    {
        std::ofstream f(probe);
        if (!f) throw std::runtime_error("output directory " + dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
}

std::vector<preprocess::JoinedSample> filtered(std::vector<preprocess::JoinedSample> samples, const KeyFilter& f) {
    if (!f.empty()) std::erase_if(samples, [&](const auto& s) { return !f.matches(s.key); });
    return samples;
}

std::string model_name(const nn::Checkpoint& ckpt) {
    std::string loss = ckpt.meta.value("loss", "model");
    for (auto& c : loss) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return loss;
}

nn::Checkpoint load_matching(const fs::path& path, const store::Manifest& manifest) {
    auto ckpt = nn::read_checkpoint(path);
    if (ckpt.manifest_hash != manifest.hash())
        throw std::runtime_error("manifest mismatch: " + path.string() + " was trained on features " +
                                 ckpt.manifest_hash + " but the feature directory has " + manifest.hash());
    if (ckpt.params.cfg.sensor_dim != manifest.sensor_width || ckpt.params.cfg.meas_dim != manifest.meas_width)
        throw std::runtime_error("checkpoint dimensions do not match the feature manifest");
    return ckpt;
}

std::vector<eval::LabeledPrediction> labeled(const nn::Checkpoint& ckpt, const store::Manifest& manifest,
                                             const std::vector<preprocess::JoinedSample>& samples,
                                             std::size_t& excluded) {
    std::vector<preprocess::JoinedSample> with_limits;
    for (const auto& s : samples)
        if (s.limits) with_limits.push_back(s);
    excluded = samples.size() - with_limits.size();
    auto preds = predict_original_scale(ckpt, manifest.groups, with_limits);
    std::vector<eval::LabeledPrediction> out;
    for (std::size_t i = 0; i < with_limits.size(); ++i) {
        if (!preds[i]) {
            ++excluded;
            continue;
        }
        const auto& s = with_limits[i];
        out.push_back({*preds[i], *s.limits, eval::label_fail_wafer(s.passfail, s.inspection, s.target, *s.limits)});
    }
    return out;
}

}  // namespace

void cmd_generate(const RunConfig& cfg, std::ostream& out) {
    if (!cfg.synth_n_wafers_set) throw ConfigError("missing config key 'synth.n_wafers'");
    ensure_dir(cfg.paths.data_dir);
    auto data = synth::generate(cfg.synth);
    synth::write_output(cfg.paths.data_dir, data);
    const auto& dir = cfg.paths.data_dir;
    out << (dir / synth::kSensorFile).string() << ": " << data.sensor.rows.size() << " rows\n";
    out << (dir / synth::kMetrologyFile).string() << ": " << data.metrology.rows.size() << " rows\n";
    out << (dir / synth::kLimitsFile).string() << ": " << data.limits.rows.size() << " rows\n";
    out << (dir / synth::kTruthFile).string() << "\n";
}

store::Manifest cmd_preprocess(const RunConfig& cfg, std::ostream& out) {
    const auto& dir = cfg.paths.data_dir;
    for (const char* name : {synth::kSensorFile, synth::kMetrologyFile, synth::kLimitsFile})
        if (!fs::exists(dir / name)) throw std::runtime_error("data directory " + dir.string() + " has no " + name);
    auto pcfg = cfg.preprocess_config();
    auto sensor = load_table(dir / synth::kSensorFile, pcfg.schema.required_columns());
    auto metrology = load_table(dir / synth::kMetrologyFile, ingest::metrology_columns());
    auto limits = load_table(dir / synth::kLimitsFile, ingest::limit_columns());

    auto result = preprocess::run_preprocess(sensor, metrology, limits, pcfg);
    for (const auto& d : result.diagnostics) std::cerr << "preprocess: " << d << '\n';
    ensure_dir(cfg.paths.features_dir);
    auto manifest = store::write_features(cfg.paths.features_dir, result, pcfg);

    out << "wafers train/val/test: " << result.wafers_train << "/" << result.wafers_val << "/" << result.wafers_test
        << "\n";
    out << "S = " << manifest.sensor_width << ", M = " << manifest.meas_width << "\n";
    out << "normalization groups: " << manifest.groups.size() << "\n";
    out << "training outliers dropped: " << result.outliers_dropped << "\n";
    for (const auto& [name, counts] : manifest.buckets)
        for (auto [n, count] : counts) out << name << " n_steps=" << n << ": " << count << "\n";
    out << "manifest hash " << manifest.hash() << "\n";
    return manifest;
}

TrainSummary cmd_train(const RunConfig& cfg, std::ostream& out) {
    const auto& dir = cfg.paths.features_dir;
    auto manifest = store::read_manifest(dir);
    auto train_raw = filtered(store::read_samples(dir, manifest, store::Split::Train, store::Stream::Regression),
                              cfg.train_filter);
    auto val_raw = filtered(store::read_samples(dir, manifest, store::Split::Val, store::Stream::Regression),
                            cfg.train_filter);
    auto train_set = train::prepare(train_raw, cfg.train.loss, manifest.groups, cfg.train.re);
    auto val_set = train::prepare(val_raw, cfg.train.loss, manifest.groups, cfg.train.re);
    if (train_set.samples.empty() || val_set.samples.empty())
        throw std::runtime_error("empty training or validation set after filter '" + cfg.train_filter.str() + "'");

    auto arch = cfg.arch(manifest.sensor_width, manifest.meas_width);
    out << "training " << train::to_string(cfg.train.loss) << " model (" << cfg.model.arch << ", "
        << nn::param_count(arch) << " parameters) on " << train_set.samples.size() << " samples, "
        << val_set.samples.size() << " validation";
    if (!cfg.train_filter.empty()) out << ", filter " << cfg.train_filter.str();
    out << "\n";
    if (train_set.excluded + val_set.excluded)
        std::cerr << "train: " << train_set.excluded + val_set.excluded
                  << " samples without a normalization group excluded\n";

    auto fit = train::fit(arch, train_set, val_set, cfg.train, [&](const train::EpochRecord& r) {
        out << "epoch " << r.epoch << " train " << format_double(r.train_loss) << " val "
            << format_double(r.val_loss) << (r.is_best ? " *" : "") << "\n";
        out.flush();
    });

    ensure_dir(cfg.paths.model_dir);
    nn::Checkpoint ckpt;
    ckpt.params = fit.best;
    ckpt.manifest_hash = manifest.hash();
    ckpt.meta = {{"loss", std::string(train::to_string(cfg.train.loss))},
                 {"arch", cfg.model.arch},
                 {"filter", cfg.train_filter.str()},
                 {"re_c", cfg.train.re.c},
                 {"best_epoch", fit.best_epoch},
                 {"best_val_loss", fit.best_val_loss},
                 {"seed", cfg.train.seed}};
    TrainSummary summary;
    summary.checkpoint = cfg.paths.model_dir / kCheckpointFile;
    nn::write_checkpoint(summary.checkpoint, ckpt);
    train::write_history_csv((cfg.paths.model_dir / kHistoryFile).string(), fit.history);
    summary.train_samples = train_set.samples.size();
    summary.val_samples = val_set.samples.size();
    summary.excluded = train_set.excluded + val_set.excluded;
    summary.best_epoch = fit.best_epoch;
    summary.best_val_loss = fit.best_val_loss;
    summary.epochs_run = fit.history.size();
    out << "best epoch " << fit.best_epoch << " val " << format_double(fit.best_val_loss) << "; wrote "
        << summary.checkpoint.string() << "\n";
    return summary;
}

std::vector<std::optional<double>> predict_original_scale(const nn::Checkpoint& ckpt,
                                                          const normgroups::GroupTable& groups,
                                                          const std::vector<preprocess::JoinedSample>& samples) {
    const bool nl1 = train::parse_loss(ckpt.meta.value("loss", "re")) == train::LossKind::NL1;
    std::vector<train::PreparedSample> prepared;
    prepared.reserve(samples.size());
    for (const auto& s : samples) prepared.push_back({&s.features, s.n_steps, s.target, 1.0});
    auto raw = train::predict(ckpt.params, prepared);
    std::vector<std::optional<double>> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!nl1) {
            out[i] = raw[i];
            continue;
        }
        auto it = groups.find(samples[i].key);
        if (it != groups.end()) out[i] = normgroups::denormalize(raw[i], it->second);
    }
    return out;
}

std::vector<eval::ModelEvaluation> cmd_evaluate(const RunConfig& cfg, std::vector<fs::path> checkpoints,
                                                std::ostream& out) {
    if (checkpoints.empty()) checkpoints.push_back(cfg.paths.model_dir / kCheckpointFile);
    const auto& dir = cfg.paths.features_dir;
    auto manifest = store::read_manifest(dir);
    auto test = filtered(store::read_samples(dir, manifest, store::Split::Test, store::Stream::Regression),
                         cfg.eval.test_filter);
    auto labeling = filtered(store::read_samples(dir, manifest, store::Split::Test, store::Stream::Labeling),
                             cfg.eval.test_filter);
    if (test.empty()) throw std::runtime_error("no test samples after filter '" + cfg.eval.test_filter.str() + "'");

    std::vector<eval::ModelEvaluation> results;
    std::map<std::string, int> seen;
    for (const auto& path : checkpoints) {
        auto ckpt = load_matching(path, manifest);
        eval::ModelEvaluation m;
        m.name = model_name(ckpt);
        if (int n = seen[m.name]++; n > 0) m.name += "#" + std::to_string(n + 1);

        auto preds = predict_original_scale(ckpt, manifest.groups, test);
        std::vector<double> yhat, truth;
        for (std::size_t i = 0; i < test.size(); ++i) {
            if (!preds[i]) {
                ++m.excluded_no_group;
                continue;
            }
            yhat.push_back(*preds[i]);
            truth.push_back(test[i].target);
        }
        if (yhat.empty()) throw std::runtime_error(m.name + ": no test sample could be scored");
        m.grouping = eval::grouping_report(yhat, truth);

        auto lp = labeled(ckpt, manifest, labeling, m.excluded_no_limits);
        m.sweep = eval::recall_fpr_sweep(lp, cfg.eval.f_grid);
        for (const auto& w : m.sweep.warnings) std::cerr << "evaluate " << m.name << ": " << w << '\n';
        if (m.excluded_no_limits)
            std::cerr << "evaluate " << m.name << ": " << m.excluded_no_limits
                      << " labeling samples without control limits excluded from the sweep\n";
        results.push_back(std::move(m));
    }

    ensure_dir(cfg.paths.report_dir);
    auto text = eval::render_text_report(results);
    {
        std::ofstream f(cfg.paths.report_dir / kReportText, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write report");
        f << text;
    }
    eval::write_report_csv(cfg.paths.report_dir / kReportCsv, results);
    for (const auto& m : results) eval::write_plot_csv(cfg.paths.report_dir / ("recall_fpr_" + m.name + ".csv"), m.sweep);
    out << text;
    return results;
}

eval::SweepResult cmd_sweep(const RunConfig& cfg, const fs::path& checkpoint, std::ostream& out) {
    const auto& dir = cfg.paths.features_dir;
    auto manifest = store::read_manifest(dir);
    auto ckpt = load_matching(checkpoint, manifest);
    auto labeling = filtered(store::read_samples(dir, manifest, store::Split::Test, store::Stream::Labeling),
                             cfg.eval.test_filter);
    std::size_t excluded = 0;
    auto lp = labeled(ckpt, manifest, labeling, excluded);
    auto sweep = eval::recall_fpr_sweep(lp, cfg.eval.f_grid);
    for (const auto& w : sweep.warnings) std::cerr << "sweep: " << w << '\n';
    ensure_dir(cfg.paths.report_dir);
    auto name = model_name(ckpt);
    eval::write_plot_csv(cfg.paths.report_dir / ("sweep_" + name + ".csv"), sweep);
    out << "f,recall,fpr\n";
    for (const auto& r : sweep.rows)
        out << format_double(r.f) << ',' << format_double(r.recall) << ',' << format_double(r.fpr) << '\n';
    return sweep;
}

}  // namespace ssr::cli

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ssr/commands.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::string data_dir, features_dir, model_dir, report_dir;
    std::string out;  ///< output directory of whichever subcommand ran
};

ssr::RunConfig load_config(const Common& c) {
    auto cfg = c.config.empty() ? ssr::RunConfig::parse("") : ssr::RunConfig::load(c.config);
    if (!c.data_dir.empty()) cfg.paths.data_dir = c.data_dir;
    if (!c.features_dir.empty()) cfg.paths.features_dir = c.features_dir;
    if (!c.model_dir.empty()) cfg.paths.model_dir = c.model_dir;
    if (!c.report_dir.empty()) cfg.paths.report_dir = c.report_dir;
    return cfg;
}

void add_common(CLI::App* cmd, Common& c, const char* out_help) {
    cmd->add_option("-c,--config", c.config, "INI configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--data-dir", c.data_dir, "raw CSV directory");
    cmd->add_option("--features-dir", c.features_dir, "preprocessed feature directory");
    cmd->add_option("--model-dir", c.model_dir, "checkpoint directory");
    cmd->add_option("--report-dir", c.report_dir, "report directory");
    cmd->add_option("-o,--out", c.out, out_help);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequence-to-scalar wafer metrology regression"};
    app.require_subcommand(1);

    Common common;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_wafers;
    std::string loss, arch, filter, test_filter, f_grid;
    std::optional<std::size_t> max_epochs;
    std::optional<double> learning_rate;
    std::vector<std::string> checkpoints;
    std::string checkpoint;

    auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
    add_common(gen, common, "dataset output directory (data_dir)");
    gen->add_option("--seed", seed, "generator seed");
    gen->add_option("--n-wafers", n_wafers, "number of wafers");

    auto* pre = app.add_subcommand("preprocess", "build the feature directory from raw CSVs");
    add_common(pre, common, "feature output directory (features_dir)");
    pre->add_option("--seed", seed, "split seed");

    auto* tr = app.add_subcommand("train", "fit a model");
    add_common(tr, common, "checkpoint output directory (model_dir)");
    tr->add_option("--loss", loss, "re or nl1")->check(CLI::IsMember({"re", "nl1", "RE", "NL1"}));
    tr->add_option("--arch", arch, "small, large or custom")->check(CLI::IsMember({"small", "large", "custom"}));
    tr->add_option("--filter", filter, "train on one key subset, e.g. kqi=KQI-1,type=T0");
    tr->add_option("--seed", seed, "training seed");
    tr->add_option("--max-epochs", max_epochs, "epoch cap");
    tr->add_option("--lr", learning_rate, "Adam learning rate");

    auto* ev = app.add_subcommand("evaluate", "grouping report and pass/fail sweep on the test split");
    add_common(ev, common, "report output directory (report_dir)");
    ev->add_option("--checkpoint", checkpoints, "checkpoint file (repeatable)");
    ev->add_option("--test-filter", test_filter, "restrict test samples to one key subset");
    ev->add_option("--f-grid", f_grid, "comma-separated f values");

    auto* sw = app.add_subcommand("sweep", "pass/fail recall and FPR over f");
    add_common(sw, common, "report output directory (report_dir)");
    sw->add_option("--checkpoint", checkpoint, "checkpoint file");
    sw->add_option("--test-filter", test_filter, "restrict test samples to one key subset");
    sw->add_option("--f-grid", f_grid, "comma-separated f values");

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = load_config(common);
        if (!filter.empty()) cfg.train_filter = ssr::KeyFilter::parse(filter);
        if (!test_filter.empty()) cfg.eval.test_filter = ssr::KeyFilter::parse(test_filter);
        if (!f_grid.empty()) cfg.eval.f_grid = ssr::parse_double_list(f_grid);

        if (!common.out.empty()) {
            if (gen->parsed())
                cfg.paths.data_dir = common.out;
            else if (pre->parsed())
                cfg.paths.features_dir = common.out;
            else if (tr->parsed())
                cfg.paths.model_dir = common.out;
            else
                cfg.paths.report_dir = common.out;
        }

        if (gen->parsed()) {
            if (seed) cfg.synth.seed = *seed;
            if (n_wafers) {
                cfg.synth.n_wafers = *n_wafers;
                cfg.synth_n_wafers_set = true;
            }
            ssr::cli::cmd_generate(cfg, std::cout);
        } else if (pre->parsed()) {
            if (seed) cfg.preprocess.seed = *seed;
            ssr::cli::cmd_preprocess(cfg, std::cout);
        } else if (tr->parsed()) {
            if (!loss.empty()) cfg.train.loss = ssr::train::parse_loss(loss);
            if (!arch.empty()) cfg.model.arch = arch;
            if (seed) cfg.train.seed = *seed;
            if (max_epochs) cfg.train.max_epochs = *max_epochs;
            if (learning_rate) cfg.train.adam.learning_rate = *learning_rate;
            ssr::cli::cmd_train(cfg, std::cout);
        } else if (ev->parsed()) {
            std::vector<fs::path> paths(checkpoints.begin(), checkpoints.end());
            ssr::cli::cmd_evaluate(cfg, paths, std::cout);
        } else if (sw->parsed()) {
            fs::path path = checkpoint.empty() ? cfg.paths.model_dir / ssr::cli::kCheckpointFile : fs::path(checkpoint);
            ssr::cli::cmd_sweep(cfg, path, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

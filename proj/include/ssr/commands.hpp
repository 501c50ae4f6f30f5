#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ssr/checkpoint.hpp"
#include "ssr/config.hpp"
#include "ssr/eval.hpp"
#include "ssr/feature_store.hpp"

namespace ssr::cli {

inline constexpr const char* kCheckpointFile = "model.ckpt";
inline constexpr const char* kHistoryFile = "history.csv";
inline constexpr const char* kReportText = "report.txt";
inline constexpr const char* kReportCsv = "report.csv";

/// Writes the synthetic dataset into cfg.paths.data_dir. Requires synth.n_wafers.
void cmd_generate(const RunConfig& cfg, std::ostream& out);

/// Reads the three CSVs from cfg.paths.data_dir and writes bucketed feature
/// files plus manifest into cfg.paths.features_dir.
store::Manifest cmd_preprocess(const RunConfig& cfg, std::ostream& out);

struct TrainSummary {
    std::size_t train_samples = 0;
    std::size_t val_samples = 0;
    std::size_t excluded = 0;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    std::size_t epochs_run = 0;
    std::filesystem::path checkpoint;
};

/// Fits a model on cfg.paths.features_dir and writes the best checkpoint and
/// history CSV into cfg.paths.model_dir.
TrainSummary cmd_train(const RunConfig& cfg, std::ostream& out);

/// Predictions on the original target scale. NL1 models are denormalized
/// with the sample's group; samples without a group get nullopt.
std::vector<std::optional<double>> predict_original_scale(const nn::Checkpoint& ckpt,
                                                          const normgroups::GroupTable& groups,
                                                          const std::vector<preprocess::JoinedSample>& samples);

/// Grouping report plus pass/fail sweep for each checkpoint on the test
/// split. Writes report.txt, report.csv and recall_fpr_<model>.csv into
/// cfg.paths.report_dir. Empty `checkpoints` means model_dir/model.ckpt.
std::vector<eval::ModelEvaluation> cmd_evaluate(const RunConfig& cfg, std::vector<std::filesystem::path> checkpoints,
                                                std::ostream& out);

/// Pass/fail sweep only; writes sweep_<model>.csv into cfg.paths.report_dir.
eval::SweepResult cmd_sweep(const RunConfig& cfg, const std::filesystem::path& checkpoint, std::ostream& out);

}  // namespace ssr::cli

#pragma once

#include <cstdint>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ssr/nn.hpp"
#include "ssr/normgroups.hpp"
#include "ssr/preprocess.hpp"

namespace ssr::train {

struct RELossConfig {
    double c = 10.0;
};

/// |yhat - y| / max(|y|, c)
double re_loss(double yhat, double y, const RELossConfig& cfg = {});

/// |yhat_tilde - (y - b1) / (b2 - b1)|
double nl1_loss(double yhat_tilde, double y, const normgroups::NormalizationGroup& g);

enum class LossKind { RE, NL1 };

LossKind parse_loss(std::string_view s);
std::string_view to_string(LossKind k);

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamState {
    nn::AlignedVector<T> m;
    nn::AlignedVector<T> v;
    std::uint64_t t = 0;  ///< steps taken
};

/// One bias-corrected Adam update in place.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, const AdamConfig& cfg);

struct TrainConfig {
    LossKind loss = LossKind::RE;
    RELossConfig re;
    AdamConfig adam;
    std::size_t batch_size = 16;
    std::size_t patience = 10;
    std::size_t max_epochs = 200;
    std::uint64_t seed = 0;

    void validate() const;
};

/// A sample ready for fitting. Both losses are weighted L1 on the model
/// output: RE uses (target = y, weight = 1 / max(|y|, c)), NL1 uses
/// (target = normalized y, weight = 1).
struct PreparedSample {
    const std::vector<double>* features = nullptr;
    std::size_t n_steps = 0;
    double target = 0.0;
    double weight = 1.0;
};

struct Dataset {
    std::vector<PreparedSample> samples;
    std::size_t excluded = 0;  ///< NL1 samples whose key has no normalization group
};

Dataset prepare(const std::vector<preprocess::JoinedSample>& samples, LossKind loss,
                const normgroups::GroupTable& groups, const RELossConfig& re = {});

inline double sample_loss(double output, const PreparedSample& s) { return s.weight * std::abs(output - s.target); }

/// Strict-improvement early stopping.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

    /// Records one epoch's validation loss; returns true if it is a new best.
    bool update(double val_loss);
    bool should_stop() const { return since_best_ >= patience_; }
    double best() const { return best_; }
    std::size_t best_epoch() const { return best_epoch_; }  ///< 1-based, 0 before any update

private:
    std::size_t patience_;
    std::size_t epoch_ = 0;
    std::size_t best_epoch_ = 0;
    std::size_t since_best_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

struct EpochRecord {
    std::size_t epoch = 0;  ///< 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    bool is_best = false;
};

struct FitResult {
    nn::ModelParams<float> best;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Epoch loop with Adam, early stopping on validation loss, and retention
/// of the best-validation parameters. Throws TrainingError on non-finite loss.
FitResult fit(const nn::ArchConfig& arch, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
              const EpochCallback& on_epoch = {});

/// Continues from given parameters; `fit` calls this with freshly initialised ones.
FitResult fit_from(nn::ModelParams<float> params, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                   const EpochCallback& on_epoch = {});

/// Model outputs for each sample, in input order. Samples are evaluated in
/// step-homogeneous chunks.
template <typename T>
std::vector<double> predict(const nn::ModelParams<T>& params, std::span<const PreparedSample> samples,
                            std::size_t chunk = 256);

/// Sample-weighted mean loss.
double mean_loss(const nn::ModelParams<float>& params, const Dataset& data);

/// CSV columns: epoch, train_loss, val_loss, is_best.
void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history);

}  // namespace ssr::train

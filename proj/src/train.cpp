#include "ssr/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "ssr/csv.hpp"
#include "ssr/random.hpp"

namespace ssr::train {

double re_loss(double yhat, double y, const RELossConfig& cfg) {
    return std::abs(yhat - y) / std::max(std::abs(y), cfg.c);
}

double nl1_loss(double yhat_tilde, double y, const normgroups::NormalizationGroup& g) {
    return std::abs(yhat_tilde - normgroups::normalize_target(y, g));
}

LossKind parse_loss(std::string_view s) {
    if (s == "re" || s == "RE") return LossKind::RE;
    if (s == "nl1" || s == "NL1") return LossKind::NL1;
    throw std::invalid_argument("unknown loss '" + std::string(s) + "' (expected re or nl1)");
}

std::string_view to_string(LossKind k) { return k == LossKind::RE ? "re" : "nl1"; }

template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, const AdamConfig& cfg) {
    if (grads.size() != params.size()) throw std::invalid_argument("gradient size mismatch");
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), T(0));
        state.v.assign(params.size(), T(0));
    }
    ++state.t;
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(state.t)));
    const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(state.t)));
    const T lr = static_cast<T>(cfg.learning_rate), eps = static_cast<T>(cfg.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const T g = grads[i];
        state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
        state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
        const T mhat = state.m[i] / c1;
        const T vhat = state.v[i] / c2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

template void adam_step<float>(std::span<float>, std::span<const float>, AdamState<float>&, const AdamConfig&);
template void adam_step<double>(std::span<double>, std::span<const double>, AdamState<double>&,
                                const AdamConfig&);

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
    if (!(re.c > 0)) throw std::invalid_argument("RE loss constant c must be positive");
    if (!(adam.learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
}

Dataset prepare(const std::vector<preprocess::JoinedSample>& samples, LossKind loss,
                const normgroups::GroupTable& groups, const RELossConfig& re) {
    Dataset out;
    out.samples.reserve(samples.size());
    for (const auto& s : samples) {
        PreparedSample p{&s.features, s.n_steps, s.target, 1.0};
        if (loss == LossKind::RE) {
            p.weight = 1.0 / std::max(std::abs(s.target), re.c);
        } else {
            auto it = groups.find(s.key);
            if (it == groups.end()) {
                ++out.excluded;
                continue;
            }
            p.target = normgroups::normalize_target(s.target, it->second);
        }
        out.samples.push_back(p);
    }
    return out;
}

bool EarlyStopping::update(double val_loss) {
    ++epoch_;
    if (val_loss < best_) {
        best_ = val_loss;
        best_epoch_ = epoch_;
        since_best_ = 0;
        return true;
    }
    ++since_best_;
    return false;
}

namespace {

std::size_t width_of(const nn::ArchConfig& a, std::size_t n) { return n * a.sensor_dim + a.meas_dim; }

template <typename T>
nn::Batch<T> gather(const nn::ArchConfig& arch, std::span<const PreparedSample> samples,
                    std::span<const std::size_t> idx) {
    std::vector<const std::vector<double>*> rows;
    rows.reserve(idx.size());
    for (auto i : idx) rows.push_back(samples[i].features);
    return nn::make_batch<T>(rows, samples[idx.front()].n_steps, arch.sensor_dim, arch.meas_dim);
}

void check_widths(const nn::ArchConfig& arch, const Dataset& data) {
    for (const auto& s : data.samples)
        if (s.features->size() != width_of(arch, s.n_steps))
            throw std::invalid_argument("sample width does not match the architecture");
}

}  // namespace

template <typename T>
std::vector<double> predict(const nn::ModelParams<T>& params, std::span<const PreparedSample> samples,
                            std::size_t chunk) {
    std::map<std::size_t, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < samples.size(); ++i) buckets[samples[i].n_steps].push_back(i);
    std::vector<double> out(samples.size());
    for (const auto& [n, idx] : buckets) {
        for (std::size_t b = 0; b < idx.size(); b += chunk) {
            std::span<const std::size_t> part(idx.data() + b, std::min(chunk, idx.size() - b));
            auto batch = gather<T>(params.cfg, samples, part);
            auto y = nn::forward(params, batch);
            for (std::size_t k = 0; k < part.size(); ++k) out[part[k]] = static_cast<double>(y(static_cast<Eigen::Index>(k)));
        }
    }
    return out;
}

template std::vector<double> predict<float>(const nn::ModelParams<float>&, std::span<const PreparedSample>,
                                            std::size_t);
template std::vector<double> predict<double>(const nn::ModelParams<double>&, std::span<const PreparedSample>,
                                             std::size_t);

double mean_loss(const nn::ModelParams<float>& params, const Dataset& data) {
    if (data.samples.empty()) throw std::invalid_argument("mean loss of empty dataset");
    auto y = predict(params, data.samples);
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) total += sample_loss(y[i], data.samples[i]);
    return total / static_cast<double>(y.size());
}

FitResult fit(const nn::ArchConfig& arch, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
              const EpochCallback& on_epoch) {
    return fit_from(nn::init_params<float>(arch, cfg.seed), train, val, cfg, on_epoch);
}

FitResult fit_from(nn::ModelParams<float> params, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                   const EpochCallback& on_epoch) {
    cfg.validate();
    if (train.samples.empty()) throw std::invalid_argument("no training samples");
    if (val.samples.empty()) throw std::invalid_argument("no validation samples");
    const auto& arch = params.cfg;
    check_widths(arch, train);
    check_widths(arch, val);

    std::vector<std::size_t> n_steps;
    for (const auto& s : train.samples) n_steps.push_back(s.n_steps);

    FitResult result;
    result.best = params;
    AdamState<float> adam;
    EarlyStopping stopper(cfg.patience);
    nn::AlignedVector<float> grad(params.values.size());
    nn::AlignedVector<float> upstream;
    nn::ForwardTrace<float> trace;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        auto batches = preprocess::bucket_batches(n_steps, cfg.batch_size, derive_seed(cfg.seed, 2 * epoch));
        // Visit buckets in a shuffled order; batches of one bucket stay together.
        std::vector<std::vector<std::vector<std::size_t>>> buckets;
        for (auto& b : batches) {
            if (buckets.empty() || train.samples[buckets.back().front().front()].n_steps != train.samples[b.front()].n_steps)
                buckets.emplace_back();
            buckets.back().push_back(std::move(b));
        }
        Rng order_rng(derive_seed(cfg.seed, 2 * epoch + 1));
        shuffle_in_place(std::span(buckets), order_rng);

        double epoch_loss = 0.0;
        for (const auto& bucket : buckets) {
            for (const auto& idx : bucket) {
                auto batch = gather<float>(arch, train.samples, idx);
                auto y = nn::forward(params, batch, &trace);
                const double inv_b = 1.0 / static_cast<double>(idx.size());
                upstream.resize(idx.size());
                double batch_loss = 0.0;
                for (std::size_t k = 0; k < idx.size(); ++k) {
                    const auto& s = train.samples[idx[k]];
                    const double out = y(static_cast<Eigen::Index>(k));
                    batch_loss += sample_loss(out, s);
                    const double diff = out - s.target;
                    const double sign = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
                    upstream[k] = static_cast<float>(s.weight * sign * inv_b);
                }
                if (!std::isfinite(batch_loss))
                    throw TrainingError("non-finite training loss in epoch " + std::to_string(epoch));
                epoch_loss += batch_loss;
                std::fill(grad.begin(), grad.end(), 0.0f);
                nn::backward(params, trace, std::span<const float>(upstream), grad);
                adam_step(std::span<float>(params.values), std::span<const float>(grad), adam, cfg.adam);
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / static_cast<double>(train.samples.size());
        rec.val_loss = mean_loss(params, val);
        if (!std::isfinite(rec.val_loss))
            throw TrainingError("non-finite validation loss in epoch " + std::to_string(epoch));
        rec.is_best = stopper.update(rec.val_loss);
        if (rec.is_best) result.best = params;
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (stopper.should_stop()) {
            result.stopped_early = true;
            break;
        }
    }
    result.best_epoch = stopper.best_epoch();
    result.best_val_loss = stopper.best();
    return result;
}

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "epoch,train_loss,val_loss,is_best\n";
    for (const auto& r : history)
        out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_loss) << ','
            << (r.is_best ? 1 : 0) << '\n';
}

}  // namespace ssr::train

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ssr::nn {

/// Architecture of the sequence regressor: affine step embedding, one LSTM
/// layer whose final cell state encodes the sensor sequence, and an MLP head
/// over [encoding | measurement features].
struct ArchConfig {
    std::size_t sensor_dim = 0;  ///< S, width of one step row
    std::size_t meas_dim = 0;    ///< M, width of the measurement row
    std::size_t d = 128;         ///< embedding width = LSTM hidden width
    std::size_t mlp_hidden = 256;
    std::size_t mlp_layers = 2;  ///< hidden ReLU layers in the head

    static ArchConfig small(std::size_t S, std::size_t M) { return {S, M, 128, 256, 2}; }
    static ArchConfig large(std::size_t S, std::size_t M) { return {S, M, 1024, 2048, 2}; }

    bool operator==(const ArchConfig&) const = default;
};

/// Throws std::invalid_argument on a zero dimension.
void validate(const ArchConfig& cfg);

/// Closed-form number of scalar parameters.
std::size_t param_count(const ArchConfig& cfg);

/// Position of one weight tensor inside the flat parameter vector. Matrices
/// are row-major with shape (rows = outputs, cols = inputs); bias vectors
/// have cols = 1.
struct TensorSpec {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;

    std::size_t size() const { return rows * cols; }
};

/// Tensor order: embed.w, embed.b, lstm.w_ih, lstm.w_hh, lstm.b,
/// mlp<k>.w, mlp<k>.b for each hidden layer, out.w, out.b.
/// LSTM gate blocks are stacked as input, forget, candidate, output.
std::vector<TensorSpec> layout(const ArchConfig& cfg);

/// Parameter and gradient storage. Eigen's vectorised kernels peel loops
/// according to the address of their operands, so keeping buffers aligned
/// to the widest packet makes results independent of where they live.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

/// All weights in one flat vector, addressed through `layout(cfg)`.
template <typename T>
struct ModelParams {
    ArchConfig cfg;
    std::vector<TensorSpec> specs;
    AlignedVector<T> values;

    ModelParams() = default;
    explicit ModelParams(const ArchConfig& c);  // zero-filled

    Eigen::Map<Matrix<T>> mat(std::size_t k) {
        const auto& s = specs[k];
        return {values.data() + s.offset, static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols)};
    }
    Eigen::Map<const Matrix<T>> mat(std::size_t k) const {
        const auto& s = specs[k];
        return {values.data() + s.offset, static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols)};
    }
    Eigen::Map<const RowVector<T>> bias(std::size_t k) const {
        const auto& s = specs[k];
        return {values.data() + s.offset, static_cast<Eigen::Index>(s.rows)};
    }

    std::size_t embed_w() const { return 0; }
    std::size_t embed_b() const { return 1; }
    std::size_t lstm_wih() const { return 2; }
    std::size_t lstm_whh() const { return 3; }
    std::size_t lstm_b() const { return 4; }
    std::size_t mlp_w(std::size_t layer) const { return 5 + 2 * layer; }
    std::size_t mlp_b(std::size_t layer) const { return 6 + 2 * layer; }
    std::size_t out_w() const { return 5 + 2 * cfg.mlp_layers; }
    std::size_t out_b() const { return 6 + 2 * cfg.mlp_layers; }

    bool operator==(const ModelParams& o) const { return cfg == o.cfg && values == o.values; }
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases, forget-gate
/// bias set to 1. Deterministic in `seed` and identical across T.
template <typename T>
ModelParams<T> init_params(const ArchConfig& cfg, std::uint64_t seed);

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p);

/// Samples sharing one step count: steps[t] is B x S, meas is B x M.
template <typename T>
struct Batch {
    std::vector<Matrix<T>> steps;
    Matrix<T> meas;

    std::size_t size() const { return static_cast<std::size_t>(meas.rows()); }
    std::size_t n_steps() const { return steps.size(); }
};

/// Builds a batch from joined feature rows (each n_steps*S + M wide).
template <typename T>
Batch<T> make_batch(std::span<const std::vector<double>* const> rows, std::size_t n_steps, std::size_t S,
                    std::size_t M);

/// Activations kept for the backward pass.
template <typename T>
struct ForwardTrace {
    std::vector<Matrix<T>> x;       // inputs, B x S
    std::vector<Matrix<T>> emb;     // embedded inputs, B x d
    std::vector<Matrix<T>> gates;   // activated gates [i f g o], B x 4d
    std::vector<Matrix<T>> cell;    // c_t, B x d
    std::vector<Matrix<T>> hidden;  // h_t, B x d
    std::vector<Matrix<T>> tanh_cell;
    Matrix<T> head_in;               // [c_n | meas]
    std::vector<Matrix<T>> pre;      // MLP pre-activations
    std::vector<Matrix<T>> post;     // ReLU outputs
    Vector<T> out;

    std::size_t n_steps() const { return cell.size(); }
};

/// Predictions for every sample in the batch. Fills `trace` when given.
template <typename T>
Vector<T> forward(const ModelParams<T>& p, const Batch<T>& batch, ForwardTrace<T>* trace = nullptr);

/// Single-sample convenience: `steps` is n x S, `meas` has M entries.
template <typename T>
T predict_one(const ModelParams<T>& p, const Matrix<T>& steps, const Vector<T>& meas);

/// Accumulates into `grad` (same layout as p.values) the gradient of
/// sum_b upstream[b] * prediction[b].
template <typename T>
void backward(const ModelParams<T>& p, const ForwardTrace<T>& trace, std::span<const T> upstream,
              AlignedVector<T>& grad);

}  // namespace ssr::nn

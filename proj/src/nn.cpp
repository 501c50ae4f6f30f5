#include "ssr/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "ssr/random.hpp"

namespace ssr::nn {

void validate(const ArchConfig& cfg) {
    if (cfg.sensor_dim == 0 || cfg.meas_dim == 0 || cfg.d == 0 || cfg.mlp_hidden == 0 || cfg.mlp_layers == 0)
        throw std::invalid_argument("architecture dimensions must be positive");
}

std::size_t param_count(const ArchConfig& cfg) {
    const auto S = cfg.sensor_dim, M = cfg.meas_dim, d = cfg.d, H = cfg.mlp_hidden;
    return (S + 1) * d + 4 * (d * d + d * d + d) + (d + M + 1) * H + (cfg.mlp_layers - 1) * (H + 1) * H + (H + 1);
}

std::vector<TensorSpec> layout(const ArchConfig& cfg) {
    validate(cfg);
    std::vector<TensorSpec> specs;
    std::size_t offset = 0;
    auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
        specs.push_back({std::move(name), rows, cols, offset});
        offset += rows * cols;
    };
    const auto d = cfg.d, H = cfg.mlp_hidden;
    add("embed.w", d, cfg.sensor_dim);
    add("embed.b", d, 1);
    add("lstm.w_ih", 4 * d, d);
    add("lstm.w_hh", 4 * d, d);
    add("lstm.b", 4 * d, 1);
    for (std::size_t l = 0; l < cfg.mlp_layers; ++l) {
        auto in = l == 0 ? d + cfg.meas_dim : H;
        add("mlp" + std::to_string(l) + ".w", H, in);
        add("mlp" + std::to_string(l) + ".b", H, 1);
    }
    add("out.w", 1, H);
    add("out.b", 1, 1);
    return specs;
}

template <typename T>
ModelParams<T>::ModelParams(const ArchConfig& c) : cfg(c), specs(layout(c)), values(param_count(c), T(0)) {}

template <typename T>
ModelParams<T> init_params(const ArchConfig& cfg, std::uint64_t seed) {
    ModelParams<T> p(cfg);
    Rng rng(seed);
    auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    // Each bias directly follows its weight matrix and shares its fan-in.
    std::size_t fan_in = 1;
    for (const auto& s : p.specs) {
        if (!s.name.ends_with(".b")) fan_in = s.cols;
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < s.size(); ++i)
            p.values[s.offset + i] = static_cast<T>((2.0 * unit() - 1.0) * bound);
    }
    const auto& b = p.specs[p.lstm_b()];
    for (std::size_t i = 0; i < cfg.d; ++i) p.values[b.offset + cfg.d + i] = T(1);
    return p;
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p) {
    ModelParams<To> out(p.cfg);
    for (std::size_t i = 0; i < p.values.size(); ++i) out.values[i] = static_cast<To>(p.values[i]);
    return out;
}

template <typename T>
Batch<T> make_batch(std::span<const std::vector<double>* const> rows, std::size_t n_steps, std::size_t S,
                    std::size_t M) {
    const auto B = static_cast<Eigen::Index>(rows.size());
    Batch<T> batch;
    batch.steps.assign(n_steps, Matrix<T>(B, static_cast<Eigen::Index>(S)));
    batch.meas.resize(B, static_cast<Eigen::Index>(M));
    for (Eigen::Index b = 0; b < B; ++b) {
        const auto& f = *rows[b];
        if (f.size() != n_steps * S + M) throw std::invalid_argument("feature row width mismatch in batch");
        for (std::size_t t = 0; t < n_steps; ++t)
            for (std::size_t j = 0; j < S; ++j) batch.steps[t](b, static_cast<Eigen::Index>(j)) = static_cast<T>(f[t * S + j]);
        for (std::size_t j = 0; j < M; ++j) batch.meas(b, static_cast<Eigen::Index>(j)) = static_cast<T>(f[n_steps * S + j]);
    }
    return batch;
}

namespace {

template <typename Derived>
void sigmoid_inplace(Eigen::ArrayBase<Derived>&& a) {
    using T = typename Derived::Scalar;
    a = T(1) / (T(1) + (-a).exp());
}

}  // namespace

template <typename T>
Vector<T> forward(const ModelParams<T>& p, const Batch<T>& batch, ForwardTrace<T>* trace) {
    const auto& cfg = p.cfg;
    const auto B = static_cast<Eigen::Index>(batch.size());
    const auto d = static_cast<Eigen::Index>(cfg.d);
    if (batch.n_steps() == 0) throw std::invalid_argument("forward needs at least one step");
    if (batch.meas.cols() != static_cast<Eigen::Index>(cfg.meas_dim))
        throw std::invalid_argument("measurement width mismatch");
    for (const auto& x : batch.steps)
        if (x.cols() != static_cast<Eigen::Index>(cfg.sensor_dim) || x.rows() != B)
            throw std::invalid_argument("step width mismatch");

    if (trace) *trace = ForwardTrace<T>{};
    const auto We = p.mat(p.embed_w());
    const auto be = p.bias(p.embed_b());
    const auto Wih = p.mat(p.lstm_wih());
    const auto Whh = p.mat(p.lstm_whh());
    const auto bl = p.bias(p.lstm_b());

    Matrix<T> c = Matrix<T>::Zero(B, d);
    Matrix<T> h = Matrix<T>::Zero(B, d);
    Matrix<T> emb, gates, tc;
    for (const auto& x : batch.steps) {
        emb.noalias() = x * We.transpose();
        emb.rowwise() += be;
        gates.noalias() = emb * Wih.transpose();
        gates.noalias() += h * Whh.transpose();
        gates.rowwise() += bl;
        sigmoid_inplace(gates.leftCols(2 * d).array());
        gates.middleCols(2 * d, d) = gates.middleCols(2 * d, d).array().tanh();
        sigmoid_inplace(gates.rightCols(d).array());
        c = gates.middleCols(d, d).cwiseProduct(c) + gates.leftCols(d).cwiseProduct(gates.middleCols(2 * d, d));
        tc = c.array().tanh();
        h = gates.rightCols(d).cwiseProduct(tc);
        if (trace) {
            trace->x.push_back(x);
            trace->emb.push_back(emb);
            trace->gates.push_back(gates);
            trace->cell.push_back(c);
            trace->hidden.push_back(h);
            trace->tanh_cell.push_back(tc);
        }
    }

    Matrix<T> a(B, d + batch.meas.cols());
    a << c, batch.meas;
    if (trace) trace->head_in = a;
    for (std::size_t l = 0; l < cfg.mlp_layers; ++l) {
        Matrix<T> pre = a * p.mat(p.mlp_w(l)).transpose();
        pre.rowwise() += p.bias(p.mlp_b(l));
        a = pre.cwiseMax(T(0));
        if (trace) {
            trace->pre.push_back(std::move(pre));
            trace->post.push_back(a);
        }
    }
    Vector<T> out = a * p.mat(p.out_w()).transpose();
    out.array() += p.values[p.specs[p.out_b()].offset];
    if (trace) trace->out = out;
    return out;
}

template <typename T>
T predict_one(const ModelParams<T>& p, const Matrix<T>& steps, const Vector<T>& meas) {
    Batch<T> batch;
    for (Eigen::Index t = 0; t < steps.rows(); ++t) batch.steps.push_back(steps.row(t));
    batch.meas = meas.transpose();
    return forward(p, batch)(0);
}

template <typename T>
void backward(const ModelParams<T>& p, const ForwardTrace<T>& trace, std::span<const T> upstream,
              AlignedVector<T>& grad) {
    const auto& cfg = p.cfg;
    const auto d = static_cast<Eigen::Index>(cfg.d);
    const auto B = static_cast<Eigen::Index>(upstream.size());
    if (grad.size() != p.values.size()) grad.assign(p.values.size(), T(0));
    if (trace.out.size() != B) throw std::invalid_argument("upstream size does not match traced batch");

    auto gmat = [&](std::size_t k) {
        const auto& s = p.specs[k];
        return Eigen::Map<Matrix<T>>(grad.data() + s.offset, static_cast<Eigen::Index>(s.rows),
                                     static_cast<Eigen::Index>(s.cols));
    };
    auto gbias = [&](std::size_t k) {
        const auto& s = p.specs[k];
        return Eigen::Map<RowVector<T>>(grad.data() + s.offset, static_cast<Eigen::Index>(s.rows));
    };

    Eigen::Map<const Vector<T>> dout(upstream.data(), B);
    const Matrix<T>& last = cfg.mlp_layers ? trace.post.back() : trace.head_in;
    gmat(p.out_w()).noalias() += dout.transpose() * last;
    grad[p.specs[p.out_b()].offset] += dout.sum();
    Matrix<T> da = dout * p.mat(p.out_w());

    for (std::size_t l = cfg.mlp_layers; l-- > 0;) {
        Matrix<T> dpre = (trace.pre[l].array() > T(0)).select(da, T(0));
        const Matrix<T>& in = l == 0 ? trace.head_in : trace.post[l - 1];
        gmat(p.mlp_w(l)).noalias() += dpre.transpose() * in;
        gbias(p.mlp_b(l)) += dpre.colwise().sum();
        da.noalias() = dpre * p.mat(p.mlp_w(l));
    }

    const auto Wih = p.mat(p.lstm_wih());
    const auto Whh = p.mat(p.lstm_whh());
    auto gWih = gmat(p.lstm_wih());
    auto gWhh = gmat(p.lstm_whh());
    auto gbl = gbias(p.lstm_b());
    auto gWe = gmat(p.embed_w());
    auto gbe = gbias(p.embed_b());

    Matrix<T> dc = da.leftCols(d);
    Matrix<T> dh = Matrix<T>::Zero(B, d);
    Matrix<T> dg(B, 4 * d), de;
    const Matrix<T> zero = Matrix<T>::Zero(B, d);
    for (std::size_t t = trace.n_steps(); t-- > 0;) {
        const auto& G = trace.gates[t];
        const auto i = G.leftCols(d).array();
        const auto f = G.middleCols(d, d).array();
        const auto g = G.middleCols(2 * d, d).array();
        const auto o = G.rightCols(d).array();
        const auto tc = trace.tanh_cell[t].array();
        const Matrix<T>& c_prev = t ? trace.cell[t - 1] : zero;
        const Matrix<T>& h_prev = t ? trace.hidden[t - 1] : zero;

        dc.array() += dh.array() * o * (T(1) - tc.square());
        dg.leftCols(d) = dc.array() * g * i * (T(1) - i);
        dg.middleCols(d, d) = dc.array() * c_prev.array() * f * (T(1) - f);
        dg.middleCols(2 * d, d) = dc.array() * i * (T(1) - g.square());
        dg.rightCols(d) = dh.array() * tc * o * (T(1) - o);

        gWih.noalias() += dg.transpose() * trace.emb[t];
        gWhh.noalias() += dg.transpose() * h_prev;
        gbl += dg.colwise().sum();
        de.noalias() = dg * Wih;
        gWe.noalias() += de.transpose() * trace.x[t];
        gbe += de.colwise().sum();

        dh.noalias() = dg * Whh;
        dc.array() *= f;
    }
}

#define SSR_NN_INSTANTIATE(T)                                                                                  \
    template struct ModelParams<T>;                                                                            \
    template ModelParams<T> init_params<T>(const ArchConfig&, std::uint64_t);                                  \
    template Batch<T> make_batch<T>(std::span<const std::vector<double>* const>, std::size_t, std::size_t,    \
                                    std::size_t);                                                              \
    template Vector<T> forward<T>(const ModelParams<T>&, const Batch<T>&, ForwardTrace<T>*);                  \
    template T predict_one<T>(const ModelParams<T>&, const Matrix<T>&, const Vector<T>&);                     \
    template void backward<T>(const ModelParams<T>&, const ForwardTrace<T>&, std::span<const T>, AlignedVector<T>&);

SSR_NN_INSTANTIATE(float)
SSR_NN_INSTANTIATE(double)

template ModelParams<float> cast_params<float, double>(const ModelParams<double>&);
template ModelParams<double> cast_params<double, float>(const ModelParams<float>&);
template ModelParams<float> cast_params<float, float>(const ModelParams<float>&);
template ModelParams<double> cast_params<double, double>(const ModelParams<double>&);

}  // namespace ssr::nn

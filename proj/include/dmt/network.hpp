#ifndef DMT_NETWORK_HPP
#define DMT_NETWORK_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <vector>

#include "common.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace dmt {

/**
 * @brief Feed-forward layer widths plus the activation rule.
 *
 * A leading -1 resolves to the dataset width before construction. All layers
 * use a leaky-linear activation (negative slope 0.1) except the final one,
 * which stays identity so the latent space is unconstrained.
 */
struct LayerSpec {
    std::vector<int> dims;
    double leak = 0.1;

    size_t num_layers() const { return dims.empty() ? 0 : dims.size() - 1; }

    LayerSpec resolved(size_t input_dim) const {
        LayerSpec out = *this;
        if (!out.dims.empty() && out.dims[0] == -1) out.dims[0] = static_cast<int>(input_dim);
        if (out.dims.size() < 2) throw UsageError("LayerSpec: need at least 2 widths");
        for (int d : out.dims) {
            if (d < 1) throw UsageError("LayerSpec: widths must be positive after resolution");
        }
        return out;
    }

    LayerSpec reversed() const {
        LayerSpec out = *this;
        std::vector<int> rev(dims.rbegin(), dims.rend());
        out.dims = std::move(rev);
        return out;
    }
};

inline LayerSpec default_layer_spec() {
    return LayerSpec{{-1, 600, 500, 400, 300, 200, 2}, 0.1};
}

struct EncoderNetwork {
    LayerSpec spec;
    std::vector<Matrix> weights;              // layer l: dims[l] x dims[l+1]
    std::vector<std::vector<double>> biases;  // layer l: dims[l+1]

    size_t num_layers() const { return weights.size(); }
    size_t input_dim() const { return static_cast<size_t>(spec.dims.front()); }
    size_t output_dim() const { return static_cast<size_t>(spec.dims.back()); }

    size_t parameter_count() const {
        size_t n = 0;
        for (size_t l = 0; l < weights.size(); ++l) {
            n += weights[l].data.size() + biases[l].size();
        }
        return n;
    }

    std::vector<double> flatten() const {
        std::vector<double> p;
        p.reserve(parameter_count());
        for (size_t l = 0; l < weights.size(); ++l) {
            p.insert(p.end(), weights[l].data.begin(), weights[l].data.end());
            p.insert(p.end(), biases[l].begin(), biases[l].end());
        }
        return p;
    }

    void unflatten(const std::vector<double>& p) {
        size_t off = 0;
        for (size_t l = 0; l < weights.size(); ++l) {
            std::copy(p.begin() + off, p.begin() + off + weights[l].data.size(),
                      weights[l].data.begin());
            off += weights[l].data.size();
            std::copy(p.begin() + off, p.begin() + off + biases[l].size(), biases[l].begin());
            off += biases[l].size();
        }
    }
};

/// Per-layer activations X^(0)..X^(L) of one batch.
struct ForwardTrace {
    std::vector<Matrix> activations;

    const Matrix& input() const { return activations.front(); }
    const Matrix& latent() const { return activations.back(); }
};

struct ParamGrads {
    std::vector<Matrix> d_weights;
    std::vector<std::vector<double>> d_biases;
};

/// He initialization: weights ~ N(0, sqrt(2 / fan_in)), zero biases.
inline EncoderNetwork init_he(const LayerSpec& spec, SeededRng& rng) {
    EncoderNetwork net;
    net.spec = spec;
    for (size_t l = 0; l + 1 < spec.dims.size(); ++l) {
        const size_t fan_in = static_cast<size_t>(spec.dims[l]);
        const size_t fan_out = static_cast<size_t>(spec.dims[l + 1]);
        Matrix w(fan_in, fan_out);
        const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (double& v : w.data) v = rng.normal(0.0, scale);
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(fan_out, 0.0);
    }
    return net;
}

inline ForwardTrace forward(const EncoderNetwork& net, const Matrix& x) {
    if (x.cols != net.input_dim()) throw UsageError("forward: input width mismatch");
    ForwardTrace trace;
    trace.activations.reserve(net.num_layers() + 1);
    trace.activations.push_back(x);
    for (size_t l = 0; l < net.num_layers(); ++l) {
        Matrix y = matmul(trace.activations.back(), net.weights[l]);
        const auto& b = net.biases[l];
        for (size_t i = 0; i < y.rows; ++i) {
            double* yr = y.row(i);
            for (size_t j = 0; j < y.cols; ++j) yr[j] += b[j];
        }
        if (l + 1 < net.num_layers()) {
            const double leak = net.spec.leak;
            for (double& v : y.data) {
                if (v < 0.0) v *= leak;
            }
        }
        trace.activations.push_back(std::move(y));
    }
    return trace;
}

/**
 * Reverse-mode gradients of the parameters given dL/dX^(L).
 *
 * The leaky activation's derivative is recovered from the stored
 * post-activation sign (the function is monotone with f(0) = 0).
 */
inline ParamGrads backward(const EncoderNetwork& net, const ForwardTrace& trace,
                           const Matrix& grad_latent, Matrix* grad_input = nullptr) {
    const size_t layers = net.num_layers();
    if (!grad_latent.same_shape(trace.latent())) {
        throw UsageError("backward: gradient shape mismatch");
    }
    ParamGrads grads;
    grads.d_weights.resize(layers);
    grads.d_biases.resize(layers);

    Matrix g = grad_latent;  // dL/dX^(l+1), post-activation
    for (size_t l = layers; l-- > 0;) {
        if (l + 1 < layers) {
            const Matrix& act = trace.activations[l + 1];
            const double leak = net.spec.leak;
            for (size_t t = 0; t < g.data.size(); ++t) {
                if (act.data[t] < 0.0) g.data[t] *= leak;
            }
        }
        grads.d_weights[l] = matmul_atb(trace.activations[l], g);
        grads.d_biases[l] = column_sums(g);
        if (l > 0 || grad_input != nullptr) {
            Matrix gx = matmul_abt(g, net.weights[l]);
            if (l == 0 && grad_input != nullptr) {
                *grad_input = std::move(gx);
            } else {
                g = std::move(gx);
            }
        }
    }
    return grads;
}

/// Adam moments for one network, flattened in layer order.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t step = 0;
    std::vector<Matrix> m_w, v_w;
    std::vector<std::vector<double>> m_b, v_b;

    static AdamState for_network(const EncoderNetwork& net) {
        AdamState s;
        for (size_t l = 0; l < net.num_layers(); ++l) {
            s.m_w.emplace_back(net.weights[l].rows, net.weights[l].cols, 0.0);
            s.v_w.emplace_back(net.weights[l].rows, net.weights[l].cols, 0.0);
            s.m_b.emplace_back(net.biases[l].size(), 0.0);
            s.v_b.emplace_back(net.biases[l].size(), 0.0);
        }
        return s;
    }
};

namespace detail {

inline void adam_update(double* p, const double* g, double* m, double* v, size_t n,
                        double lr, const AdamState& s, double corr1, double corr2) {
    for (size_t t = 0; t < n; ++t) {
        m[t] = s.beta1 * m[t] + (1.0 - s.beta1) * g[t];
        v[t] = s.beta2 * v[t] + (1.0 - s.beta2) * g[t] * g[t];
        const double mhat = m[t] / corr1;
        const double vhat = v[t] / corr2;
        p[t] -= lr * mhat / (std::sqrt(vhat) + s.eps);
    }
}

}  // namespace detail

/// Standard bias-corrected Adam step; increments the step counter.
inline void adam_step(EncoderNetwork& net, const ParamGrads& grads, AdamState& state, double lr) {
    state.step += 1;
    const double corr1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double corr2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t l = 0; l < net.num_layers(); ++l) {
        detail::adam_update(net.weights[l].data.data(), grads.d_weights[l].data.data(),
                            state.m_w[l].data.data(), state.v_w[l].data.data(),
                            net.weights[l].data.size(), lr, state, corr1, corr2);
        detail::adam_update(net.biases[l].data(), grads.d_biases[l].data(),
                            state.m_b[l].data(), state.v_b[l].data(),
                            net.biases[l].size(), lr, state, corr1, corr2);
    }
}

// ---------------------------------------------------------------------------
// Binary serialization (exact round-trip; raw IEEE-754 doubles).
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u64(std::ostream& out, uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 8);
}

inline uint64_t get_u64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return v;
}

inline void put_doubles(std::ostream& out, const double* p, size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void get_doubles(std::istream& in, double* p, size_t n) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

}  // namespace detail

inline void write_network(std::ostream& out, const EncoderNetwork& net) {
    detail::put_u64(out, net.spec.dims.size());
    for (int d : net.spec.dims) detail::put_u64(out, static_cast<uint64_t>(d));
    detail::put_doubles(out, &net.spec.leak, 1);
    for (size_t l = 0; l < net.num_layers(); ++l) {
        detail::put_doubles(out, net.weights[l].data.data(), net.weights[l].data.size());
        detail::put_doubles(out, net.biases[l].data(), net.biases[l].size());
    }
}

inline EncoderNetwork read_network(std::istream& in) {
    EncoderNetwork net;
    const size_t nd = detail::get_u64(in);
    if (!in || nd < 2 || nd > 1024) throw DataError("checkpoint: bad layer count");
    net.spec.dims.resize(nd);
    for (size_t i = 0; i < nd; ++i) net.spec.dims[i] = static_cast<int>(detail::get_u64(in));
    detail::get_doubles(in, &net.spec.leak, 1);
    for (size_t l = 0; l + 1 < nd; ++l) {
        Matrix w(static_cast<size_t>(net.spec.dims[l]), static_cast<size_t>(net.spec.dims[l + 1]));
        detail::get_doubles(in, w.data.data(), w.data.size());
        net.weights.push_back(std::move(w));
        std::vector<double> b(static_cast<size_t>(net.spec.dims[l + 1]));
        detail::get_doubles(in, b.data(), b.size());
        net.biases.push_back(std::move(b));
    }
    if (!in) throw DataError("checkpoint: truncated network block");
    return net;
}

inline void write_adam(std::ostream& out, const AdamState& s) {
    detail::put_u64(out, s.step);
    for (size_t l = 0; l < s.m_w.size(); ++l) {
        detail::put_doubles(out, s.m_w[l].data.data(), s.m_w[l].data.size());
        detail::put_doubles(out, s.v_w[l].data.data(), s.v_w[l].data.size());
        detail::put_doubles(out, s.m_b[l].data(), s.m_b[l].size());
        detail::put_doubles(out, s.v_b[l].data(), s.v_b[l].size());
    }
}

inline void read_adam(std::istream& in, AdamState& s) {
    s.step = detail::get_u64(in);
    for (size_t l = 0; l < s.m_w.size(); ++l) {
        detail::get_doubles(in, s.m_w[l].data.data(), s.m_w[l].data.size());
        detail::get_doubles(in, s.v_w[l].data.data(), s.v_w[l].data.size());
        detail::get_doubles(in, s.m_b[l].data(), s.m_b[l].size());
        detail::get_doubles(in, s.v_b[l].data(), s.v_b[l].size());
    }
    if (!in) throw DataError("checkpoint: truncated Adam block");
}

}

#endif

// Minimal dense-network machinery: row-major matrices, a tanh MLP with exact
// reverse-mode gradients, stochastic policy heads (multi-discrete and
// squashed Gaussian), Adam, and global-norm gradient clipping.
//
// Everything is 64-bit and deterministic: sampling consumes only the Rng
// stream passed in, and forward/backward are pure given their inputs.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "dogfight/rng.hpp"

namespace dogfight {

struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
    void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

/// C = A * B, cache-friendly i-k-j order.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dims differ");
    Matrix c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        double* crow = c.row(i);
        const double* arow = a.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

/// C = A * B^T.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) throw std::invalid_argument("matmul_nt: inner dims differ");
    Matrix c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* brow = b.row(j);
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
            crow[j] = s;
        }
    }
    return c;
}

/// C = A^T * B (A: [n,m], B: [n,p] -> [m,p]); used for weight gradients.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) throw std::invalid_argument("matmul_tn: outer dims differ");
    Matrix c(a.cols, b.cols);
    for (int n = 0; n < a.rows; ++n) {
        const double* arow = a.row(n);
        const double* brow = b.row(n);
        for (int i = 0; i < a.cols; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c.row(i);
            for (int j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

// ---- MLP ----

/// Dense network y = (...tanh(x W0 + b0)...) W_last + b_last.
/// Weights are stored input-major: W[l] has shape [fan_in, fan_out].
struct Mlp {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    int input_dim() const { return weights.front().rows; }
    int output_dim() const { return weights.back().cols; }
    std::size_t layer_count() const { return weights.size(); }

    std::vector<std::span<double>> param_spans() {
        std::vector<std::span<double>> s;
        for (auto& w : weights) s.emplace_back(w.data);
        for (auto& b : biases) s.emplace_back(b);
        return s;
    }
};

/// Gradient container shaped like an Mlp.
struct MlpGrads {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    explicit MlpGrads(const Mlp& net) {
        for (const auto& w : net.weights) weights.emplace_back(w.rows, w.cols);
        for (const auto& b : net.biases) biases.emplace_back(b.size(), 0.0);
    }

    void zero() {
        for (auto& w : weights) w.zero();
        for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
    }

    std::vector<std::span<double>> grad_spans() {
        std::vector<std::span<double>> s;
        for (auto& w : weights) s.emplace_back(w.data);
        for (auto& b : biases) s.emplace_back(b);
        return s;
    }
};

/// Orthogonal-style init: Gram-Schmidt over a Gaussian matrix, scaled by
/// gain. Hidden layers use gain sqrt(2); policy output layers typically 0.01.
inline Matrix orthogonal_init(int rows, int cols, double gain, Rng& rng) {
    Matrix w(rows, cols);
    const bool by_cols = rows >= cols;
    const int nvec = by_cols ? cols : rows;
    const int dim = by_cols ? rows : cols;
    std::vector<std::vector<double>> vs(nvec, std::vector<double>(dim));
    for (auto& v : vs)
        for (auto& x : v) x = rng.normal();
    for (int i = 0; i < nvec; ++i) {
        for (int j = 0; j < i; ++j) {
            double d = 0.0;
            for (int k = 0; k < dim; ++k) d += vs[i][k] * vs[j][k];
            for (int k = 0; k < dim; ++k) vs[i][k] -= d * vs[j][k];
        }
        double n = 0.0;
        for (double x : vs[i]) n += x * x;
        n = std::sqrt(n);
        if (n < 1e-12) { vs[i][i % dim] = 1.0; n = 1.0; }
        for (auto& x : vs[i]) x /= n;
    }
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            w.at(r, c) = gain * (by_cols ? vs[c][r] : vs[r][c]);
    return w;
}

inline Mlp make_mlp(int input, const std::vector<int>& hidden, int output,
                    double output_gain, Rng& rng) {
    Mlp net;
    int fan_in = input;
    for (int h : hidden) {
        net.weights.push_back(orthogonal_init(fan_in, h, std::sqrt(2.0), rng));
        net.biases.emplace_back(h, 0.0);
        fan_in = h;
    }
    net.weights.push_back(orthogonal_init(fan_in, output, output_gain, rng));
    net.biases.emplace_back(output, 0.0);
    return net;
}

/// Activations cached by forward (inputs to every layer), enough for an
/// exact backward pass.
struct ForwardCache {
    std::vector<Matrix> layer_inputs;  // layer_inputs[0] is the batch input
};

inline Matrix mlp_forward(const Mlp& net, const Matrix& input, ForwardCache* cache = nullptr) {
    if (input.cols != net.input_dim())
        throw std::invalid_argument("mlp_forward: input width mismatch");
    if (cache) {
        cache->layer_inputs.clear();
        cache->layer_inputs.push_back(input);
    }
    Matrix h = input;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        Matrix z = matmul(h, net.weights[l]);
        const auto& b = net.biases[l];
        for (int r = 0; r < z.rows; ++r) {
            double* zr = z.row(r);
            for (int c = 0; c < z.cols; ++c) zr[c] += b[c];
        }
        if (l + 1 < net.layer_count()) {
            for (auto& v : z.data) v = std::tanh(v);
            if (cache) cache->layer_inputs.push_back(z);
        }
        h = std::move(z);
    }
    return h;
}

/// Reverse pass. upstream is dLoss/dOutput; gradients are accumulated into
/// grads. When input_grad is non-null it receives dLoss/dInput (needed for
/// the reparameterized actor update, where the loss differentiates through a
/// critic's action input).
inline void mlp_backward(const Mlp& net, const ForwardCache& cache,
                         const Matrix& upstream, MlpGrads& grads,
                         Matrix* input_grad = nullptr) {
    if (cache.layer_inputs.size() != net.layer_count())
        throw std::invalid_argument("mlp_backward: cache does not match network");
    Matrix delta = upstream;
    for (int l = static_cast<int>(net.layer_count()) - 1; l >= 0; --l) {
        const Matrix& in = cache.layer_inputs[static_cast<std::size_t>(l)];
        Matrix gw = matmul_tn(in, delta);
        for (std::size_t i = 0; i < gw.data.size(); ++i)
            grads.weights[static_cast<std::size_t>(l)].data[i] += gw.data[i];
        auto& gb = grads.biases[static_cast<std::size_t>(l)];
        for (int r = 0; r < delta.rows; ++r) {
            const double* dr = delta.row(r);
            for (int c = 0; c < delta.cols; ++c) gb[static_cast<std::size_t>(c)] += dr[c];
        }
        if (l > 0) {
            Matrix prev = matmul_nt(delta, net.weights[static_cast<std::size_t>(l)]);
            // tanh' = 1 - h^2, with h the cached post-activation
            for (int r = 0; r < prev.rows; ++r) {
                double* pr = prev.row(r);
                const double* hr = in.row(r);
                for (int c = 0; c < prev.cols; ++c) pr[c] *= 1.0 - hr[c] * hr[c];
            }
            delta = std::move(prev);
        } else if (input_grad) {
            *input_grad = matmul_nt(delta, net.weights[0]);
        }
    }
}

// ---- policy heads ----

enum class HeadKind { MultiDiscrete, Gaussian };

/// Interprets the final MLP output row as an action distribution.
/// MultiDiscrete: one categorical per group, logits laid out contiguously.
/// Gaussian: the row is the mean; log-std is a separate learnable vector and
/// samples are squashed through tanh to [lo, hi] per dimension.
struct PolicyHead {
    HeadKind kind = HeadKind::MultiDiscrete;
    std::vector<int> groups;       // MultiDiscrete group sizes
    int dim = 0;                   // Gaussian dimension
    std::vector<double> log_std;   // Gaussian, learnable
    std::vector<double> lo, hi;    // Gaussian bounds

    int logits_dim() const {
        if (kind == HeadKind::MultiDiscrete) {
            int n = 0;
            for (int g : groups) n += g;
            return n;
        }
        return dim;
    }
};

inline PolicyHead make_multi_discrete_head(std::vector<int> groups) {
    PolicyHead h;
    h.kind = HeadKind::MultiDiscrete;
    h.groups = std::move(groups);
    return h;
}

inline PolicyHead make_gaussian_head(std::vector<double> lo, std::vector<double> hi,
                                     double initial_log_std = -0.5) {
    PolicyHead h;
    h.kind = HeadKind::Gaussian;
    h.dim = static_cast<int>(lo.size());
    h.lo = std::move(lo);
    h.hi = std::move(hi);
    h.log_std.assign(static_cast<std::size_t>(h.dim), initial_log_std);
    return h;
}

/// One sampled (or greedy) action. Discrete heads fill `discrete`; Gaussian
/// heads keep the pre-squash value in `raw` (what log-densities are computed
/// from) and the env-facing bounded value in `squashed`.
struct Action {
    std::vector<int> discrete;
    std::vector<double> raw;
    std::vector<double> squashed;
};

namespace detail {

inline void softmax_row(const double* logits, int n, double* probs) {
    double m = logits[0];
    for (int i = 1; i < n; ++i) m = std::max(m, logits[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        probs[i] = std::exp(logits[i] - m);
        sum += probs[i];
    }
    for (int i = 0; i < n; ++i) probs[i] /= sum;
}

inline double squash_to(double u, double lo, double hi) {
    return lo + (hi - lo) * 0.5 * (std::tanh(u) + 1.0);
}

inline constexpr double kLogSqrt2Pi = 0.9189385332046727;  // 0.5*ln(2*pi)

}  // namespace detail

inline Action sample_action(const PolicyHead& head, const double* logits, Rng& rng) {
    Action a;
    if (head.kind == HeadKind::MultiDiscrete) {
        int off = 0;
        std::vector<double> probs;
        for (int g : head.groups) {
            probs.resize(static_cast<std::size_t>(g));
            detail::softmax_row(logits + off, g, probs.data());
            const double u = rng.uniform();
            double acc = 0.0;
            int pick = g - 1;
            for (int i = 0; i < g; ++i) {
                acc += probs[static_cast<std::size_t>(i)];
                if (u < acc) { pick = i; break; }
            }
            a.discrete.push_back(pick);
            off += g;
        }
    } else {
        a.raw.resize(static_cast<std::size_t>(head.dim));
        a.squashed.resize(static_cast<std::size_t>(head.dim));
        for (int i = 0; i < head.dim; ++i) {
            const double sigma = std::exp(head.log_std[static_cast<std::size_t>(i)]);
            a.raw[static_cast<std::size_t>(i)] = logits[i] + sigma * rng.normal();
            a.squashed[static_cast<std::size_t>(i)] = detail::squash_to(
                a.raw[static_cast<std::size_t>(i)], head.lo[static_cast<std::size_t>(i)],
                head.hi[static_cast<std::size_t>(i)]);
        }
    }
    return a;
}

inline Action greedy_action(const PolicyHead& head, const double* logits) {
    Action a;
    if (head.kind == HeadKind::MultiDiscrete) {
        int off = 0;
        for (int g : head.groups) {
            int best = 0;
            for (int i = 1; i < g; ++i)
                if (logits[off + i] > logits[off + best]) best = i;
            a.discrete.push_back(best);
            off += g;
        }
    } else {
        a.raw.assign(logits, logits + head.dim);
        a.squashed.resize(static_cast<std::size_t>(head.dim));
        for (int i = 0; i < head.dim; ++i)
            a.squashed[static_cast<std::size_t>(i)] =
                detail::squash_to(logits[i], head.lo[static_cast<std::size_t>(i)],
                                  head.hi[static_cast<std::size_t>(i)]);
    }
    return a;
}

struct LogpEntropy {
    double logp = 0.0;
    double entropy = 0.0;
};

/// Log-probability of `action` and the distribution entropy at `logits`.
/// MultiDiscrete sums per-group categorical terms. Gaussian reports the
/// squash-corrected log-density and the base (pre-squash) entropy.
inline LogpEntropy logp_entropy(const PolicyHead& head, const double* logits,
                                const Action& action) {
    LogpEntropy out;
    if (head.kind == HeadKind::MultiDiscrete) {
        int off = 0;
        std::vector<double> probs;
        for (std::size_t gi = 0; gi < head.groups.size(); ++gi) {
            const int g = head.groups[gi];
            const int pick = action.discrete[gi];
            if (pick < 0 || pick >= g)
                throw std::invalid_argument("logp_entropy: action index out of range");
            probs.resize(static_cast<std::size_t>(g));
            detail::softmax_row(logits + off, g, probs.data());
            out.logp += std::log(std::max(probs[static_cast<std::size_t>(pick)], 1e-300));
            for (int i = 0; i < g; ++i) {
                const double p = probs[static_cast<std::size_t>(i)];
                if (p > 0.0) out.entropy -= p * std::log(p);
            }
            off += g;
        }
    } else {
        for (int i = 0; i < head.dim; ++i) {
            const double ls = head.log_std[static_cast<std::size_t>(i)];
            const double sigma = std::exp(ls);
            const double z = (action.raw[static_cast<std::size_t>(i)] - logits[i]) / sigma;
            out.logp += -0.5 * z * z - ls - detail::kLogSqrt2Pi;
            // tanh squash change of variables
            const double t = std::tanh(action.raw[static_cast<std::size_t>(i)]);
            const double span = 0.5 * (head.hi[static_cast<std::size_t>(i)] -
                                       head.lo[static_cast<std::size_t>(i)]);
            out.logp -= std::log(std::max(span * (1.0 - t * t), 1e-300));
            out.entropy += ls + 0.5 + detail::kLogSqrt2Pi;
        }
    }
    return out;
}

/// Accumulate d(logp)/d(logits) * dlogp_scale + d(entropy)/d(logits) * dent_scale
/// into dlogits (and the log-std gradients for Gaussian heads into dlog_std).
inline void logp_entropy_backward(const PolicyHead& head, const double* logits,
                                  const Action& action, double dlogp_scale,
                                  double dent_scale, double* dlogits,
                                  double* dlog_std = nullptr) {
    if (head.kind == HeadKind::MultiDiscrete) {
        int off = 0;
        std::vector<double> probs;
        for (std::size_t gi = 0; gi < head.groups.size(); ++gi) {
            const int g = head.groups[gi];
            probs.resize(static_cast<std::size_t>(g));
            detail::softmax_row(logits + off, g, probs.data());
            double h = 0.0;
            for (int i = 0; i < g; ++i) {
                const double p = probs[static_cast<std::size_t>(i)];
                if (p > 0.0) h -= p * std::log(p);
            }
            const int pick = action.discrete[gi];
            for (int i = 0; i < g; ++i) {
                const double p = probs[static_cast<std::size_t>(i)];
                const double dlogp = (i == pick ? 1.0 : 0.0) - p;
                const double logp_i = std::log(std::max(p, 1e-300));
                const double dent = -p * (logp_i + h);
                dlogits[off + i] += dlogp_scale * dlogp + dent_scale * dent;
            }
            off += g;
        }
    } else {
        for (int i = 0; i < head.dim; ++i) {
            const double ls = head.log_std[static_cast<std::size_t>(i)];
            const double sigma = std::exp(ls);
            const double z = (action.raw[static_cast<std::size_t>(i)] - logits[i]) / sigma;
            dlogits[i] += dlogp_scale * (z / sigma);
            if (dlog_std) {
                dlog_std[i] += dlogp_scale * (z * z - 1.0) + dent_scale * 1.0;
            }
        }
    }
}

// ---- optimization ----

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    long t = 0;

    void ensure_shapes(const std::vector<std::span<double>>& params) {
        if (!m.empty()) return;
        for (const auto& p : params) {
            m.emplace_back(p.size(), 0.0);
            v.emplace_back(p.size(), 0.0);
        }
    }
};

/// Bias-corrected Adam over a parameter/gradient span list.
inline void adam_step(std::vector<std::span<double>> params,
                      std::vector<std::span<const double>> grads, AdamState& state,
                      double lr, double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
    if (params.size() != grads.size())
        throw std::invalid_argument("adam_step: param/grad arity mismatch");
    state.ensure_shapes(params);
    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto p = params[k];
        auto g = grads[k];
        if (p.size() != g.size() || p.size() != state.m[k].size())
            throw std::invalid_argument("adam_step: shape mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            double& mi = state.m[k][i];
            double& vi = state.v[k][i];
            mi = beta1 * mi + (1.0 - beta1) * g[i];
            vi = beta2 * vi + (1.0 - beta2) * g[i] * g[i];
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

/// Global L2-norm clip. Returns the pre-clip norm; rescales in place only
/// when the norm exceeds max_norm.
inline double global_norm_clip(std::vector<std::span<double>> grads, double max_norm) {
    if (max_norm <= 0.0) throw std::invalid_argument("global_norm_clip: max_norm <= 0");
    double sq = 0.0;
    for (const auto& g : grads)
        for (double x : g) sq += x * x;
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (auto& g : grads)
            for (double& x : g) x *= scale;
    }
    return norm;
}

inline std::vector<std::span<const double>> as_const_spans(
    const std::vector<std::span<double>>& spans) {
    std::vector<std::span<const double>> out;
    out.reserve(spans.size());
    for (const auto& s : spans) out.emplace_back(s);
    return out;
}

}  // namespace dogfight

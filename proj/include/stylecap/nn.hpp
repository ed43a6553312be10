#pragma once

#include "stylecap/common.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace stylecap::nn {

// ---------------------------------------------------------------------------
// Linear layer: y = W x (+ b). Gradients accumulate across calls until the
// owner zeroes them.
// ---------------------------------------------------------------------------
struct Linear {
    Mat w;       // out x in
    Vec b;       // out (empty when bias-free)
    Mat gw;
    Vec gb;
    bool has_bias = true;

    Linear() = default;
    Linear(Eigen::Index out, Eigen::Index in, bool bias = true) { resize(out, in, bias); }

    void resize(Eigen::Index out, Eigen::Index in, bool bias = true) {
        has_bias = bias;
        w.setZero(out, in);
        gw.setZero(out, in);
        if (bias) {
            b.setZero(out);
            gb.setZero(out);
        }
    }

    Eigen::Index out_dim() const { return w.rows(); }
    Eigen::Index in_dim() const { return w.cols(); }

    void init(Rng& rng) {
        // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
        const double s = 1.0 / std::sqrt(static_cast<double>(w.cols()));
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-s, s);
        if (has_bias)
            for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-s, s);
    }

    Vec forward(const Vec& x) const {
        if (x.size() != w.cols()) throw std::invalid_argument("Linear: input size mismatch");
        Vec y = w * x;
        if (has_bias) y += b;
        return y;
    }

    // Accumulates parameter gradients, returns dL/dx.
    Vec backward(const Vec& x, const Vec& gy) {
        gw.noalias() += gy * x.transpose();
        if (has_bias) gb += gy;
        return w.transpose() * gy;
    }

    void collect(std::vector<TensorRef>& out, const std::string& prefix) {
        out.push_back({prefix + ".w", w.data(), gw.data(), w.size()});
        if (has_bias) out.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
    }
};

// ---------------------------------------------------------------------------
// Embedding table, one column per vocabulary entry.
// ---------------------------------------------------------------------------
struct Embedding {
    Mat e;   // dim x vocab
    Mat ge;

    Embedding() = default;
    Embedding(Eigen::Index dim, Eigen::Index vocab) { resize(dim, vocab); }

    void resize(Eigen::Index dim, Eigen::Index vocab) {
        e.setZero(dim, vocab);
        ge.setZero(dim, vocab);
    }

    Eigen::Index dim() const { return e.rows(); }
    Eigen::Index vocab() const { return e.cols(); }

    void init(Rng& rng) {
        for (Eigen::Index j = 0; j < e.cols(); ++j)
            for (Eigen::Index i = 0; i < e.rows(); ++i) e(i, j) = rng.uniform(-0.1, 0.1);
    }

    Vec lookup(int idx) const {
        if (idx < 0 || idx >= e.cols()) throw std::out_of_range("Embedding: index out of range");
        return e.col(idx);
    }

    void accumulate(int idx, const Vec& g) { ge.col(idx) += g; }

    void collect(std::vector<TensorRef>& out, const std::string& prefix) {
        out.push_back({prefix, e.data(), ge.data(), e.size()});
    }
};

// ---------------------------------------------------------------------------
// Single-layer LSTM. Gate packing along rows: [input, forget, cell, output].
// ---------------------------------------------------------------------------
struct Lstm {
    Mat wx;  // 4H x In
    Mat wh;  // 4H x H
    Vec b;   // 4H
    Mat gwx;
    Mat gwh;
    Vec gb;

    Lstm() = default;
    Lstm(Eigen::Index hidden, Eigen::Index input) { resize(hidden, input); }

    void resize(Eigen::Index hidden, Eigen::Index input) {
        wx.setZero(4 * hidden, input);
        wh.setZero(4 * hidden, hidden);
        b.setZero(4 * hidden);
        gwx.setZero(4 * hidden, input);
        gwh.setZero(4 * hidden, hidden);
        gb.setZero(4 * hidden);
    }

    Eigen::Index hidden_dim() const { return wh.cols(); }
    Eigen::Index input_dim() const { return wx.cols(); }

    void init(Rng& rng) {
        const double s = 1.0 / std::sqrt(static_cast<double>(hidden_dim()));
        auto fill = [&](Mat& m) {
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-s, s);
        };
        fill(wx);
        fill(wh);
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-s, s);
    }

    void collect(std::vector<TensorRef>& out, const std::string& prefix) {
        out.push_back({prefix + ".wx", wx.data(), gwx.data(), wx.size()});
        out.push_back({prefix + ".wh", wh.data(), gwh.data(), wh.size()});
        out.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
    }
};

// Per-sequence activations kept for backward-through-time.
struct LstmTrace {
    std::vector<Vec> x;        // inputs
    std::vector<Vec> gi, gf, gg, go;  // gate activations
    std::vector<Vec> c, tc, h;        // cell, tanh(cell), hidden

    std::size_t steps() const { return x.size(); }
    const Vec& last_h() const { return h.back(); }
};

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline LstmTrace lstm_forward(const Lstm& p, const std::vector<Vec>& inputs) {
    const Eigen::Index hd = p.hidden_dim();
    LstmTrace t;
    t.x = inputs;
    Vec h = Vec::Zero(hd);
    Vec c = Vec::Zero(hd);
    for (const Vec& x : inputs) {
        if (x.size() != p.input_dim()) throw std::invalid_argument("lstm_forward: input size mismatch");
        Vec a = p.wx * x + p.wh * h + p.b;
        Vec gi(hd), gf(hd), gg(hd), go(hd);
        for (Eigen::Index k = 0; k < hd; ++k) {
            gi[k] = sigmoid(a[k]);
            gf[k] = sigmoid(a[hd + k]);
            gg[k] = std::tanh(a[2 * hd + k]);
            go[k] = sigmoid(a[3 * hd + k]);
        }
        c = gf.cwiseProduct(c) + gi.cwiseProduct(gg);
        Vec tc = c.array().tanh();
        h = go.cwiseProduct(tc);
        t.gi.push_back(gi);
        t.gf.push_back(gf);
        t.gg.push_back(gg);
        t.go.push_back(go);
        t.c.push_back(c);
        t.tc.push_back(tc);
        t.h.push_back(h);
    }
    return t;
}

// Backward through time. `dh` holds dL/dh_t per step (zero vectors where a
// step feeds nothing downstream). Accumulates parameter gradients and returns
// dL/dx_t for every step.
inline std::vector<Vec> lstm_backward(Lstm& p, const LstmTrace& t, const std::vector<Vec>& dh) {
    const Eigen::Index hd = p.hidden_dim();
    const std::size_t n = t.steps();
    if (dh.size() != n) throw std::invalid_argument("lstm_backward: dh size mismatch");
    std::vector<Vec> dx(n);
    Vec dh_next = Vec::Zero(hd);
    Vec dc_next = Vec::Zero(hd);
    for (std::size_t s = n; s-- > 0;) {
        Vec dht = dh[s] + dh_next;
        Vec dct = dc_next + dht.cwiseProduct(t.go[s]).cwiseProduct(
                                (1.0 - t.tc[s].array().square()).matrix());
        const Vec& c_prev_v = s > 0 ? t.c[s - 1] : Vec(Vec::Zero(hd));
        Vec da(4 * hd);
        for (Eigen::Index k = 0; k < hd; ++k) {
            const double di = dct[k] * t.gg[s][k];
            const double df = dct[k] * c_prev_v[k];
            const double dg = dct[k] * t.gi[s][k];
            const double do_ = dht[k] * t.tc[s][k];
            da[k] = di * t.gi[s][k] * (1.0 - t.gi[s][k]);
            da[hd + k] = df * t.gf[s][k] * (1.0 - t.gf[s][k]);
            da[2 * hd + k] = dg * (1.0 - t.gg[s][k] * t.gg[s][k]);
            da[3 * hd + k] = do_ * t.go[s][k] * (1.0 - t.go[s][k]);
        }
        p.gwx.noalias() += da * t.x[s].transpose();
        if (s > 0) p.gwh.noalias() += da * t.h[s - 1].transpose();
        p.gb += da;
        dx[s] = p.wx.transpose() * da;
        dh_next = s > 0 ? Vec(p.wh.transpose() * da) : Vec(Vec::Zero(hd));
        dc_next = dct.cwiseProduct(t.gf[s]);
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Softmax / cross-entropy helpers
// ---------------------------------------------------------------------------
inline Vec log_softmax(const Vec& logits) {
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return logits.array() - lse;
}

inline Vec softmax(const Vec& logits) { return log_softmax(logits).array().exp(); }

// loss = -log_softmax(logits)[target]; dlogits = softmax - onehot
inline double cross_entropy_from_logits(const Vec& logits, int target, Vec* dlogits = nullptr) {
    if (target < 0 || target >= logits.size())
        throw std::out_of_range("cross_entropy_from_logits: target out of range");
    Vec lp = log_softmax(logits);
    if (dlogits) {
        *dlogits = lp.array().exp();
        (*dlogits)[target] -= 1.0;
    }
    return -lp[target];
}

// ---------------------------------------------------------------------------
// Adam optimizer over a fixed set of tensors
// ---------------------------------------------------------------------------
class Adam {
public:
    Adam(std::vector<TensorRef> refs, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : refs_(std::move(refs)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto& r : refs_) {
            m_.emplace_back(Vec::Zero(r.size));
            v_.emplace_back(Vec::Zero(r.size));
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < refs_.size(); ++i) {
            auto& r = refs_[i];
            for (std::ptrdiff_t k = 0; k < r.size; ++k) {
                const double g = r.grad[k];
                m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g;
                v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g * g;
                const double mh = m_[i][k] / bc1;
                const double vh = v_[i][k] / bc2;
                r.value[k] -= lr_ * mh / (std::sqrt(vh) + eps_);
            }
        }
    }

    void set_lr(double lr) { lr_ = lr; }

private:
    std::vector<TensorRef> refs_;
    std::vector<Vec> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace stylecap::nn

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "setrec/common.hpp"
#include "setrec/errors.hpp"

namespace setrec {

/// Dense row-major matrix in double precision. A 1xN matrix doubles as a
/// row vector (biases, single samples).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row_ptr(std::size_t r) { return data.data() + r * cols; }
    const double* row_ptr(std::size_t r) const { return data.data() + r * cols; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    static Matrix zeros(std::size_t r, std::size_t c) { return Matrix(r, c, 0.0); }

    static Matrix uniform(std::size_t r, std::size_t c, double lo, double hi, Rng& rng) {
        Matrix m(r, c);
        std::uniform_real_distribution<double> dist(lo, hi);
        for (auto& v : m.data) v = dist(rng);
        return m;
    }

    static Matrix gaussian(std::size_t r, std::size_t c, double mean, double stddev, Rng& rng) {
        Matrix m(r, c);
        std::normal_distribution<double> dist(mean, stddev);
        for (auto& v : m.data) v = dist(rng);
        return m;
    }
};

inline std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

inline void check_same_shape(const Matrix& a, const Matrix& b, const char* where) {
    if (!a.same_shape(b))
        throw ModelError(std::string(where) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

/// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw ModelError("matmul: shape mismatch " + shape_str(a) + " vs " + shape_str(b));
    Matrix c(a.rows, b.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double* crow = c.row_ptr(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row_ptr(k);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

/// C = A^T * B
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows)
        throw ModelError("matmul_tn: shape mismatch " + shape_str(a) + " vs " + shape_str(b));
    Matrix c(a.cols, b.cols, 0.0);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* arow = a.row_ptr(k);
        const double* brow = b.row_ptr(k);
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = c.row_ptr(i);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

/// C = A * B^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols)
        throw ModelError("matmul_nt: shape mismatch " + shape_str(a) + " vs " + shape_str(b));
    Matrix c(a.rows, b.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double* crow = c.row_ptr(i);
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = b.row_ptr(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
            crow[j] = s;
        }
    }
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

// ---------------------------------------------------------------------------
// Elementwise operations
// ---------------------------------------------------------------------------

inline Matrix relu(const Matrix& x) {
    Matrix y = x;
    for (auto& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
}

/// grad * 1[x > 0]; the subgradient at exactly 0 is taken as 0.
inline Matrix relu_backward(const Matrix& grad, const Matrix& x) {
    check_same_shape(grad, x, "relu_backward");
    Matrix g = grad;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (x.data[i] <= 0.0) g.data[i] = 0.0;
    return g;
}

/// Numerically stable logistic; saturates to exactly 0/1 instead of NaN.
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline Matrix sigmoid(const Matrix& x) {
    Matrix y = x;
    for (auto& v : y.data) v = sigmoid(v);
    return y;
}

/// Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
/// Inference is the identity. `mask_out`, when given, receives the applied
/// multipliers so a backward pass can reuse them.
inline Matrix dropout(const Matrix& x, double p, bool training, Rng& rng, Matrix* mask_out = nullptr) {
    if (p < 0.0 || p >= 1.0) throw ModelError("dropout: p must be in [0,1), got " + format_compact(p));
    if (!training || p == 0.0) {
        if (mask_out) {
            *mask_out = Matrix(x.rows, x.cols, 1.0);
        }
        return x;
    }
    Matrix y = x;
    Matrix mask(x.rows, x.cols, 0.0);
    const double scale = 1.0 / (1.0 - p);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (u(rng) < p) {
            y.data[i] = 0.0;
        } else {
            y.data[i] *= scale;
            mask.data[i] = scale;
        }
    }
    if (mask_out) *mask_out = std::move(mask);
    return y;
}

inline Matrix dropout(const Matrix& x, double p, bool training, std::uint64_t seed) {
    Rng rng(seed);
    return dropout(x, p, training, rng);
}

/// Mean binary cross-entropy over all entries, computed from probabilities.
/// Logs are clamped so extreme-but-matching predictions stay finite.
inline double bce(const Matrix& pred, const Matrix& target) {
    check_same_shape(pred, target, "bce");
    constexpr double tiny = 1e-300;
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = pred.data[i];
        const double y = target.data[i];
        total -= y * std::log(std::max(p, tiny)) + (1.0 - y) * std::log(std::max(1.0 - p, tiny));
    }
    return total / static_cast<double>(pred.size());
}

/// Mean BCE evaluated from logits: softplus(z) - y*z per entry.
/// `grad_out`, when given, receives the fused sigmoid gradient (p - y)/count.
inline double bce_with_logits(const Matrix& logits, const Matrix& target, Matrix* grad_out = nullptr) {
    check_same_shape(logits, target, "bce_with_logits");
    const double inv = 1.0 / static_cast<double>(logits.size());
    double total = 0.0;
    if (grad_out) *grad_out = Matrix(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = logits.data[i];
        const double y = target.data[i];
        total += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y * z;
        if (grad_out) grad_out->data[i] = (sigmoid(z) - y) * inv;
    }
    return total * inv;
}

/// -0.5 * sum(1 + logvar - mu^2 - exp(logvar)), summed over code dims and
/// averaged over the batch (rows).
inline double kl_gauss(const Matrix& mu, const Matrix& logvar) {
    check_same_shape(mu, logvar, "kl_gauss");
    double total = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double m = mu.data[i];
        const double lv = logvar.data[i];
        total += 1.0 + lv - m * m - std::exp(lv);
    }
    return -0.5 * total / static_cast<double>(mu.rows);
}

/// Accumulates weight * d(kl_gauss)/d(mu, logvar) into the given gradients.
inline void kl_gauss_backward(const Matrix& mu, const Matrix& logvar, double weight,
                              Matrix& dmu, Matrix& dlogvar) {
    check_same_shape(mu, logvar, "kl_gauss_backward");
    check_same_shape(mu, dmu, "kl_gauss_backward");
    check_same_shape(mu, dlogvar, "kl_gauss_backward");
    const double inv_batch = 1.0 / static_cast<double>(mu.rows);
    for (std::size_t i = 0; i < mu.size(); ++i) {
        dmu.data[i] += weight * mu.data[i] * inv_batch;
        dlogvar.data[i] += weight * 0.5 * (std::exp(logvar.data[i]) - 1.0) * inv_batch;
    }
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

/// Fully connected layer y = x*W + b with cached input for the backward pass.
struct AffineLayer {
    Matrix W;   // in x out
    Matrix b;   // 1 x out
    Matrix dW;
    Matrix db;
    Matrix last_input;

    AffineLayer() = default;

    AffineLayer(std::size_t in, std::size_t out, Rng& rng) {
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        W = Matrix::uniform(in, out, -limit, limit, rng);
        b = Matrix::zeros(1, out);
        dW = Matrix::zeros(in, out);
        db = Matrix::zeros(1, out);
    }

    std::size_t in_dim() const { return W.rows; }
    std::size_t out_dim() const { return W.cols; }

    Matrix forward(const Matrix& x) {
        if (x.cols != W.rows)
            throw ModelError("affine_forward: input " + shape_str(x) + " vs weights " + shape_str(W));
        last_input = x;
        Matrix y = matmul(x, W);
        for (std::size_t i = 0; i < y.rows; ++i) {
            double* row = y.row_ptr(i);
            for (std::size_t j = 0; j < y.cols; ++j) row[j] += b.data[j];
        }
        return y;
    }

    /// Accumulates dW and db, returns the gradient w.r.t. the layer input.
    Matrix backward(const Matrix& grad_out) {
        if (grad_out.cols != W.cols || grad_out.rows != last_input.rows)
            throw ModelError("affine_backward: grad " + shape_str(grad_out) + " vs weights " + shape_str(W));
        Matrix gw = matmul_tn(last_input, grad_out);
        for (std::size_t i = 0; i < dW.size(); ++i) dW.data[i] += gw.data[i];
        for (std::size_t i = 0; i < grad_out.rows; ++i) {
            const double* row = grad_out.row_ptr(i);
            for (std::size_t j = 0; j < grad_out.cols; ++j) db.data[j] += row[j];
        }
        return matmul_nt(grad_out, W);
    }

    void zero_grad() {
        dW.fill(0.0);
        db.fill(0.0);
    }
};

/// Stack of affine layers with ReLU + dropout after every hidden layer and a
/// linear output. Covers the encoder, decoder, discriminator and the
/// standalone predictor, which differ only in their size lists.
class FeedForward {
public:
    FeedForward() = default;

    FeedForward(const std::vector<std::size_t>& dims, double dropout_p, Rng& rng)
        : dropout_p_(dropout_p) {
        if (dims.size() < 2) throw ModelError("FeedForward: need at least input and output dims");
        for (std::size_t i = 0; i + 1 < dims.size(); ++i)
            layers_.emplace_back(dims[i], dims[i + 1], rng);
        pre_act_.resize(layers_.size());
        drop_mask_.resize(layers_.size());
    }

    std::size_t in_dim() const { return layers_.front().in_dim(); }
    std::size_t out_dim() const { return layers_.back().out_dim(); }

    /// Linear output of the last layer; callers apply their own output
    /// nonlinearity (sigmoid for reconstructions, none for codes).
    Matrix forward(const Matrix& x, bool training, Rng& rng) {
        Matrix h = x;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            h = layers_[l].forward(h);
            if (l + 1 < layers_.size()) {
                pre_act_[l] = h;
                h = relu(h);
                h = dropout(h, dropout_p_, training, rng, &drop_mask_[l]);
            }
        }
        return h;
    }

    Matrix forward_inference(const Matrix& x) const {
        Matrix h = x;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const AffineLayer& lay = layers_[l];
            Matrix y = matmul(h, lay.W);
            for (std::size_t i = 0; i < y.rows; ++i) {
                double* row = y.row_ptr(i);
                for (std::size_t j = 0; j < y.cols; ++j) row[j] += lay.b.data[j];
            }
            h = std::move(y);
            if (l + 1 < layers_.size()) h = relu(h);
        }
        return h;
    }

    /// Backward from the gradient w.r.t. the linear output; accumulates all
    /// layer gradients and returns the gradient w.r.t. the network input.
    Matrix backward(const Matrix& grad_out) {
        Matrix g = grad_out;
        for (std::size_t l = layers_.size(); l-- > 0;) {
            if (l + 1 < layers_.size()) {
                for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= drop_mask_[l].data[i];
                g = relu_backward(g, pre_act_[l]);
            }
            g = layers_[l].backward(g);
        }
        return g;
    }

    std::vector<Matrix*> params() {
        std::vector<Matrix*> out;
        for (auto& l : layers_) {
            out.push_back(&l.W);
            out.push_back(&l.b);
        }
        return out;
    }

    std::vector<Matrix*> grads() {
        std::vector<Matrix*> out;
        for (auto& l : layers_) {
            out.push_back(&l.dW);
            out.push_back(&l.db);
        }
        return out;
    }

    void zero_grad() {
        for (auto& l : layers_) l.zero_grad();
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += l.W.size() + l.b.size();
        return n;
    }

    std::vector<AffineLayer>& layers() { return layers_; }
    const std::vector<AffineLayer>& layers() const { return layers_; }

private:
    std::vector<AffineLayer> layers_;
    double dropout_p_ = 0.0;
    std::vector<Matrix> pre_act_;
    std::vector<Matrix> drop_mask_;
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
    Matrix m;
    Matrix v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

inline void adam_step(AdamState& st, Matrix& param, const Matrix& grad, double lr) {
    if (st.m.empty()) {
        st.m = Matrix::zeros(param.rows, param.cols);
        st.v = Matrix::zeros(param.rows, param.cols);
    }
    check_same_shape(param, grad, "adam_step");
    check_same_shape(param, st.m, "adam_step");
    ++st.t;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad.data[i];
        st.m.data[i] = st.beta1 * st.m.data[i] + (1.0 - st.beta1) * g;
        st.v.data[i] = st.beta2 * st.v.data[i] + (1.0 - st.beta2) * g * g;
        const double mhat = st.m.data[i] / bc1;
        const double vhat = st.v.data[i] / bc2;
        param.data[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
    }
}

/// Owns one AdamState per registered tensor; params and grads stay aligned.
class AdamOptimizer {
public:
    explicit AdamOptimizer(double lr = 0.001) : lr_(lr) {}

    void step(std::span<Matrix* const> params, std::span<Matrix* const> grads) {
        if (params.size() != grads.size()) throw ModelError("adam: params/grads count mismatch");
        if (states_.empty()) states_.resize(params.size());
        if (states_.size() != params.size()) throw ModelError("adam: tensor count changed");
        for (std::size_t i = 0; i < params.size(); ++i)
            adam_step(states_[i], *params[i], *grads[i], lr_);
    }

    double lr() const { return lr_; }

private:
    double lr_;
    std::vector<AdamState> states_;
};

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

/// Central finite differences against analytic gradients on a seeded
/// subsample of at most `max_coords` coordinates. `loss` must be a
/// deterministic function of the current parameter values. Returns the
/// maximum relative error.
inline double grad_check(const std::function<double()>& loss,
                         std::span<Matrix* const> params,
                         std::span<const Matrix* const> analytic,
                         double h = 1e-5,
                         std::size_t max_coords = 200,
                         std::uint64_t seed = 0) {
    if (params.size() != analytic.size()) throw ModelError("grad_check: params/grads count mismatch");
    struct Coord {
        double* value;
        double grad;
    };
    std::vector<Coord> coords;
    for (std::size_t p = 0; p < params.size(); ++p) {
        check_same_shape(*params[p], *analytic[p], "grad_check");
        for (std::size_t i = 0; i < params[p]->size(); ++i)
            coords.push_back({&params[p]->data[i], analytic[p]->data[i]});
    }
    if (coords.size() > max_coords) {
        Rng rng(seed);
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(max_coords);
    }
    double max_rel = 0.0;
    for (const Coord& c : coords) {
        const double orig = *c.value;
        *c.value = orig + h;
        const double lp = loss();
        *c.value = orig - h;
        const double lm = loss();
        *c.value = orig;
        const double numeric = (lp - lm) / (2.0 * h);
        const double denom = std::max(std::abs(numeric) + std::abs(c.grad), 1e-8);
        max_rel = std::max(max_rel, std::abs(numeric - c.grad) / denom);
    }
    return max_rel;
}

}  // namespace setrec

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "pad8/common.hpp"

namespace pad8 {

// Dense row-major tensor with reverse-mode autodiff. Instantiated with
// S = float for the production path and S = double for gradient-check
// oracles; both share one implementation.

namespace detail {

// C[m x n] += A[m x k] * B[k x n]
template <typename S>
void gemm(const S* a, const S* b, S* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const S* arow = a + static_cast<size_t>(i) * k;
        S* crow = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const S av = arow[p];
            const S* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x k] += G[m x n] * B[k x n]^T, via explicit transpose of B
template <typename S>
void gemm_bt(const S* g, const S* b, S* c, int m, int k, int n) {
    std::vector<S> bt(static_cast<size_t>(n) * k);
    for (int p = 0; p < k; ++p)
        for (int j = 0; j < n; ++j) bt[static_cast<size_t>(j) * k + p] = b[static_cast<size_t>(p) * n + j];
    gemm(g, bt.data(), c, m, n, k);
}

// C[k x n] += A[m x k]^T * G[m x n]
template <typename S>
void gemm_at(const S* a, const S* g, S* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const S* arow = a + static_cast<size_t>(i) * k;
        const S* grow = g + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const S av = arow[p];
            S* crow = c + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * grow[j];
        }
    }
}

inline std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

inline size_t shape_numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    return n;
}

}  // namespace detail

template <typename S>
struct TensorNode {
    std::vector<int> shape;
    std::vector<S> value;
    std::vector<S> grad;  // empty until a gradient is accumulated
    bool requires_grad = false;

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), S(0));
    }
};

template <typename S>
class TapeT;

template <typename S>
class TensorT {
public:
    TensorT() = default;

    static TensorT zeros(std::vector<int> shape, bool requires_grad = false) {
        return filled(std::move(shape), S(0), requires_grad);
    }

    static TensorT filled(std::vector<int> shape, S v, bool requires_grad = false) {
        check_shape(shape);
        TensorT t;
        t.node_ = std::make_shared<TensorNode<S>>();
        t.node_->shape = std::move(shape);
        t.node_->value.assign(detail::shape_numel(t.node_->shape), v);
        t.node_->requires_grad = requires_grad;
        return t;
    }

    static TensorT from_data(std::vector<int> shape, std::vector<S> data, bool requires_grad = false) {
        check_shape(shape);
        if (detail::shape_numel(shape) != data.size()) {
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + detail::shape_str(shape));
        }
        TensorT t;
        t.node_ = std::make_shared<TensorNode<S>>();
        t.node_->shape = std::move(shape);
        t.node_->value = std::move(data);
        t.node_->requires_grad = requires_grad;
        return t;
    }

    static TensorT randn(std::vector<int> shape, Rng& rng, double stddev, bool requires_grad = false) {
        TensorT t = zeros(std::move(shape), requires_grad);
        for (auto& v : t.node_->value) v = static_cast<S>(rng.normal() * stddev);
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
    size_t size() const { return node_->value.size(); }

    std::vector<S>& value() { return node_->value; }
    const std::vector<S>& value() const { return node_->value; }
    S* data() { return node_->value.data(); }
    const S* data() const { return node_->value.data(); }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }

    bool has_grad() const { return !node_->grad.empty(); }
    const std::vector<S>& grad() const {
        if (node_->grad.empty()) throw TapeError("tensor has no gradient");
        return node_->grad;
    }
    void clear_grad() { node_->grad.clear(); }

    // value of a 1-element tensor
    S item() const {
        if (size() != 1) throw ShapeError("item() on tensor of shape " + detail::shape_str(shape()));
        return node_->value[0];
    }

    // value-only copy that does not participate in any tape
    TensorT detach() const {
        TensorT t;
        t.node_ = std::make_shared<TensorNode<S>>();
        t.node_->shape = node_->shape;
        t.node_->value = node_->value;
        t.node_->requires_grad = false;
        return t;
    }

    std::shared_ptr<TensorNode<S>> node_;

private:
    static void check_shape(const std::vector<int>& shape) {
        if (shape.empty()) throw ShapeError("tensor rank must be >= 1");
        for (int d : shape) {
            if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + detail::shape_str(shape));
        }
    }
};

// ---------------------------------------------------------------------------
// Tape: ordered record of executed differentiable operations. Ops append in
// execution order, which is already topological; backward replays in reverse.
// A tape can be consumed by backward() exactly once until reset().
// ---------------------------------------------------------------------------

template <typename S>
class TapeT {
public:
    TapeT() : prev_(current_ptr()) { current_ptr() = this; }
    ~TapeT() { current_ptr() = prev_; }

    TapeT(const TapeT&) = delete;
    TapeT& operator=(const TapeT&) = delete;

    static TapeT* current() { return current_ptr(); }

    void record(std::function<void()> backward_fn) { records_.push_back(std::move(backward_fn)); }

    size_t num_records() const { return records_.size(); }
    bool consumed() const { return consumed_; }

    void backward(TensorT<S>& loss) {
        if (consumed_) {
            throw TapeError("backward() called twice on the same tape; call reset() first");
        }
        if (loss.size() != 1) {
            throw TapeError("backward() requires a scalar root, got shape " +
                            detail::shape_str(loss.shape()));
        }
        loss.node_->ensure_grad();
        loss.node_->grad[0] = S(1);
        for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
        records_.clear();
        consumed_ = true;
    }

    void reset() {
        records_.clear();
        consumed_ = false;
    }

private:
    static TapeT*& current_ptr() {
        thread_local TapeT* cur = nullptr;
        return cur;
    }

    std::vector<std::function<void()>> records_;
    bool consumed_ = false;
    TapeT* prev_ = nullptr;
};

namespace detail {

template <typename S>
bool grad_wanted(const TensorT<S>& t) {
    return TapeT<S>::current() != nullptr && t.requires_grad();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul shape mismatch: " + detail::shape_str(a.shape()) + " * " +
                         detail::shape_str(b.shape()));
    }
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    auto out = TensorT<S>::zeros({m, n}, a.requires_grad() || b.requires_grad());
    detail::gemm(a.data(), b.data(), out.data(), m, k, n);
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto an = a.node_, bn = b.node_, on = out.node_;
        tape->record([an, bn, on, m, k, n] {
            if (on->grad.empty()) return;
            const S* g = on->grad.data();
            if (an->requires_grad) {
                an->ensure_grad();
                detail::gemm_bt(g, bn->value.data(), an->grad.data(), m, k, n);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                detail::gemm_at(an->value.data(), g, bn->grad.data(), m, k, n);
            }
        });
    }
    return out;
}

template <typename S>
TensorT<S> transpose(const TensorT<S>& x) {
    if (x.rank() != 2) throw ShapeError("transpose expects rank 2, got " + detail::shape_str(x.shape()));
    const int m = x.dim(0), n = x.dim(1);
    auto out = TensorT<S>::zeros({n, m}, x.requires_grad());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.data()[static_cast<size_t>(j) * m + i] = x.data()[static_cast<size_t>(i) * n + j];
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto xn = x.node_, on = out.node_;
        tape->record([xn, on, m, n] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    xn->grad[static_cast<size_t>(i) * n + j] += on->grad[static_cast<size_t>(j) * m + i];
        });
    }
    return out;
}

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("add shape mismatch: " + detail::shape_str(a.shape()) + " vs " +
                         detail::shape_str(b.shape()));
    }
    auto out = TensorT<S>::zeros(a.shape(), a.requires_grad() || b.requires_grad());
    const size_t n = a.size();
    for (size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto an = a.node_, bn = b.node_, on = out.node_;
        tape->record([an, bn, on, n] {
            if (on->grad.empty()) return;
            if (an->requires_grad) {
                an->ensure_grad();
                for (size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (size_t i = 0; i < n; ++i) bn->grad[i] += on->grad[i];
            }
        });
    }
    return out;
}

// x[n x d] + row vector v[d], broadcast over rows
template <typename S>
TensorT<S> add_rowvec(const TensorT<S>& x, const TensorT<S>& v) {
    if (x.rank() != 2 || v.rank() != 1 || x.dim(1) != v.dim(0)) {
        throw ShapeError("add_rowvec shape mismatch: " + detail::shape_str(x.shape()) + " + " +
                         detail::shape_str(v.shape()));
    }
    const int n = x.dim(0), d = x.dim(1);
    auto out = TensorT<S>::zeros(x.shape(), x.requires_grad() || v.requires_grad());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            out.data()[static_cast<size_t>(i) * d + j] = x.data()[static_cast<size_t>(i) * d + j] + v.data()[j];
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto xn = x.node_, vn = v.node_, on = out.node_;
        tape->record([xn, vn, on, n, d] {
            if (on->grad.empty()) return;
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (size_t i = 0; i < static_cast<size_t>(n) * d; ++i) xn->grad[i] += on->grad[i];
            }
            if (vn->requires_grad) {
                vn->ensure_grad();
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < d; ++j) vn->grad[j] += on->grad[static_cast<size_t>(i) * d + j];
            }
        });
    }
    return out;
}

template <typename S>
TensorT<S> scale(const TensorT<S>& x, S c) {
    auto out = TensorT<S>::zeros(x.shape(), x.requires_grad());
    const size_t n = x.size();
    for (size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * c;
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto xn = x.node_, on = out.node_;
        tape->record([xn, on, c, n] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (size_t i = 0; i < n; ++i) xn->grad[i] += c * on->grad[i];
        });
    }
    return out;
}

// multiply every element by a 1-element tensor (differentiable in both)
template <typename S>
TensorT<S> mul_scalar(const TensorT<S>& x, const TensorT<S>& s) {
    if (s.size() != 1) throw ShapeError("mul_scalar expects a 1-element scale, got " + detail::shape_str(s.shape()));
    const S sv = s.data()[0];
    auto out = TensorT<S>::zeros(x.shape(), x.requires_grad() || s.requires_grad());
    const size_t n = x.size();
    for (size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * sv;
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto xn = x.node_, sn = s.node_, on = out.node_;
        tape->record([xn, sn, on, sv, n] {
            if (on->grad.empty()) return;
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (size_t i = 0; i < n; ++i) xn->grad[i] += sv * on->grad[i];
            }
            if (sn->requires_grad) {
                sn->ensure_grad();
                S acc = S(0);
                for (size_t i = 0; i < n; ++i) acc += on->grad[i] * xn->value[i];
                sn->grad[0] += acc;
            }
        });
    }
    return out;
}

template <typename S>
TensorT<S> exp_elem(const TensorT<S>& x) {
    auto out = TensorT<S>::zeros(x.shape(), x.requires_grad());
    const size_t n = x.size();
    for (size_t i = 0; i < n; ++i) out.data()[i] = std::exp(x.data()[i]);
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto xn = x.node_, on = out.node_;
        tape->record([xn, on, n] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (size_t i = 0; i < n; ++i) xn->grad[i] += on->grad[i] * on->value[i];
        });
    }
    return out;
}

// elementwise min(x, cap); gradient is zero where the cap is active
template <typename S>
TensorT<S> clamp_max(const TensorT<S>& x, S cap) {
    auto out = TensorT<S>::zeros(x.shape(), x.requires_grad());
    const size_t n = x.size();
    for (size_t i = 0; i < n; ++i) out.data()[i] = std::min(x.data()[i], cap);
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto xn = x.node_, on = out.node_;
        tape->record([xn, on, cap, n] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (size_t i = 0; i < n; ++i)
                if (xn->value[i] < cap) xn->grad[i] += on->grad[i];
        });
    }
    return out;
}

// tanh-form gelu
template <typename S>
TensorT<S> gelu(const TensorT<S>& x) {
    constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double kA = 0.044715;
    auto out = TensorT<S>::zeros(x.shape(), x.requires_grad());
    const size_t n = x.size();
    for (size_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(x.data()[i]);
        const double t = std::tanh(kC * (v + kA * v * v * v));
        out.data()[i] = static_cast<S>(0.5 * v * (1.0 + t));
    }
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto xn = x.node_, on = out.node_;
        tape->record([xn, on, n] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (size_t i = 0; i < n; ++i) {
                const double v = static_cast<double>(xn->value[i]);
                const double u = kC * (v + kA * v * v * v);
                const double t = std::tanh(u);
                const double du = kC * (1.0 + 3.0 * kA * v * v);
                const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
                xn->grad[i] += on->grad[i] * static_cast<S>(d);
            }
        });
    }
    return out;
}

// softmax over the last axis, max-subtracted for stability
template <typename S>
TensorT<S> softmax(const TensorT<S>& x) {
    const int d = x.dim(x.rank() - 1);
    const size_t rows = x.size() / static_cast<size_t>(d);
    for (size_t i = 0; i < x.size(); ++i) {
        if (std::isnan(static_cast<double>(x.data()[i])))
            throw NumericError("softmax input contains NaN");
    }
    auto out = TensorT<S>::zeros(x.shape(), x.requires_grad());
    for (size_t r = 0; r < rows; ++r) {
        const S* in = x.data() + r * d;
        S* o = out.data() + r * d;
        S mx = in[0];
        for (int j = 1; j < d; ++j) mx = std::max(mx, in[j]);
        S sum = S(0);
        for (int j = 0; j < d; ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (int j = 0; j < d; ++j) o[j] /= sum;
    }
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto xn = x.node_, on = out.node_;
        tape->record([xn, on, rows, d] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (size_t r = 0; r < rows; ++r) {
                const S* y = on->value.data() + r * d;
                const S* g = on->grad.data() + r * d;
                S dot = S(0);
                for (int j = 0; j < d; ++j) dot += g[j] * y[j];
                S* gx = xn->grad.data() + r * d;
                for (int j = 0; j < d; ++j) gx[j] += y[j] * (g[j] - dot);
            }
        });
    }
    return out;
}

// layer norm over the last axis: gamma * (x - mean)/sqrt(var + eps) + beta
template <typename S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gamma, const TensorT<S>& beta, S eps = S(1e-5)) {
    const int d = x.dim(x.rank() - 1);
    if (gamma.rank() != 1 || beta.rank() != 1 || gamma.dim(0) != d || beta.dim(0) != d) {
        throw ShapeError("layer_norm parameter shape mismatch: x " + detail::shape_str(x.shape()) +
                         ", gamma " + detail::shape_str(gamma.shape()) + ", beta " +
                         detail::shape_str(beta.shape()));
    }
    if (eps <= S(0)) throw ConfigError("layer_norm eps must be positive");
    const size_t rows = x.size() / static_cast<size_t>(d);
    auto out = TensorT<S>::zeros(x.shape(), x.requires_grad() || gamma.requires_grad() || beta.requires_grad());
    // keep normalized values and inverse stddev for the backward pass
    std::vector<S> xhat(x.size());
    std::vector<S> inv_std(rows);
    for (size_t r = 0; r < rows; ++r) {
        const S* in = x.data() + r * d;
        S mean = S(0);
        for (int j = 0; j < d; ++j) mean += in[j];
        mean /= static_cast<S>(d);
        S var = S(0);
        for (int j = 0; j < d; ++j) {
            const S c = in[j] - mean;
            var += c * c;
        }
        var /= static_cast<S>(d);
        const S istd = S(1) / std::sqrt(var + eps);
        inv_std[r] = istd;
        S* o = out.data() + r * d;
        for (int j = 0; j < d; ++j) {
            const S h = (in[j] - mean) * istd;
            xhat[r * d + j] = h;
            o[j] = gamma.data()[j] * h + beta.data()[j];
        }
    }
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto xn = x.node_, gn = gamma.node_, bn = beta.node_, on = out.node_;
        tape->record([xn, gn, bn, on, rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
            if (on->grad.empty()) return;
            for (size_t r = 0; r < rows; ++r) {
                const S* g = on->grad.data() + r * d;
                const S* h = xhat.data() + r * d;
                if (gn->requires_grad) {
                    gn->ensure_grad();
                    for (int j = 0; j < d; ++j) gn->grad[j] += g[j] * h[j];
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    for (int j = 0; j < d; ++j) bn->grad[j] += g[j];
                }
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    S mean_dy = S(0), mean_dyh = S(0);
                    std::vector<S> dy(d);
                    for (int j = 0; j < d; ++j) {
                        dy[j] = g[j] * gn->value[j];
                        mean_dy += dy[j];
                        mean_dyh += dy[j] * h[j];
                    }
                    mean_dy /= static_cast<S>(d);
                    mean_dyh /= static_cast<S>(d);
                    S* gx = xn->grad.data() + r * d;
                    for (int j = 0; j < d; ++j)
                        gx[j] += (dy[j] - mean_dy - h[j] * mean_dyh) * inv_std[r];
                }
            }
        });
    }
    return out;
}

// mean over batch of -log softmax(logits)[label]
template <typename S>
TensorT<S> cross_entropy(const TensorT<S>& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) throw ShapeError("cross_entropy expects rank-2 logits, got " + detail::shape_str(logits.shape()));
    const int b = logits.dim(0), k = logits.dim(1);
    if (static_cast<int>(labels.size()) != b) {
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(b) + " rows");
    }
    for (int i = 0; i < b; ++i) {
        if (labels[i] < 0 || labels[i] >= k) {
            throw LabelError("cross_entropy: label " + std::to_string(labels[i]) + " out of range [0," +
                             std::to_string(k) + ") at row " + std::to_string(i));
        }
    }
    std::vector<S> probs(static_cast<size_t>(b) * k);
    double total = 0.0;
    for (int i = 0; i < b; ++i) {
        const S* row = logits.data() + static_cast<size_t>(i) * k;
        S mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < k; ++j) {
            const double e = std::exp(static_cast<double>(row[j] - mx));
            probs[static_cast<size_t>(i) * k + j] = static_cast<S>(e);
            sum += e;
        }
        for (int j = 0; j < k; ++j) probs[static_cast<size_t>(i) * k + j] = static_cast<S>(
            static_cast<double>(probs[static_cast<size_t>(i) * k + j]) / sum);
        total += std::log(sum) - static_cast<double>(row[labels[i]] - mx);
    }
    auto out = TensorT<S>::from_data({1}, {static_cast<S>(total / b)}, logits.requires_grad());
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto ln = logits.node_, on = out.node_;
        tape->record([ln, on, b, k, labels, probs = std::move(probs)] {
            if (on->grad.empty()) return;
            ln->ensure_grad();
            const S g = on->grad[0] / static_cast<S>(b);
            for (int i = 0; i < b; ++i) {
                S* gx = ln->grad.data() + static_cast<size_t>(i) * k;
                const S* p = probs.data() + static_cast<size_t>(i) * k;
                for (int j = 0; j < k; ++j) gx[j] += g * (p[j] - (j == labels[i] ? S(1) : S(0)));
            }
        });
    }
    return out;
}

// gather rows of a [V x d] table; gradient scatters into the looked-up rows
template <typename S>
TensorT<S> embedding_lookup(const TensorT<S>& table, const std::vector<int>& ids) {
    if (table.rank() != 2) throw ShapeError("embedding_lookup expects rank-2 table, got " + detail::shape_str(table.shape()));
    const int v = table.dim(0), d = table.dim(1);
    const int n = static_cast<int>(ids.size());
    if (n == 0) throw ShapeError("embedding_lookup: empty id list");
    for (int i = 0; i < n; ++i) {
        if (ids[i] < 0 || ids[i] >= v) {
            throw LabelError("embedding_lookup: id " + std::to_string(ids[i]) + " out of range [0," +
                             std::to_string(v) + ") at position " + std::to_string(i));
        }
    }
    auto out = TensorT<S>::zeros({n, d}, table.requires_grad());
    for (int i = 0; i < n; ++i)
        std::copy_n(table.data() + static_cast<size_t>(ids[i]) * d, d, out.data() + static_cast<size_t>(i) * d);
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto tn = table.node_, on = out.node_;
        tape->record([tn, on, ids, n, d] {
            if (on->grad.empty()) return;
            tn->ensure_grad();
            for (int i = 0; i < n; ++i) {
                S* dst = tn->grad.data() + static_cast<size_t>(ids[i]) * d;
                const S* src = on->grad.data() + static_cast<size_t>(i) * d;
                for (int j = 0; j < d; ++j) dst[j] += src[j];
            }
        });
    }
    return out;
}

// stack rank-2 tensors with equal column counts
template <typename S>
TensorT<S> concat_rows(const std::vector<TensorT<S>>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const int d = parts[0].dim(1);
    int total = 0;
    bool rg = false;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.dim(1) != d) {
            throw ShapeError("concat_rows: mismatched part shape " + detail::shape_str(p.shape()));
        }
        total += p.dim(0);
        rg = rg || p.requires_grad();
    }
    auto out = TensorT<S>::zeros({total, d}, rg);
    int row = 0;
    for (const auto& p : parts) {
        std::copy_n(p.data(), p.size(), out.data() + static_cast<size_t>(row) * d);
        row += p.dim(0);
    }
    if (auto* tape = TapeT<S>::current(); tape && rg) {
        std::vector<std::shared_ptr<TensorNode<S>>> nodes;
        nodes.reserve(parts.size());
        for (const auto& p : parts) nodes.push_back(p.node_);
        auto on = out.node_;
        tape->record([nodes, on, d] {
            if (on->grad.empty()) return;
            size_t row = 0;
            for (const auto& nd : nodes) {
                const size_t cnt = nd->value.size();
                if (nd->requires_grad) {
                    nd->ensure_grad();
                    for (size_t i = 0; i < cnt; ++i) nd->grad[i] += on->grad[row * d + i];
                }
                row += cnt / static_cast<size_t>(d);
            }
        });
    }
    return out;
}

template <typename S>
TensorT<S> slice_rows(const TensorT<S>& x, int start, int count) {
    if (x.rank() != 2) throw ShapeError("slice_rows expects rank 2, got " + detail::shape_str(x.shape()));
    const int n = x.dim(0), d = x.dim(1);
    if (start < 0 || count <= 0 || start + count > n) {
        throw ShapeError("slice_rows [" + std::to_string(start) + "," + std::to_string(start + count) +
                         ") out of range for " + detail::shape_str(x.shape()));
    }
    auto out = TensorT<S>::zeros({count, d}, x.requires_grad());
    std::copy_n(x.data() + static_cast<size_t>(start) * d, static_cast<size_t>(count) * d, out.data());
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto xn = x.node_, on = out.node_;
        tape->record([xn, on, start, count, d] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (size_t i = 0; i < static_cast<size_t>(count) * d; ++i)
                xn->grad[static_cast<size_t>(start) * d + i] += on->grad[i];
        });
    }
    return out;
}

template <typename S>
TensorT<S> slice_cols(const TensorT<S>& x, int start, int count) {
    if (x.rank() != 2) throw ShapeError("slice_cols expects rank 2, got " + detail::shape_str(x.shape()));
    const int n = x.dim(0), d = x.dim(1);
    if (start < 0 || count <= 0 || start + count > d) {
        throw ShapeError("slice_cols [" + std::to_string(start) + "," + std::to_string(start + count) +
                         ") out of range for " + detail::shape_str(x.shape()));
    }
    auto out = TensorT<S>::zeros({n, count}, x.requires_grad());
    for (int i = 0; i < n; ++i)
        std::copy_n(x.data() + static_cast<size_t>(i) * d + start, count, out.data() + static_cast<size_t>(i) * count);
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto xn = x.node_, on = out.node_;
        tape->record([xn, on, start, count, n, d] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < count; ++j)
                    xn->grad[static_cast<size_t>(i) * d + start + j] += on->grad[static_cast<size_t>(i) * count + j];
        });
    }
    return out;
}

template <typename S>
TensorT<S> concat_cols(const std::vector<TensorT<S>>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const int n = parts[0].dim(0);
    int total = 0;
    bool rg = false;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.dim(0) != n) {
            throw ShapeError("concat_cols: mismatched part shape " + detail::shape_str(p.shape()));
        }
        total += p.dim(1);
        rg = rg || p.requires_grad();
    }
    auto out = TensorT<S>::zeros({n, total}, rg);
    int col = 0;
    for (const auto& p : parts) {
        const int d = p.dim(1);
        for (int i = 0; i < n; ++i)
            std::copy_n(p.data() + static_cast<size_t>(i) * d, d, out.data() + static_cast<size_t>(i) * total + col);
        col += d;
    }
    if (auto* tape = TapeT<S>::current(); tape && rg) {
        std::vector<std::shared_ptr<TensorNode<S>>> nodes;
        for (const auto& p : parts) nodes.push_back(p.node_);
        auto on = out.node_;
        tape->record([nodes, on, n, total] {
            if (on->grad.empty()) return;
            int col = 0;
            for (const auto& nd : nodes) {
                const int d = nd->shape[1];
                if (nd->requires_grad) {
                    nd->ensure_grad();
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < d; ++j)
                            nd->grad[static_cast<size_t>(i) * d + j] +=
                                on->grad[static_cast<size_t>(i) * total + col + j];
                }
                col += d;
            }
        });
    }
    return out;
}

// normalize the last axis to unit Euclidean norm
template <typename S>
TensorT<S> l2_normalize(const TensorT<S>& x) {
    const int d = x.dim(x.rank() - 1);
    const size_t rows = x.size() / static_cast<size_t>(d);
    auto out = TensorT<S>::zeros(x.shape(), x.requires_grad());
    std::vector<S> inv_norm(rows);
    for (size_t r = 0; r < rows; ++r) {
        const S* in = x.data() + r * d;
        double sq = 0.0;
        for (int j = 0; j < d; ++j) sq += static_cast<double>(in[j]) * in[j];
        const double norm = std::sqrt(sq);
        if (norm < 1e-12) throw NormError("l2_normalize: zero-norm vector at row " + std::to_string(r));
        inv_norm[r] = static_cast<S>(1.0 / norm);
        S* o = out.data() + r * d;
        for (int j = 0; j < d; ++j) o[j] = in[j] * inv_norm[r];
    }
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto xn = x.node_, on = out.node_;
        tape->record([xn, on, rows, d, inv_norm = std::move(inv_norm)] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (size_t r = 0; r < rows; ++r) {
                const S* y = on->value.data() + r * d;
                const S* g = on->grad.data() + r * d;
                S dot = S(0);
                for (int j = 0; j < d; ++j) dot += g[j] * y[j];
                S* gx = xn->grad.data() + r * d;
                for (int j = 0; j < d; ++j) gx[j] += (g[j] - y[j] * dot) * inv_norm[r];
            }
        });
    }
    return out;
}

template <typename S>
TensorT<S> sum_all(const TensorT<S>& x) {
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) acc += static_cast<double>(x.data()[i]);
    auto out = TensorT<S>::from_data({1}, {static_cast<S>(acc)}, x.requires_grad());
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto xn = x.node_, on = out.node_;
        tape->record([xn, on] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (auto& g : xn->grad) g += on->grad[0];
        });
    }
    return out;
}

template <typename S>
TensorT<S> mean_all(const TensorT<S>& x) {
    const size_t n = x.size();
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += static_cast<double>(x.data()[i]);
    auto out = TensorT<S>::from_data({1}, {static_cast<S>(acc / static_cast<double>(n))}, x.requires_grad());
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto xn = x.node_, on = out.node_;
        tape->record([xn, on, n] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            const S g = on->grad[0] / static_cast<S>(n);
            for (auto& gx : xn->grad) gx += g;
        });
    }
    return out;
}

// contiguous reshape; element order is unchanged
template <typename S>
TensorT<S> reshape(const TensorT<S>& x, std::vector<int> new_shape) {
    if (detail::shape_numel(new_shape) != x.size()) {
        throw ShapeError("reshape " + detail::shape_str(x.shape()) + " -> " + detail::shape_str(new_shape) +
                         " changes element count");
    }
    auto out = TensorT<S>::from_data(std::move(new_shape), x.value(), x.requires_grad());
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto xn = x.node_, on = out.node_;
        tape->record([xn, on] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
        });
    }
    return out;
}

// out[i] = x[src_index[i]]; gradient scatter-adds back. Covers patch
// extraction and any other fixed permutation/gather.
template <typename S>
TensorT<S> gather_elems(const TensorT<S>& x, const std::vector<size_t>& src_index, std::vector<int> out_shape) {
    if (detail::shape_numel(out_shape) != src_index.size()) {
        throw ShapeError("gather_elems: index count does not match output shape " + detail::shape_str(out_shape));
    }
    for (size_t idx : src_index) {
        if (idx >= x.size()) throw ShapeError("gather_elems: source index out of range");
    }
    auto out = TensorT<S>::zeros(std::move(out_shape), x.requires_grad());
    for (size_t i = 0; i < src_index.size(); ++i) out.data()[i] = x.data()[src_index[i]];
    if (auto* tape = TapeT<S>::current(); tape && out.requires_grad()) {
        auto xn = x.node_, on = out.node_;
        tape->record([xn, on, src_index] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (size_t i = 0; i < src_index.size(); ++i) xn->grad[src_index[i]] += on->grad[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Multi-head self-attention over a [n x d] sequence. Returns the block output
// and the post-softmax attention weights [heads x n x n] (detached, for
// visualization).
// ---------------------------------------------------------------------------

template <typename S>
struct MhaParams {
    TensorT<S> wq, bq, wk, bk, wv, bv, wo, bo;
    int heads = 1;
};

template <typename S>
struct MhaResult {
    TensorT<S> out;   // [n x d]
    TensorT<S> attn;  // [heads x n x n], detached
};

template <typename S>
MhaResult<S> multi_head_attention(const TensorT<S>& x, const MhaParams<S>& p) {
    if (x.rank() != 2) throw ShapeError("attention expects rank-2 input, got " + detail::shape_str(x.shape()));
    const int n = x.dim(0), d = x.dim(1);
    if (p.heads <= 0 || d % p.heads != 0) {
        throw ConfigError("attention width " + std::to_string(d) + " not divisible by " +
                          std::to_string(p.heads) + " heads");
    }
    const int dh = d / p.heads;
    const S inv_sqrt_dh = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

    auto q = add_rowvec(matmul(x, p.wq), p.bq);
    auto k = add_rowvec(matmul(x, p.wk), p.bk);
    auto v = add_rowvec(matmul(x, p.wv), p.bv);

    std::vector<TensorT<S>> head_outs;
    head_outs.reserve(p.heads);
    auto attn_all = TensorT<S>::zeros({p.heads, n, n});
    for (int h = 0; h < p.heads; ++h) {
        auto qh = slice_cols(q, h * dh, dh);
        auto kh = slice_cols(k, h * dh, dh);
        auto vh = slice_cols(v, h * dh, dh);
        auto scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dh);
        auto weights = softmax(scores);  // [n x n]
        std::copy_n(weights.data(), weights.size(), attn_all.data() + static_cast<size_t>(h) * n * n);
        head_outs.push_back(matmul(weights, vh));
    }
    auto merged = concat_cols(head_outs);
    auto out = add_rowvec(matmul(merged, p.wo), p.bo);
    return {out, attn_all};
}

// production aliases; tests instantiate the double variants directly
using Tensor = TensorT<float>;
using Tape = TapeT<float>;

}  // namespace pad8

#pragma once

// Test-only oracles: central finite differences for gradients and a
// brute-force 8-class loss. Kept independent of the library's backward
// implementations on purpose.

#include <cmath>
#include <functional>
#include <vector>

#include "pad8/tensor.hpp"

namespace oracles {

template <typename S>
double rel_err(S a, S b) {
    const double da = static_cast<double>(a), db = static_cast<double>(b);
    return std::abs(da - db) / std::max({1.0, std::abs(da), std::abs(db)});
}

// Evaluates loss_fn forward-only at perturbed inputs and compares central
// differences against tape gradients. Returns the worst relative error over
// every element of every requires_grad input.
template <typename S>
double max_grad_rel_err(std::vector<pad8::TensorT<S>>& inputs,
                        const std::function<pad8::TensorT<S>()>& loss_fn,
                        double step) {
    // reference gradients from one taped pass
    for (auto& t : inputs) t.clear_grad();
    {
        pad8::TapeT<S> tape;
        auto loss = loss_fn();
        tape.backward(loss);
    }
    double worst = 0.0;
    for (auto& t : inputs) {
        if (!t.requires_grad()) continue;
        for (size_t i = 0; i < t.size(); ++i) {
            const S saved = t.data()[i];
            t.data()[i] = saved + static_cast<S>(step);
            const double up = static_cast<double>(loss_fn().item());
            t.data()[i] = saved - static_cast<S>(step);
            const double down = static_cast<double>(loss_fn().item());
            t.data()[i] = saved;
            const double fd = (up - down) / (2.0 * step);
            const double ad = t.has_grad() ? static_cast<double>(t.grad()[i]) : 0.0;
            worst = std::max(worst, rel_err(fd, ad));
        }
    }
    return worst;
}

// explicit exp/log cross entropy over rows of scale * (I . T^t)
template <typename S>
double brute_force_class_loss(const std::vector<std::vector<S>>& image_rows,
                              const std::vector<std::vector<S>>& text_rows,
                              const std::vector<int>& labels, double scale) {
    double total = 0.0;
    for (size_t i = 0; i < image_rows.size(); ++i) {
        std::vector<double> logits;
        for (const auto& t : text_rows) {
            double dot = 0.0;
            for (size_t j = 0; j < t.size(); ++j) dot += static_cast<double>(image_rows[i][j]) * t[j];
            logits.push_back(scale * dot);
        }
        double denom = 0.0;
        for (double l : logits) denom += std::exp(l);
        total += -std::log(std::exp(logits[static_cast<size_t>(labels[i])]) / denom);
    }
    return total / static_cast<double>(image_rows.size());
}

inline std::vector<double> random_unit_vector(pad8::Rng& rng, int d) {
    std::vector<double> v(static_cast<size_t>(d));
    double sq = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        sq += x * x;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& x : v) x *= inv;
    return v;
}

}  // namespace oracles

#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gazeclip/config.hpp"
#include "gazeclip/ops.hpp"
#include "gazeclip/parameter_store.hpp"

namespace testing {

using gazeclip::ag::Shape;
using gazeclip::ag::Tensor;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = false) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(gazeclip::ag::shape_numel(shape));
    for (auto& x : v) x = u(rng);
    gazeclip::ag::quantize_all(v);
    return Tensor::from_values(std::move(shape), std::move(v), requires_grad);
}

inline std::vector<double> copy_values(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a.at(i) - b.at(i)));
    return worst;
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (std::size_t i = 0; i < a.numel(); ++i)
        if (a.at(i) != b.at(i)) return false;
    return true;
}

// Worst relative error between reverse-mode gradients of sum(w ⊙ f(inputs))
// and central differences, over every coordinate of every input.
inline double fd_worst(const std::function<Tensor(const std::vector<Tensor>&)>& f, std::vector<Tensor> inputs,
                       std::uint64_t seed = 7, double eps = 1e-6) {
    gazeclip::ag::PrecisionScope precision(gazeclip::ag::Precision::kF64);
    for (auto& t : inputs) t.set_requires_grad(true);
    std::mt19937_64 rng(seed);
    Tensor probe = f(inputs);
    Tensor weights = random_tensor(probe.shape(), rng, 0.5, 1.5);
    auto loss = [&] { return gazeclip::ag::sum(gazeclip::ag::mul(f(inputs), weights)); };
    for (auto& t : inputs) t.zero_grad();
    loss().backward();
    double worst = 0.0;
    for (auto& t : inputs) {
        const std::vector<double> analytic = t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                                          : std::vector<double>(t.numel(), 0.0);
        auto values = t.values_mut();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + eps;
            const double up = loss().item();
            values[i] = saved - eps;
            const double down = loss().item();
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double err = std::abs(numeric - analytic[i]) /
                               std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

// A small configuration that keeps model-level tests fast.
inline gazeclip::ModelConfig tiny_config() {
    gazeclip::ModelConfig cfg = gazeclip::ModelConfig::desk();
    cfg.image_size = 16;
    cfg.patch = 8;
    cfg.d = 8;
    cfg.s = 8;
    cfg.a = 8;
    cfg.heads = 2;
    cfg.agpm_channels = 4;
    cfg.agpm_map = 2;
    cfg.agpm_blocks = 1;
    cfg.gie_blocks = 2;
    cfg.gie_lora_blocks = 1;
    cfg.lre_blocks = 1;
    cfg.lre_tokens = 16;
    cfg.lre_lora_blocks = 1;
    return cfg;
}

}  // namespace testing

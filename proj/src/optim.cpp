#include "gazeclip/optim.hpp"

#include <cmath>

#include "gazeclip/errors.hpp"

namespace gazeclip {

void Adam::step(ParameterStore& store) {
    for (const auto& e : store.entries()) {
        if (e.frozen) continue;
        require(e.tensor.has_grad(), ErrorKind::kContract, "no gradient for trainable parameter '" + e.name + "'");
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
    for (auto& e : store.entries()) {
        if (e.frozen) continue;
        auto theta = e.tensor.values_mut();
        const auto grad = e.tensor.grad();
        auto& mo = moments_[e.name];
        if (mo.m.empty()) {
            mo.m.assign(theta.size(), 0.0);
            mo.v.assign(theta.size(), 0.0);
        }
        for (std::size_t i = 0; i < theta.size(); ++i) {
            double g = grad[i];
            if (!options_.decoupled_weight_decay) g += options_.weight_decay * theta[i];
            mo.m[i] = options_.beta1 * mo.m[i] + (1.0 - options_.beta1) * g;
            mo.v[i] = options_.beta2 * mo.v[i] + (1.0 - options_.beta2) * g * g;
            const double mhat = mo.m[i] / bc1;
            const double vhat = mo.v[i] / bc2;
            double next = theta[i] - options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
            if (options_.decoupled_weight_decay) next -= options_.lr * options_.weight_decay * theta[i];
            theta[i] = ag::quantize(next);
        }
    }
}

const Adam::Moments* Adam::moments(const std::string& name) const {
    auto it = moments_.find(name);
    return it == moments_.end() ? nullptr : &it->second;
}

double lr_schedule(int epoch, double lr0, int step_epochs, double factor) {
    require(lr0 > 0.0, ErrorKind::kConfig, "initial learning rate must be positive");
    require(epoch >= 0 && step_epochs > 0, ErrorKind::kConfig, "invalid epoch or schedule step");
    return lr0 / std::pow(factor, static_cast<double>(epoch / step_epochs));
}

}  // namespace gazeclip

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "gazeclip/parameter_store.hpp"

namespace gazeclip {

struct AdamOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-3;
    /// false: L2 term added to the gradient (classic Adam). true: AdamW.
    bool decoupled_weight_decay = false;
};

/// Adam with bias correction. Only trainable store entries are touched.
class Adam {
public:
    explicit Adam(AdamOptions options) : options_(options) {}

    void step(ParameterStore& store);

    void set_lr(double lr) { options_.lr = lr; }
    double lr() const { return options_.lr; }
    long step_count() const { return step_; }
    const AdamOptions& options() const { return options_; }

    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
    };
    const Moments* moments(const std::string& name) const;

private:
    AdamOptions options_;
    long step_ = 0;
    std::unordered_map<std::string, Moments> moments_;
};

/// lr0 · factor^(−floor(epoch / step_epochs)); the defaults give a tenfold
/// drop every 15 epochs.
double lr_schedule(int epoch, double lr0, int step_epochs = 15, double factor = 10.0);

}  // namespace gazeclip

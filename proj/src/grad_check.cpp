#include "gazeclip/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gazeclip/errors.hpp"

namespace gazeclip {

namespace {

double evaluate(const std::function<ag::Tensor()>& loss) {
    ag::NoGradGuard no_grad;
    const double v = loss().item();
    require(std::isfinite(v), ErrorKind::kNumeric, "gradient check: non-finite loss");
    return v;
}

}  // namespace

std::vector<GradCheckEntry> grad_check(const std::function<ag::Tensor()>& loss, ParameterStore& store,
                                       const GradCheckOptions& options,
                                       const std::function<bool(const std::string&)>& filter) {
    require(ag::precision() == ag::Precision::kF64, ErrorKind::kContract,
            "gradient check requires 64-bit precision mode");
    store.zero_grad();
    ag::Tensor root = loss();
    require(std::isfinite(root.item()), ErrorKind::kNumeric, "gradient check: non-finite loss");
    root.backward();

    Rng rng(options.seed);
    std::vector<GradCheckEntry> out;
    for (auto& e : store.entries()) {
        if (e.frozen) continue;
        if (filter && !filter(e.name)) continue;
        GradCheckEntry result{e.name};
        const std::size_t n = e.tensor.numel();
        std::vector<double> analytic(n, 0.0);
        if (e.tensor.has_grad()) std::copy(e.tensor.grad().begin(), e.tensor.grad().end(), analytic.begin());

        std::vector<std::size_t> coords(n);
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (n > options.coords_per_param) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(options.coords_per_param);
            std::sort(coords.begin(), coords.end());
        }
        auto values = e.tensor.values_mut();
        for (std::size_t i : coords) {
            const double saved = values[i];
            values[i] = saved + options.eps;
            const double up = evaluate(loss);
            values[i] = saved - options.eps;
            const double down = evaluate(loss);
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * options.eps);
            const double abs_err = std::abs(numeric - analytic[i]);
            const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), options.denom_floor});
            result.max_abs_error = std::max(result.max_abs_error, abs_err);
            result.max_rel_error = std::max(result.max_rel_error, abs_err / denom);
        }
        result.coords_checked = coords.size();
        out.push_back(result);
    }
    store.zero_grad();
    return out;
}

double worst_error(const std::vector<GradCheckEntry>& entries) {
    double worst = 0.0;
    for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
    return worst;
}

}  // namespace gazeclip

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gazeclip/parameter_store.hpp"

namespace gazeclip {

struct GradCheckOptions {
    double eps = 1e-5;
    /// Coordinates sampled per parameter (all of them when the tensor is smaller).
    std::size_t coords_per_param = 100;
    std::uint64_t seed = 0;
    /// Relative error is |a − n| / max(|a|, |n|, denom_floor).
    double denom_floor = 1e-6;
};

struct GradCheckEntry {
    std::string name;
    std::size_t coords_checked = 0;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
};

/// Compares reverse-mode gradients of `loss` against central differences for
/// every trainable entry of `store` accepted by `filter` (all when empty).
/// Requires 64-bit precision.
std::vector<GradCheckEntry> grad_check(const std::function<ag::Tensor()>& loss, ParameterStore& store,
                                       const GradCheckOptions& options = {},
                                       const std::function<bool(const std::string&)>& filter = {});

double worst_error(const std::vector<GradCheckEntry>& entries);

}  // namespace gazeclip

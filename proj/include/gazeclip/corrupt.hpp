#pragma once

#include <cstdint>
#include <string>

#include "gazeclip/tensor.hpp"

namespace gazeclip {

enum class Corruption { kNoise, kBlur, kPixelate };

const char* to_string(Corruption kind);
Corruption parse_corruption(const std::string& name);

inline constexpr int kMaxSeverity = 5;

/// Corrupts a 3×H×W image in [0,1]. Severity 0 returns the input unchanged;
/// 1..5 follow a fixed ladder per kind. Noise draws from `seed`, so equal
/// seeds reuse the same standard normals at every severity.
ag::Tensor corrupt(const ag::Tensor& image, Corruption kind, int severity, std::uint64_t seed = 0);

}  // namespace gazeclip

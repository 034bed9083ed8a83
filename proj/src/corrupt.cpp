#include "gazeclip/corrupt.hpp"

#include <algorithm>
#include <array>
#include <random>

#include "gazeclip/errors.hpp"

namespace gazeclip {

namespace {

constexpr std::array<double, 5> kNoiseStd{0.02, 0.04, 0.08, 0.12, 0.18};
constexpr std::array<int, 5> kBlurSide{3, 3, 5, 5, 7};
constexpr std::array<int, 5> kBlurPasses{1, 2, 2, 3, 3};
constexpr std::array<int, 5> kPixelFactor{2, 3, 4, 6, 8};

using Plane = std::vector<double>;

Plane box_blur(const Plane& in, int H, int W, int side) {
    const int r = side / 2;
    Plane out(in.size());
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double total = 0.0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int yy = std::clamp(y + dy, 0, H - 1), xx = std::clamp(x + dx, 0, W - 1);
                    total += in[static_cast<std::size_t>(yy * W + xx)];
                }
            out[static_cast<std::size_t>(y * W + x)] = total / (side * side);
        }
    return out;
}

Plane pixelate(const Plane& in, int H, int W, int factor) {
    Plane out(in.size());
    for (int by = 0; by < H; by += factor)
        for (int bx = 0; bx < W; bx += factor) {
            const int ey = std::min(by + factor, H), ex = std::min(bx + factor, W);
            double total = 0.0;
            for (int y = by; y < ey; ++y)
                for (int x = bx; x < ex; ++x) total += in[static_cast<std::size_t>(y * W + x)];
            const double avg = total / ((ey - by) * (ex - bx));
            for (int y = by; y < ey; ++y)
                for (int x = bx; x < ex; ++x) out[static_cast<std::size_t>(y * W + x)] = avg;
        }
    return out;
}

}  // namespace

const char* to_string(Corruption kind) {
    switch (kind) {
        case Corruption::kNoise: return "noise";
        case Corruption::kBlur: return "blur";
        case Corruption::kPixelate: return "pixelate";
    }
    return "?";
}

Corruption parse_corruption(const std::string& name) {
    if (name == "noise") return Corruption::kNoise;
    if (name == "blur") return Corruption::kBlur;
    if (name == "pixelate") return Corruption::kPixelate;
    fail(ErrorKind::kConfig, "unknown corruption '" + name + "' (expected noise, blur or pixelate)");
}

ag::Tensor corrupt(const ag::Tensor& image, Corruption kind, int severity, std::uint64_t seed) {
    require(severity >= 0 && severity <= kMaxSeverity, ErrorKind::kConfig,
            "corruption severity must be 0.." + std::to_string(kMaxSeverity) + ", got " + std::to_string(severity));
    require(image.dim() == 3, ErrorKind::kDimension, "corruption input must be C×H×W");
    if (severity == 0) return ag::Tensor::from_values(image.shape(), {image.values().begin(), image.values().end()});

    const int C = static_cast<int>(image.extent(0)), H = static_cast<int>(image.extent(1)),
              W = static_cast<int>(image.extent(2));
    const auto plane = static_cast<std::size_t>(H * W);
    const auto level = static_cast<std::size_t>(severity - 1);
    std::vector<double> out(image.values().begin(), image.values().end());

    if (kind == Corruption::kNoise) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (double& v : out) v += kNoiseStd[level] * normal(rng);
    } else {
        for (int c = 0; c < C; ++c) {
            Plane p(out.begin() + static_cast<std::ptrdiff_t>(c * plane),
                    out.begin() + static_cast<std::ptrdiff_t>((c + 1) * plane));
            if (kind == Corruption::kBlur) {
                for (int pass = 0; pass < kBlurPasses[level]; ++pass) p = box_blur(p, H, W, kBlurSide[level]);
            } else {
                p = pixelate(p, H, W, kPixelFactor[level]);
            }
            std::copy(p.begin(), p.end(), out.begin() + static_cast<std::ptrdiff_t>(c * plane));
        }
    }
    for (double& v : out) v = std::clamp(v, 0.0, 1.0);
    return ag::Tensor::from_values(image.shape(), std::move(out));
}

}  // namespace gazeclip

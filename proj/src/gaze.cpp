#include "gazeclip/gaze.hpp"

#include <algorithm>

#include "gazeclip/errors.hpp"

namespace gazeclip {

ag::Tensor normalize_face_input(const ag::Tensor& image) {
    if (!(image.dim() == 3 && image.extent(0) == 3)) fail(ErrorKind::kDimension, "face input must be 3×H×W, got " + ag::shape_str(image.shape()));
    const std::size_t plane = image.extent(1) * image.extent(2);
    std::vector<double> out(image.numel());
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < plane; ++i)
            out[c * plane + i] = (image.at(c * plane + i) - kFaceMean[c]) / kFaceStd[c];
    return ag::Tensor::from_values(image.shape(), std::move(out));
}

EyeWindows eye_windows(int height, int width) {
    auto rect = [&](int y0, int y1, int x0, int x1) {
        Rect r{y0 * height / 32, y1 * height / 32, x0 * width / 32, x1 * width / 32};
        if (!(r.area() > 0)) fail(ErrorKind::kDimension, "image " + std::to_string(height) + "x" + std::to_string(width) + " too small for eye windows");
        return r;
    };
    return {rect(12, 16, 6, 12), rect(12, 16, 20, 26), rect(8, 11, 8, 24), rect(17, 20, 8, 24)};
}

double window_mean(const ag::Tensor& image, const Rect& r) {
    const std::size_t C = image.extent(0), H = image.extent(1), W = image.extent(2);
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c)
        for (int y = r.y0; y < r.y1; ++y)
            for (int x = r.x0; x < r.x1; ++x) total += image.at((c * H + static_cast<std::size_t>(y)) * W + x);
    return total / static_cast<double>(C * static_cast<std::size_t>(r.area()));
}

GazeVector estimate_gaze_standin(const ag::Tensor& normalized_image) {
    if (!(normalized_image.dim() == 3 && normalized_image.extent(0) == 3)) fail(ErrorKind::kDimension, "gaze estimator input must be 3×H×W, got " + ag::shape_str(normalized_image.shape()));
    const auto win = eye_windows(static_cast<int>(normalized_image.extent(1)),
                                 static_cast<int>(normalized_image.extent(2)));
    constexpr double limit = std::numbers::pi / 2.0;
    const double yaw = kStandInGain * (window_mean(normalized_image, win.left) - window_mean(normalized_image, win.right));
    const double pitch = kStandInGain * (window_mean(normalized_image, win.top) - window_mean(normalized_image, win.bottom));
    return {std::clamp(yaw, -limit, limit), std::clamp(pitch, -limit, limit)};
}

GazeVector estimate_gaze(const ag::Tensor& normalized_image, GazeSource source,
                         const std::optional<GazeVector>& manifest_gaze) {
    if (source == GazeSource::kManifest) {
        require(manifest_gaze.has_value(), ErrorKind::kData, "gaze source is 'manifest' but the record has no gaze");
        return *manifest_gaze;
    }
    return estimate_gaze_standin(normalized_image);
}

GazeAdapter::GazeAdapter(nn::Builder& b, int d) {
    weight = b.store.normal("gaze.adapter", {2, static_cast<std::size_t>(d)}, b.init_std, b.rng, false);
}

ag::Tensor GazeAdapter::operator()(const GazeVector& g) const {
    return ag::matmul(ag::Tensor::from_values({1, 2}, {g.yaw, g.pitch}), weight);
}

}  // namespace gazeclip

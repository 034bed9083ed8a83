#pragma once

#include <array>
#include <numbers>
#include <optional>

#include "gazeclip/config.hpp"
#include "gazeclip/nn.hpp"

namespace gazeclip {

/// Gaze direction in radians.
struct GazeVector {
    double yaw = 0.0;
    double pitch = 0.0;
    bool operator==(const GazeVector&) const = default;
};

inline constexpr std::array<double, 3> kFaceMean{0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kFaceStd{0.229, 0.224, 0.225};

/// Per-channel (x − mean)/std of a 3×H×W image in [0,1].
ag::Tensor normalize_face_input(const ag::Tensor& image);

/// Half-open pixel rectangle [y0,y1)×[x0,x1).
struct Rect {
    int y0, y1, x0, x1;
    int area() const { return (y1 - y0) * (x1 - x0); }
};

/// Eye-region windows read by the stand-in estimator, laid out on a 32×32
/// grid and scaled to the image size.
struct EyeWindows {
    Rect left, right, top, bottom;
};
EyeWindows eye_windows(int height, int width);

/// Gain of the stand-in's affine map; outputs are clamped to ±π/2.
inline constexpr double kStandInGain = std::numbers::pi / 2.0;

/// Mean over channels and window pixels.
double window_mean(const ag::Tensor& image, const Rect& r);

/// Frozen stand-in estimator on a normalized image:
/// yaw = gain·(μ_left − μ_right), pitch = gain·(μ_top − μ_bottom).
GazeVector estimate_gaze_standin(const ag::Tensor& normalized_image);

/// Dispatches on the configured source. The manifest source returns the
/// stored vector verbatim and fails with a data error when it is absent.
GazeVector estimate_gaze(const ag::Tensor& normalized_image, GazeSource source,
                         const std::optional<GazeVector>& manifest_gaze);

/// Trainable 2→d map turning a gaze vector into a gaze token [1×d].
class GazeAdapter {
public:
    GazeAdapter() = default;
    GazeAdapter(nn::Builder& b, int d);
    ag::Tensor operator()(const GazeVector& g) const;

    ag::Tensor weight;  // [2×d]
};

}  // namespace gazeclip

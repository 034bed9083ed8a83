#pragma once

#include <vector>

#include "gazeclip/config.hpp"
#include "gazeclip/nn.hpp"

namespace gazeclip {

/// Stacked conv → instance norm → GELU stages, stride 2, producing the local
/// feature map c×h×w.
class AppearanceEncoder {
public:
    AppearanceEncoder() = default;
    AppearanceEncoder(nn::Builder& b, const ModelConfig& cfg);
    ag::Tensor operator()(const ag::Tensor& image) const;

    struct Stage {
        ag::Tensor weight;  // [c×c_in×3×3]
        ag::Tensor bias;
        ag::Tensor gamma;
        ag::Tensor beta;
        int pad = 1;
    };
    std::vector<Stage> stages;
    int input_size = 0;
};

/// Appearance encoder plus appearance-gaze transformer encoder.
class Agpm {
public:
    Agpm() = default;
    Agpm(nn::Builder& b, const ModelConfig& cfg);

    /// c×h×w map → n×a tokens, one per spatial position.
    ag::Tensor tokenize(const ag::Tensor& feature_map) const;
    /// Gaze token [1×d] → [1×a].
    ag::Tensor project_gaze(const ag::Tensor& gaze_token) const;
    /// [class ‖ appearance ‖ gaze] + positions. `gaze_a` may be undefined
    /// when the gaze branch is disabled.
    ag::Tensor assemble(const ag::Tensor& appearance_tokens, const ag::Tensor& gaze_a) const;
    /// Runs the blocks and returns the class-token row.
    ag::Tensor encode(const ag::Tensor& sequence) const;

    /// image, gaze token [1×d] (or undefined) → I_g_ag [1×a].
    ag::Tensor operator()(const ag::Tensor& image, const ag::Tensor& gaze_token) const;

    AppearanceEncoder encoder;
    nn::Linear token_proj;  // c → a
    nn::Linear gaze_proj;   // d → a
    ag::Tensor cls;         // [1×a]
    ag::Tensor positions;   // [(n+2)×a], or (n+1) without gaze
    std::vector<nn::TransformerBlock> blocks;
};

}  // namespace gazeclip

#pragma once

#include <optional>
#include <vector>

#include "gazeclip/config.hpp"
#include "gazeclip/nn.hpp"

namespace gazeclip {

/// Frozen stand-in of the pretrained patch embedding: non-overlapping
/// patches → d, class token, position table.
class PatchEmbed {
public:
    PatchEmbed() = default;
    PatchEmbed(nn::Builder& b, const ModelConfig& cfg);

    /// 3×H×W → [(m+1)×d].
    ag::Tensor operator()(const ag::Tensor& image) const;

    nn::Linear proj;       // [3·p·p × d]
    ag::Tensor cls;        // [1×d]
    ag::Tensor positions;  // [(m+1)×d]
    int image_size = 0;
    int patch = 0;
};

/// Flattens the m non-overlapping patches of a 3×H×W image, channel-major
/// within each patch. Not part of the graph.
ag::Tensor extract_patches(const ag::Tensor& image, int patch);

/// Cross-attention from selected image tokens (the class token by default)
/// to the gaze tokens, followed by W_fc and a residual on the queried rows.
class GazeInjector {
public:
    GazeInjector() = default;
    GazeInjector(nn::Builder& b, const std::string& name, int d, int heads, QueryMode mode);

    ag::Tensor operator()(const ag::Tensor& tokens, const ag::Tensor& gaze_tokens) const;

    ag::Tensor w_que, w_key, w_val, w_fc;  // each [d×d]
    int heads = 1;
    QueryMode mode = QueryMode::kCls;
};

/// Frozen MHA → gaze injector → frozen FF, both frozen parts pre-norm with
/// residuals.
class Gitb {
public:
    Gitb() = default;
    Gitb(nn::Builder& b, const std::string& name, const ModelConfig& cfg);

    ag::Tensor operator()(const ag::Tensor& tokens, const ag::Tensor& gaze_tokens) const;
    /// The same frozen block with the injector skipped.
    ag::Tensor vanilla(const ag::Tensor& tokens) const;

    nn::LayerNorm ln1, ln2;
    nn::MultiHeadAttention attn;
    nn::FeedForward ff;
    std::optional<GazeInjector> injector;
};

class Gie {
public:
    Gie() = default;
    Gie(nn::Builder& b, const ModelConfig& cfg);

    /// image, gaze token [1×d] (or undefined) → I_g_ig [1×d].
    ag::Tensor operator()(const ag::Tensor& image, const ag::Tensor& gaze_token) const;
    /// Full token sequence after the last block and adapter.
    ag::Tensor tokens(const ag::Tensor& image, const ag::Tensor& gaze_token) const;

    PatchEmbed embed;
    std::vector<Gitb> blocks;
    /// loras[i] follows block lora_after[i].
    std::vector<nn::LoRA> loras;
    std::vector<int> lora_after;
};

}  // namespace gazeclip

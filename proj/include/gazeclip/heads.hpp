#pragma once

#include <span>
#include <vector>

#include "gazeclip/config.hpp"
#include "gazeclip/nn.hpp"

namespace gazeclip {

/// I_g_v = I_g_ig·W_ig + I_g_ag·W_ag. Either branch may be absent when its
/// encoder is switched off.
class Fusion {
public:
    Fusion() = default;
    Fusion(nn::Builder& b, const ModelConfig& cfg);

    /// Undefined inputs skip their branch; at least one must be present.
    ag::Tensor operator()(const ag::Tensor& image_feature, const ag::Tensor& appearance_feature) const;
    ag::Tensor project_appearance(const ag::Tensor& appearance_feature) const;

    ag::Tensor w_image;       // [d×s]
    ag::Tensor w_appearance;  // [a×s]
};

struct ExpertLogits {
    ag::Tensor attribution;  // [b×classes]
    ag::Tensor detection;    // [b×2]
};

class Experts {
public:
    Experts() = default;
    Experts(nn::Builder& b, const ModelConfig& cfg);

    ExpertLogits logits(const ag::Tensor& fused) const;

    nn::Linear attribution;
    nn::Linear detection;
};

struct Predictions {
    ag::Tensor attribution;  // simplex rows
    ag::Tensor detection;
};
Predictions predict(const ExpertLogits& logits);

/// Learnable log logit-scale, CLIP convention.
class Temperature {
public:
    static constexpr double kInitScale = 1.0 / 0.07;
    static constexpr double kMaxScale = 100.0;

    Temperature() = default;
    explicit Temperature(nn::Builder& b);

    /// min(exp(log_scale), 100) as a 1-element tensor.
    ag::Tensor scale() const;

    ag::Tensor log_scale;  // [1]
};

/// Rows of `one_hot` converted to class indices; anything but exactly one 1
/// per row (the rest 0) is a data error.
std::vector<int> labels_from_one_hot(const ag::Tensor& one_hot);

/// Mean over rows of −zᵀ·log(z_pre).
ag::Tensor loss_dfd(const ag::Tensor& probs, const ag::Tensor& one_hot);
ag::Tensor loss_dfd(const ag::Tensor& probs, std::span<const int> labels);
ag::Tensor loss_dfa(const ag::Tensor& probs, const ag::Tensor& one_hot);
ag::Tensor loss_dfa(const ag::Tensor& probs, std::span<const int> labels);

/// Symmetric image↔text cross-entropy against the diagonal of
/// scale·norm(img)·norm(txt)ᵀ.
ag::Tensor loss_cmc(const ag::Tensor& image_features, const ag::Tensor& text_features, const ag::Tensor& scale);

/// L_dfa + L_dfd (+ L_cmc when defined).
ag::Tensor total_loss(const ag::Tensor& dfa, const ag::Tensor& dfd, const ag::Tensor& cmc);

}  // namespace gazeclip

#include "gazeclip/heads.hpp"

#include <cmath>

#include "gazeclip/errors.hpp"

namespace gazeclip {

Fusion::Fusion(nn::Builder& b, const ModelConfig& cfg) {
    const auto s = static_cast<std::size_t>(cfg.s);
    if (cfg.use_gie)
        w_image = b.store.normal("fusion.w_image", {static_cast<std::size_t>(cfg.d), s}, b.init_std, b.rng, false);
    if (cfg.use_agpm)
        w_appearance =
            b.store.normal("fusion.w_appearance", {static_cast<std::size_t>(cfg.a), s}, b.init_std, b.rng, false);
}

ag::Tensor Fusion::project_appearance(const ag::Tensor& appearance_feature) const {
    require(w_appearance.defined(), ErrorKind::kConfig, "appearance branch is disabled");
    return ag::matmul(appearance_feature, w_appearance);
}

ag::Tensor Fusion::operator()(const ag::Tensor& image_feature, const ag::Tensor& appearance_feature) const {
    ag::Tensor out;
    if (image_feature.defined() && w_image.defined()) out = ag::matmul(image_feature, w_image);
    if (appearance_feature.defined() && w_appearance.defined()) {
        ag::Tensor part = ag::matmul(appearance_feature, w_appearance);
        out = out.defined() ? ag::add(out, part) : part;
    }
    require(out.defined(), ErrorKind::kConfig, "fusion needs at least one visual branch");
    return out;
}

Experts::Experts(nn::Builder& b, const ModelConfig& cfg) {
    attribution = nn::Linear(b, "experts.attribution", cfg.s, cfg.classes, true, false);
    detection = nn::Linear(b, "experts.detection", cfg.s, 2, true, false);
}

ExpertLogits Experts::logits(const ag::Tensor& fused) const { return {attribution(fused), detection(fused)}; }

Predictions predict(const ExpertLogits& logits) {
    return {ag::softmax_rows(logits.attribution), ag::softmax_rows(logits.detection)};
}

Temperature::Temperature(nn::Builder& b) {
    log_scale = b.store.full("cmc.log_scale", {1}, std::log(kInitScale), false);
}

ag::Tensor Temperature::scale() const { return ag::clamp_max(ag::exp(log_scale), kMaxScale); }

std::vector<int> labels_from_one_hot(const ag::Tensor& one_hot) {
    require(one_hot.dim() == 2, ErrorKind::kDimension, "one-hot labels must be a matrix");
    std::vector<int> labels;
    for (std::size_t r = 0; r < one_hot.rows(); ++r) {
        int label = -1;
        for (std::size_t c = 0; c < one_hot.cols(); ++c) {
            const double v = one_hot.at(r, c);
            if (v == 1.0 && label < 0) {
                label = static_cast<int>(c);
            } else {
                if (!(v == 0.0)) fail(ErrorKind::kData, "label row " + std::to_string(r) + " is not one-hot");
            }
        }
        if (!(label >= 0)) fail(ErrorKind::kData, "label row " + std::to_string(r) + " is not one-hot");
        labels.push_back(label);
    }
    return labels;
}

namespace {

ag::Tensor probs_ce(const ag::Tensor& probs, const ag::Tensor& one_hot) {
    if (!(probs.shape() == one_hot.shape())) fail(ErrorKind::kDimension, "predictions " + ag::shape_str(probs.shape()) + " vs labels " + ag::shape_str(one_hot.shape()));
    const auto labels = labels_from_one_hot(one_hot);
    return ag::nll_from_probs(probs, labels);
}

}  // namespace

ag::Tensor loss_dfd(const ag::Tensor& probs, const ag::Tensor& one_hot) { return probs_ce(probs, one_hot); }
ag::Tensor loss_dfd(const ag::Tensor& probs, std::span<const int> labels) { return ag::nll_from_probs(probs, labels); }
ag::Tensor loss_dfa(const ag::Tensor& probs, const ag::Tensor& one_hot) { return probs_ce(probs, one_hot); }
ag::Tensor loss_dfa(const ag::Tensor& probs, std::span<const int> labels) { return ag::nll_from_probs(probs, labels); }

ag::Tensor loss_cmc(const ag::Tensor& image_features, const ag::Tensor& text_features, const ag::Tensor& scale) {
    if (!(image_features.shape() == text_features.shape())) fail(ErrorKind::kDimension, "image features " + ag::shape_str(image_features.shape()) + " vs text features " + ag::shape_str(text_features.shape()));
    const std::size_t b = image_features.rows();
    if (!(b >= 2)) fail(ErrorKind::kConfig, "contrastive loss needs a batch of at least 2, got " + std::to_string(b));
    ag::Tensor sim = ag::matmul(ag::l2_normalize_rows(image_features), ag::transpose(ag::l2_normalize_rows(text_features)));
    ag::Tensor logits = ag::mul_scalar(sim, scale);
    std::vector<int> diagonal(b);
    for (std::size_t i = 0; i < b; ++i) diagonal[i] = static_cast<int>(i);
    ag::Tensor image_to_text = ag::cross_entropy_logits(logits, diagonal);
    ag::Tensor text_to_image = ag::cross_entropy_logits(ag::transpose(logits), diagonal);
    return ag::scale(ag::add(image_to_text, text_to_image), 0.5);
}

ag::Tensor total_loss(const ag::Tensor& dfa, const ag::Tensor& dfd, const ag::Tensor& cmc) {
    ag::Tensor total = ag::add(dfa, dfd);
    if (cmc.defined()) total = ag::add(total, cmc);
    return total;
}

}  // namespace gazeclip

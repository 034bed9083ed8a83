#include "gazeclip/agpm.hpp"

#include <cmath>

#include "gazeclip/errors.hpp"

namespace gazeclip {

AppearanceEncoder::AppearanceEncoder(nn::Builder& b, const ModelConfig& cfg) : input_size(cfg.image_size) {
    const auto pads = plan_appearance_stages(cfg.image_size, cfg.agpm_map);
    std::size_t in_ch = 3;
    const auto c = static_cast<std::size_t>(cfg.agpm_channels);
    for (std::size_t i = 0; i < pads.size(); ++i) {
        const std::string name = "agpm.ae.stage" + std::to_string(i);
        Stage st;
        // He init, std = sqrt(2 / fan_in).
        const double std = std::sqrt(2.0 / static_cast<double>(in_ch * 9));
        st.weight = b.store.normal(name + ".conv", {c, in_ch, 3, 3}, std, b.rng, false);
        st.bias = b.store.zeros(name + ".bias", {c}, false);
        st.gamma = b.store.full(name + ".norm.gamma", {c}, 1.0, false);
        st.beta = b.store.zeros(name + ".norm.beta", {c}, false);
        st.pad = pads[i];
        stages.push_back(std::move(st));
        in_ch = c;
    }
}

ag::Tensor AppearanceEncoder::operator()(const ag::Tensor& image) const {
    if (!(image.dim() == 3 && image.extent(0) == 3 && image.extent(1) == static_cast<std::size_t>(input_size) && image.extent(2) == static_cast<std::size_t>(input_size))) fail(ErrorKind::kDimension, "appearance encoder expects 3×" + std::to_string(input_size) + "×" + std::to_string(input_size) + ", got " + ag::shape_str(image.shape()));
    ag::Tensor x = image;
    for (const auto& st : stages) {
        x = ag::conv2d(x, st.weight, st.bias, 2, static_cast<std::size_t>(st.pad));
        const ag::Shape shape = x.shape();
        ag::Tensor flat = ag::reshape(x, {shape[0], shape[1] * shape[2]});
        flat = ag::layer_norm(flat, {}, {});
        flat = ag::add_row_offsets(ag::scale_rows(flat, st.gamma), st.beta);
        x = ag::gelu(ag::reshape(flat, shape));
    }
    return x;
}

Agpm::Agpm(nn::Builder& b, const ModelConfig& cfg) : encoder(b, cfg) {
    token_proj = nn::Linear(b, "agpm.token_proj", cfg.agpm_channels, cfg.a, true, false);
    if (cfg.use_gaze) gaze_proj = nn::Linear(b, "agpm.gaze_proj", cfg.d, cfg.a, true, false);
    cls = b.store.normal("agpm.cls", {1, static_cast<std::size_t>(cfg.a)}, b.init_std, b.rng, false);
    const std::size_t rows = static_cast<std::size_t>(cfg.appearance_tokens()) + (cfg.use_gaze ? 2 : 1);
    positions = b.store.normal("agpm.positions", {rows, static_cast<std::size_t>(cfg.a)}, b.init_std, b.rng, false);
    for (int i = 0; i < cfg.agpm_blocks; ++i)
        blocks.emplace_back(b, "agpm.block" + std::to_string(i), cfg.a, cfg.heads, false);
}

ag::Tensor Agpm::tokenize(const ag::Tensor& feature_map) const {
    if (!(feature_map.dim() == 3)) fail(ErrorKind::kDimension, "feature map must be c×h×w, got " + ag::shape_str(feature_map.shape()));
    const std::size_t c = feature_map.extent(0);
    const std::size_t n = feature_map.extent(1) * feature_map.extent(2);
    ag::Tensor per_position = ag::transpose(ag::reshape(feature_map, {c, n}));
    return token_proj(per_position);
}

ag::Tensor Agpm::project_gaze(const ag::Tensor& gaze_token) const { return gaze_proj(gaze_token); }

ag::Tensor Agpm::assemble(const ag::Tensor& appearance_tokens, const ag::Tensor& gaze_a) const {
    std::vector<ag::Tensor> parts{cls, appearance_tokens};
    if (gaze_a.defined()) parts.push_back(gaze_a);
    ag::Tensor seq = ag::concat_rows(parts);
    if (!(seq.shape() == positions.shape())) fail(ErrorKind::kDimension, "appearance-gaze sequence " + ag::shape_str(seq.shape()) + " does not match positions " + ag::shape_str(positions.shape()));
    return ag::add(seq, positions);
}

ag::Tensor Agpm::encode(const ag::Tensor& sequence) const {
    ag::Tensor x = sequence;
    for (const auto& block : blocks) x = block(x);
    return ag::slice_rows(x, 0, 1);
}

ag::Tensor Agpm::operator()(const ag::Tensor& image, const ag::Tensor& gaze_token) const {
    ag::Tensor tokens = tokenize(encoder(image));
    ag::Tensor gaze_a = gaze_token.defined() ? project_gaze(gaze_token) : ag::Tensor{};
    return encode(assemble(tokens, gaze_a));
}

}  // namespace gazeclip

#include "gazeclip/gie.hpp"

#include "gazeclip/errors.hpp"
#include "gazeclip/instrumentation.hpp"

namespace gazeclip {

ag::Tensor extract_patches(const ag::Tensor& image, int patch) {
    if (!(image.dim() == 3 && image.extent(0) == 3)) fail(ErrorKind::kDimension, "patch input must be 3×H×W, got " + ag::shape_str(image.shape()));
    const std::size_t H = image.extent(1), W = image.extent(2), P = static_cast<std::size_t>(patch);
    if (!(patch > 0 && H % P == 0 && W % P == 0)) fail(ErrorKind::kConfig, "image side " + std::to_string(H) + "x" + std::to_string(W) + " not divisible by patch " + std::to_string(patch));
    const std::size_t gy = H / P, gx = W / P, width = 3 * P * P;
    std::vector<double> out(gy * gx * width);
    for (std::size_t py = 0; py < gy; ++py)
        for (std::size_t px = 0; px < gx; ++px) {
            double* row = &out[(py * gx + px) * width];
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t y = 0; y < P; ++y)
                    for (std::size_t x = 0; x < P; ++x)
                        row[(c * P + y) * P + x] = image.at((c * H + py * P + y) * W + px * P + x);
        }
    return ag::Tensor::from_values({gy * gx, width}, std::move(out));
}

PatchEmbed::PatchEmbed(nn::Builder& b, const ModelConfig& cfg) : image_size(cfg.image_size), patch(cfg.patch) {
    proj = nn::Linear(b, "gie.patch_embed.proj", 3 * cfg.patch * cfg.patch, cfg.d, true, true);
    cls = b.store.normal("gie.patch_embed.cls", {1, static_cast<std::size_t>(cfg.d)}, b.init_std, b.rng, true);
    positions = b.store.normal("gie.patch_embed.positions",
                               {static_cast<std::size_t>(cfg.patches() + 1), static_cast<std::size_t>(cfg.d)},
                               b.init_std, b.rng, true);
}

ag::Tensor PatchEmbed::operator()(const ag::Tensor& image) const {
    ag::Tensor tokens = ag::concat_rows({cls, proj(extract_patches(image, patch))});
    if (!(tokens.shape() == positions.shape())) fail(ErrorKind::kDimension, "patch sequence " + ag::shape_str(tokens.shape()) + " does not match positions " + ag::shape_str(positions.shape()));
    return ag::add(tokens, positions);
}

GazeInjector::GazeInjector(nn::Builder& b, const std::string& name, int d, int heads_, QueryMode mode_)
    : heads(heads_), mode(mode_) {
    const ag::Shape sq{static_cast<std::size_t>(d), static_cast<std::size_t>(d)};
    w_que = b.store.normal(name + ".w_que", sq, b.init_std, b.rng, false);
    w_key = b.store.normal(name + ".w_key", sq, b.init_std, b.rng, false);
    w_val = b.store.normal(name + ".w_val", sq, b.init_std, b.rng, false);
    w_fc = b.store.normal(name + ".w_fc", sq, b.init_std, b.rng, false);
}

ag::Tensor GazeInjector::operator()(const ag::Tensor& tokens, const ag::Tensor& gaze_tokens) const {
    const std::size_t rows = tokens.rows();
    require(rows >= 2, ErrorKind::kDimension, "gaze injector needs a class token and at least one patch");
    require(gaze_tokens.rows() >= 1, ErrorKind::kDimension, "gaze injector needs at least one gaze token");
    std::size_t begin = 0, count = 1;
    if (mode == QueryMode::kPatch) {
        begin = 1;
        count = rows - 1;
    } else if (mode == QueryMode::kAll) {
        count = rows;
    }
    ag::Tensor queried = ag::slice_rows(tokens, begin, count);
    ag::Tensor q = ag::matmul(queried, w_que);
    ag::Tensor k = ag::matmul(gaze_tokens, w_key);
    ag::Tensor v = ag::matmul(gaze_tokens, w_val);
    instrumentation::add_gi_attention_work(count * gaze_tokens.rows() * static_cast<std::size_t>(heads));
    ag::Tensor global = nn::multi_head_attend(q, k, v, heads);
    ag::Tensor added = ag::add(ag::matmul(global, w_fc), queried);
    switch (mode) {
        case QueryMode::kCls: return ag::concat_rows({added, ag::slice_rows(tokens, 1, rows - 1)});
        case QueryMode::kPatch: return ag::concat_rows({ag::slice_rows(tokens, 0, 1), added});
        case QueryMode::kAll: return added;
    }
    return added;
}

Gitb::Gitb(nn::Builder& b, const std::string& name, const ModelConfig& cfg)
    : ln1(b, name + ".ln1", cfg.d, true),
      ln2(b, name + ".ln2", cfg.d, true),
      attn(b, name + ".attn", cfg.d, cfg.heads, true),
      ff(b, name + ".ff", cfg.d, true) {
    if (cfg.use_gi && cfg.use_gaze) injector.emplace(b, name + ".gi", cfg.d, cfg.heads, cfg.query_mode);
}

ag::Tensor Gitb::operator()(const ag::Tensor& tokens, const ag::Tensor& gaze_tokens) const {
    ag::Tensor h = ag::add(tokens, attn(ln1(tokens)));
    if (injector && gaze_tokens.defined()) h = (*injector)(h, gaze_tokens);
    return ag::add(h, ff(ln2(h)));
}

ag::Tensor Gitb::vanilla(const ag::Tensor& tokens) const {
    ag::Tensor h = ag::add(tokens, attn(ln1(tokens)));
    return ag::add(h, ff(ln2(h)));
}

Gie::Gie(nn::Builder& b, const ModelConfig& cfg) : embed(b, cfg) {
    for (int i = 0; i < cfg.gie_blocks; ++i) blocks.emplace_back(b, "gie.block" + std::to_string(i), cfg);
    for (int i = 0; i < cfg.gie_lora_blocks; ++i) {
        const int after = cfg.gie_blocks - cfg.gie_lora_blocks + i;
        loras.emplace_back(b, "gie.lora" + std::to_string(i), cfg.d, cfg.lora_rank, cfg.lora_alpha);
        lora_after.push_back(after);
    }
}

ag::Tensor Gie::tokens(const ag::Tensor& image, const ag::Tensor& gaze_token) const {
    ag::Tensor x = embed(image);
    std::size_t next_lora = 0;
    for (std::size_t j = 0; j < blocks.size(); ++j) {
        x = blocks[j](x, gaze_token);
        if (next_lora < loras.size() && lora_after[next_lora] == static_cast<int>(j)) x = loras[next_lora++](x);
    }
    return x;
}

ag::Tensor Gie::operator()(const ag::Tensor& image, const ag::Tensor& gaze_token) const {
    return ag::slice_rows(tokens(image, gaze_token), 0, 1);
}

}  // namespace gazeclip

#include "gazeclip/nn.hpp"

#include <cmath>

#include "gazeclip/errors.hpp"
#include "gazeclip/instrumentation.hpp"

namespace gazeclip::nn {

Linear::Linear(Builder& b, const std::string& name, int in, int out, bool with_bias, bool frozen) {
    weight = b.store.normal(name + ".weight", {static_cast<std::size_t>(in), static_cast<std::size_t>(out)},
                            b.init_std, b.rng, frozen);
    if (with_bias) bias = b.store.zeros(name + ".bias", {static_cast<std::size_t>(out)}, frozen);
}

Tensor Linear::operator()(const Tensor& x) const {
    Tensor y = ag::matmul(x, weight);
    return bias.defined() ? ag::add_bias(y, bias) : y;
}

LayerNorm::LayerNorm(Builder& b, const std::string& name, int dim, bool frozen) {
    gamma = b.store.full(name + ".gamma", {static_cast<std::size_t>(dim)}, 1.0, frozen);
    beta = b.store.zeros(name + ".beta", {static_cast<std::size_t>(dim)}, frozen);
}

Tensor LayerNorm::operator()(const Tensor& x) const { return ag::layer_norm(x, gamma, beta); }

Tensor multi_head_attend(const Tensor& q, const Tensor& k, const Tensor& v, int heads) {
    const std::size_t dim = q.cols();
    if (!(heads > 0 && dim % static_cast<std::size_t>(heads) == 0)) fail(ErrorKind::kDimension, "attention width " + std::to_string(dim) + " not divisible by " + std::to_string(heads) + " heads");
    if (!(k.cols() == dim && v.cols() == dim && k.rows() == v.rows())) fail(ErrorKind::kDimension, "attention operands disagree: q" + ag::shape_str(q.shape()) + " k" + ag::shape_str(k.shape()) + " v" + ag::shape_str(v.shape()));
    const std::size_t hd = dim / static_cast<std::size_t>(heads);
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    if (heads == 1) {
        Tensor probs = ag::softmax_rows(ag::scale(ag::matmul(q, ag::transpose(k)), scale));
        instrumentation::record_attention_rows(probs);
        return ag::matmul(probs, v);
    }
    std::vector<Tensor> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        const std::size_t off = static_cast<std::size_t>(h) * hd;
        Tensor qh = ag::slice_cols(q, off, hd);
        Tensor kh = ag::slice_cols(k, off, hd);
        Tensor vh = ag::slice_cols(v, off, hd);
        Tensor probs = ag::softmax_rows(ag::scale(ag::matmul(qh, ag::transpose(kh)), scale));
        instrumentation::record_attention_rows(probs);
        outs.push_back(ag::matmul(probs, vh));
    }
    return ag::concat_cols(outs);
}

MultiHeadAttention::MultiHeadAttention(Builder& b, const std::string& name, int dim, int heads_, bool frozen)
    : q(b, name + ".q", dim, dim, true, frozen),
      k(b, name + ".k", dim, dim, true, frozen),
      v(b, name + ".v", dim, dim, true, frozen),
      out(b, name + ".out", dim, dim, true, frozen),
      heads(heads_) {}

Tensor MultiHeadAttention::operator()(const Tensor& x) const {
    return out(multi_head_attend(q(x), k(x), v(x), heads));
}

FeedForward::FeedForward(Builder& b, const std::string& name, int dim, bool frozen)
    : fc1(b, name + ".fc1", dim, 4 * dim, true, frozen), fc2(b, name + ".fc2", 4 * dim, dim, true, frozen) {}

Tensor FeedForward::operator()(const Tensor& x) const { return fc2(ag::gelu(fc1(x))); }

TransformerBlock::TransformerBlock(Builder& b, const std::string& name, int dim, int heads, bool frozen)
    : ln1(b, name + ".ln1", dim, frozen),
      ln2(b, name + ".ln2", dim, frozen),
      attn(b, name + ".attn", dim, heads, frozen),
      ff(b, name + ".ff", dim, frozen) {}

Tensor TransformerBlock::operator()(const Tensor& x) const {
    Tensor h = ag::add(x, attn(ln1(x)));
    return ag::add(h, ff(ln2(h)));
}

LoRA::LoRA(Builder& b, const std::string& name, int dim, int rank_, double alpha_) : rank(rank_), alpha(alpha_) {
    down = b.store.normal(name + ".A", {static_cast<std::size_t>(dim), static_cast<std::size_t>(rank)},
                          1.0 / std::sqrt(static_cast<double>(dim)), b.rng, false);
    up = b.store.zeros(name + ".B", {static_cast<std::size_t>(rank), static_cast<std::size_t>(dim)}, false);
}

Tensor LoRA::operator()(const Tensor& x) const {
    Tensor delta = ag::matmul(ag::matmul(x, down), up);
    return ag::add(x, ag::scale(delta, alpha / static_cast<double>(rank)));
}

}  // namespace gazeclip::nn

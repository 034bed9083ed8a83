#pragma once

#include <string>

#include "gazeclip/ops.hpp"
#include "gazeclip/parameter_store.hpp"

namespace gazeclip::nn {

using ag::Tensor;

/// Where a module registers its parameters.
struct Builder {
    ParameterStore& store;
    Rng& rng;
    double init_std;
};

/// y = x·W (+ b), W: [in×out].
class Linear {
public:
    Linear() = default;
    Linear(Builder& b, const std::string& name, int in, int out, bool with_bias, bool frozen);
    Tensor operator()(const Tensor& x) const;

    Tensor weight;
    Tensor bias;
};

class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(Builder& b, const std::string& name, int dim, bool frozen);
    Tensor operator()(const Tensor& x) const;

    Tensor gamma;
    Tensor beta;
};

/// Scaled dot-product attention over `heads` column groups of already
/// projected q[nq×D], k[nk×D], v[nk×D], with 1/sqrt(D/heads) scaling.
Tensor multi_head_attend(const Tensor& q, const Tensor& k, const Tensor& v, int heads);

class MultiHeadAttention {
public:
    MultiHeadAttention() = default;
    MultiHeadAttention(Builder& b, const std::string& name, int dim, int heads, bool frozen);
    Tensor operator()(const Tensor& x) const;

    Linear q, k, v, out;
    int heads = 1;
};

/// GELU MLP with expansion 4.
class FeedForward {
public:
    FeedForward() = default;
    FeedForward(Builder& b, const std::string& name, int dim, bool frozen);
    Tensor operator()(const Tensor& x) const;

    Linear fc1, fc2;
};

/// Pre-norm block: x + MHA(LN1(x)), then h + FF(LN2(h)).
class TransformerBlock {
public:
    TransformerBlock() = default;
    TransformerBlock(Builder& b, const std::string& name, int dim, int heads, bool frozen);
    Tensor operator()(const Tensor& x) const;

    LayerNorm ln1, ln2;
    MultiHeadAttention attn;
    FeedForward ff;
};

/// Residual low-rank layer on a token sequence: y = x + (alpha/rank)·x·A·B.
/// A is Gaussian, B starts at zero so a fresh adapter is the identity.
class LoRA {
public:
    LoRA() = default;
    LoRA(Builder& b, const std::string& name, int dim, int rank, double alpha);
    Tensor operator()(const Tensor& x) const;

    Tensor down;  // A: [dim×rank]
    Tensor up;    // B: [rank×dim]
    int rank = 1;
    double alpha = 1.0;
};

}  // namespace gazeclip::nn

#pragma once

#include <span>
#include <vector>

#include "gazeclip/tensor.hpp"

// Differentiable operations. Row-wise ops treat the trailing axis as columns
// and every leading axis as rows, so a vector[k] is one row of k values.

namespace gazeclip::ag {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// x times a one-element tensor.
Tensor mul_scalar(const Tensor& x, const Tensor& s);

/// x[r×c] + bias[c], broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// Row i of x[r×c] multiplied by v[i].
Tensor scale_rows(const Tensor& x, const Tensor& v);
/// Row i of x[r×c] offset by v[i].
Tensor add_row_offsets(const Tensor& x, const Tensor& v);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);

Tensor softmax_rows(const Tensor& x);
Tensor log_softmax_rows(const Tensor& x);

/// Row-wise normalization; gamma/beta[c] may be undefined (no affine).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
/// Exact GELU, 0.5·x·(1 + erf(x/√2)).
Tensor gelu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor clamp_max(const Tensor& x, double limit);

/// x[C×H×W] * w[O×C×k×k] (+ b[O]) → [O×H'×W'].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad);

/// Gathers rows of table[V×s] → [n×s].
Tensor embedding(const Tensor& table, std::span<const int> ids);

Tensor l2_normalize_rows(const Tensor& x, double eps = 1e-12);

/// Mean over rows of −log softmax(logits)[label].
Tensor cross_entropy_logits(const Tensor& logits, std::span<const int> labels);
/// Mean over rows of −log probs[label]; probs are already normalized.
Tensor nll_from_probs(const Tensor& probs, std::span<const int> labels);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

namespace debug {
/// Deliberate corruption of one backward rule, for verifying the gradient
/// checker. Never enabled outside mutation tests.
enum class BackwardFault { kNone, kGelu, kMatmul, kLayerNorm };
void set_backward_fault(BackwardFault fault);
BackwardFault backward_fault();
}  // namespace debug

}  // namespace gazeclip::ag

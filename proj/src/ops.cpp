#include "gazeclip/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>

#include "gazeclip/errors.hpp"

namespace gazeclip::ag {

namespace debug {
namespace {
std::atomic<BackwardFault> g_fault{BackwardFault::kNone};
}
void set_backward_fault(BackwardFault fault) { g_fault.store(fault); }
BackwardFault backward_fault() { return g_fault.load(std::memory_order_relaxed); }
}  // namespace debug

namespace {

using Backward = std::function<void(Node&)>;

Tensor make_result(Shape shape, std::vector<double> values, std::initializer_list<const Tensor*> inputs,
                   const char* op, Backward backward) {
    quantize_all(values);
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->op = op;
    if (grad_enabled()) {
        for (const Tensor* in : inputs) {
            if (in->defined() && in->requires_grad()) node->requires_grad = true;
        }
    }
    if (node->requires_grad) {
        for (const Tensor* in : inputs) node->parents.push_back(in->defined() ? in->node() : nullptr);
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs, const char* op,
                   Backward backward) {
    quantize_all(values);
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->op = op;
    if (grad_enabled()) {
        for (const auto& in : inputs) {
            if (in.requires_grad()) node->requires_grad = true;
        }
    }
    if (node->requires_grad) {
        for (const auto& in : inputs) node->parents.push_back(in.node());
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

// Parent gradient buffer, or empty if that parent does not need a gradient.
std::span<double> pgrad(Node& self, std::size_t i) {
    Node* p = self.parents[i].get();
    if (p == nullptr || !p->requires_grad) return {};
    return p->grad_buffer();
}

const std::vector<double>& pval(Node& self, std::size_t i) { return self.parents[i]->value; }

void check_defined(const Tensor& t, const char* op) {
    if (!(t.defined())) fail(ErrorKind::kContract, std::string(op) + ": undefined input");
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    check_defined(a, op);
    check_defined(b, op);
    if (!(a.shape() == b.shape())) fail(ErrorKind::kDimension, std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void check_matrix(const Tensor& t, const char* op) {
    check_defined(t, op);
    if (!(t.dim() == 2)) fail(ErrorKind::kDimension, std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
    return make_result(a.shape(), std::move(out), {&a, &b}, "add", [](Node& self) {
        for (std::size_t p = 0; p < 2; ++p) {
            auto g = pgrad(self, p);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
    return make_result(a.shape(), std::move(out), {&a, &b}, "sub", [](Node& self) {
        auto ga = pgrad(self, 0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
        auto gb = pgrad(self, 1);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= self.grad[i];
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
    return make_result(a.shape(), std::move(out), {&a, &b}, "mul", [](Node& self) {
        const auto& av = pval(self, 0);
        const auto& bv = pval(self, 1);
        auto ga = pgrad(self, 0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * bv[i];
        auto gb = pgrad(self, 1);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += self.grad[i] * av[i];
    });
}

Tensor scale(const Tensor& x, double factor) {
    check_defined(x, "scale");
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) * factor;
    return make_result(x.shape(), std::move(out), {&x}, "scale", [factor](Node& self) {
        auto g = pgrad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    });
}

Tensor mul_scalar(const Tensor& x, const Tensor& s) {
    check_defined(x, "mul_scalar");
    check_defined(s, "mul_scalar");
    require(s.numel() == 1, ErrorKind::kDimension, "mul_scalar: factor must have one element");
    const double k = s.item();
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) * k;
    return make_result(x.shape(), std::move(out), {&x, &s}, "mul_scalar", [](Node& self) {
        const auto& xv = pval(self, 0);
        const double kk = pval(self, 1)[0];
        auto gx = pgrad(self, 0);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * kk;
        auto gs = pgrad(self, 1);
        if (!gs.empty()) {
            double acc = 0.0;
            for (std::size_t i = 0; i < xv.size(); ++i) acc += self.grad[i] * xv[i];
            gs[0] += acc;
        }
    });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    check_defined(x, "add_bias");
    check_defined(bias, "add_bias");
    const std::size_t c = x.cols();
    const std::size_t r = x.numel() / c;
    if (!(bias.numel() == c)) fail(ErrorKind::kDimension, "add_bias: bias " + shape_str(bias.shape()) + " does not match " + shape_str(x.shape()));
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x.at(i * c + j) + bias.at(j);
    return make_result(x.shape(), std::move(out), {&x, &bias}, "add_bias", [r, c](Node& self) {
        auto gx = pgrad(self, 0);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
        auto gb = pgrad(self, 1);
        if (!gb.empty())
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) gb[j] += self.grad[i * c + j];
    });
}

Tensor scale_rows(const Tensor& x, const Tensor& v) {
    check_defined(x, "scale_rows");
    check_defined(v, "scale_rows");
    const std::size_t c = x.cols();
    const std::size_t r = x.numel() / c;
    if (!(v.numel() == r)) fail(ErrorKind::kDimension, "scale_rows: factors " + shape_str(v.shape()) + " do not match rows of " + shape_str(x.shape()));
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x.at(i * c + j) * v.at(i);
    return make_result(x.shape(), std::move(out), {&x, &v}, "scale_rows", [r, c](Node& self) {
        const auto& xv = pval(self, 0);
        const auto& vv = pval(self, 1);
        auto gx = pgrad(self, 0);
        if (!gx.empty())
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += self.grad[i * c + j] * vv[i];
        auto gv = pgrad(self, 1);
        if (!gv.empty())
            for (std::size_t i = 0; i < r; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < c; ++j) acc += self.grad[i * c + j] * xv[i * c + j];
                gv[i] += acc;
            }
    });
}

Tensor add_row_offsets(const Tensor& x, const Tensor& v) {
    check_defined(x, "add_row_offsets");
    check_defined(v, "add_row_offsets");
    const std::size_t c = x.cols();
    const std::size_t r = x.numel() / c;
    if (!(v.numel() == r)) fail(ErrorKind::kDimension, "add_row_offsets: offsets " + shape_str(v.shape()) + " do not match rows of " + shape_str(x.shape()));
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x.at(i * c + j) + v.at(i);
    return make_result(x.shape(), std::move(out), {&x, &v}, "add_row_offsets", [r, c](Node& self) {
        auto gx = pgrad(self, 0);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
        auto gv = pgrad(self, 1);
        if (!gv.empty())
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) gv[i] += self.grad[i * c + j];
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_matrix(a, "matmul");
    check_matrix(b, "matmul");
    const std::size_t p = a.extent(0), q = a.extent(1), r = b.extent(1);
    if (!(b.extent(0) == q)) fail(ErrorKind::kDimension, "matmul: inner extents differ for " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    std::vector<double> out(p * r, 0.0);
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < p; ++i) {
        double* orow = &out[i * r];
        for (std::size_t k = 0; k < q; ++k) {
            const double aik = av[i * q + k];
            if (aik == 0.0) continue;
            const double* brow = &bv[k * r];
            for (std::size_t j = 0; j < r; ++j) orow[j] += aik * brow[j];
        }
    }
    return make_result({p, r}, std::move(out), {&a, &b}, "matmul", [p, q, r](Node& self) {
        const auto& A = pval(self, 0);
        const auto& B = pval(self, 1);
        const auto& G = self.grad;
        const double fault = debug::backward_fault() == debug::BackwardFault::kMatmul ? 1.05 : 1.0;
        auto ga = pgrad(self, 0);
        if (!ga.empty())
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t k = 0; k < q; ++k) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < r; ++j) acc += G[i * r + j] * B[k * r + j];
                    ga[i * q + k] += acc * fault;
                }
        auto gb = pgrad(self, 1);
        if (!gb.empty())
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t k = 0; k < q; ++k) {
                    const double aik = A[i * q + k];
                    if (aik == 0.0) continue;
                    for (std::size_t j = 0; j < r; ++j) gb[k * r + j] += aik * G[i * r + j];
                }
    });
}

Tensor transpose(const Tensor& x) {
    check_matrix(x, "transpose");
    const std::size_t r = x.extent(0), c = x.extent(1);
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x.at(i * c + j);
    return make_result({c, r}, std::move(out), {&x}, "transpose", [r, c](Node& self) {
        auto g = pgrad(self, 0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    check_defined(x, "reshape");
    if (!(shape_numel(shape) == x.numel())) fail(ErrorKind::kDimension, "reshape: " + shape_str(x.shape()) + " cannot become " + shape_str(shape));
    std::vector<double> out(x.values().begin(), x.values().end());
    return make_result(std::move(shape), std::move(out), {&x}, "reshape", [](Node& self) {
        auto g = pgrad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    require(!parts.empty(), ErrorKind::kDimension, "concat_rows: no inputs");
    const std::size_t c = parts.front().cols();
    std::size_t total = 0;
    std::vector<std::size_t> offsets;
    for (const auto& t : parts) {
        check_defined(t, "concat_rows");
        if (!(t.cols() == c)) fail(ErrorKind::kDimension, "concat_rows: column mismatch " + shape_str(parts.front().shape()) + " vs " + shape_str(t.shape()));
        offsets.push_back(total);
        total += t.numel();
    }
    std::vector<double> out;
    out.reserve(total);
    for (const auto& t : parts) out.insert(out.end(), t.values().begin(), t.values().end());
    return make_result({total / c, c}, std::move(out), parts, "concat_rows", [offsets](Node& self) {
        for (std::size_t p = 0; p < offsets.size(); ++p) {
            auto g = pgrad(self, p);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offsets[p] + i];
        }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    require(!parts.empty(), ErrorKind::kDimension, "concat_cols: no inputs");
    const std::size_t r = parts.front().rows();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& t : parts) {
        check_defined(t, "concat_cols");
        if (!(t.rows() == r)) fail(ErrorKind::kDimension, "concat_cols: row mismatch " + shape_str(parts.front().shape()) + " vs " + shape_str(t.shape()));
        widths.push_back(t.cols());
        total += t.cols();
    }
    std::vector<double> out(r * total);
    std::size_t off = 0;
    for (const auto& t : parts) {
        const std::size_t w = t.cols();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j) out[i * total + off + j] = t.at(i * w + j);
        off += w;
    }
    return make_result({r, total}, std::move(out), parts, "concat_cols", [widths, r, total](Node& self) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < widths.size(); ++p) {
            auto g = pgrad(self, p);
            const std::size_t w = widths[p];
            if (!g.empty())
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < w; ++j) g[i * w + j] += self.grad[i * total + off + j];
            off += w;
        }
    });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
    check_defined(x, "slice_rows");
    const std::size_t c = x.cols();
    const std::size_t r = x.numel() / c;
    if (!(count > 0 && begin + count <= r)) fail(ErrorKind::kDimension, "slice_rows: [" + std::to_string(begin) + ", +" + std::to_string(count) + ") out of " + shape_str(x.shape()));
    std::vector<double> out(x.values().begin() + begin * c, x.values().begin() + (begin + count) * c);
    return make_result({count, c}, std::move(out), {&x}, "slice_rows", [begin, c](Node& self) {
        auto g = pgrad(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * c + i] += self.grad[i];
    });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
    check_defined(x, "slice_cols");
    const std::size_t c = x.cols();
    const std::size_t r = x.numel() / c;
    if (!(count > 0 && begin + count <= c)) fail(ErrorKind::kDimension, "slice_cols: [" + std::to_string(begin) + ", +" + std::to_string(count) + ") out of " + shape_str(x.shape()));
    std::vector<double> out(r * count);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < count; ++j) out[i * count + j] = x.at(i * c + begin + j);
    return make_result({r, count}, std::move(out), {&x}, "slice_cols", [r, c, begin, count](Node& self) {
        auto g = pgrad(self, 0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < count; ++j) g[i * c + begin + j] += self.grad[i * count + j];
    });
}

Tensor softmax_rows(const Tensor& x) {
    check_defined(x, "softmax_rows");
    const std::size_t c = x.cols();
    const std::size_t r = x.numel() / c;
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < r; ++i) {
        const double* in = &x.values()[i * c];
        double* o = &out[i * c];
        const double mx = *std::max_element(in, in + c);
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) total += (o[j] = std::exp(in[j] - mx));
        for (std::size_t j = 0; j < c; ++j) o[j] /= total;
    }
    return make_result(x.shape(), std::move(out), {&x}, "softmax_rows", [r, c](Node& self) {
        auto g = pgrad(self, 0);
        const auto& y = self.value;
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += self.grad[i * c + j] * y[i * c + j];
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += y[i * c + j] * (self.grad[i * c + j] - dot);
        }
    });
}

Tensor log_softmax_rows(const Tensor& x) {
    check_defined(x, "log_softmax_rows");
    const std::size_t c = x.cols();
    const std::size_t r = x.numel() / c;
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < r; ++i) {
        const double* in = &x.values()[i * c];
        const double mx = *std::max_element(in, in + c);
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) total += std::exp(in[j] - mx);
        const double lse = mx + std::log(total);
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = in[j] - lse;
    }
    return make_result(x.shape(), std::move(out), {&x}, "log_softmax_rows", [r, c](Node& self) {
        auto g = pgrad(self, 0);
        for (std::size_t i = 0; i < r; ++i) {
            double total = 0.0;
            for (std::size_t j = 0; j < c; ++j) total += self.grad[i * c + j];
            for (std::size_t j = 0; j < c; ++j)
                g[i * c + j] += self.grad[i * c + j] - std::exp(self.value[i * c + j]) * total;
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    check_defined(x, "layer_norm");
    const std::size_t c = x.cols();
    const std::size_t r = x.numel() / c;
    if (gamma.defined())
        if (!(gamma.numel() == c)) fail(ErrorKind::kDimension, "layer_norm: gamma does not match " + shape_str(x.shape()));
    if (beta.defined())
        if (!(beta.numel() == c)) fail(ErrorKind::kDimension, "layer_norm: beta does not match " + shape_str(x.shape()));
    std::vector<double> xhat(x.numel());
    std::vector<double> inv_std(r);
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < r; ++i) {
        const double* in = &x.values()[i * c];
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += in[j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) var += (in[j] - mu) * (in[j] - mu);
        var /= static_cast<double>(c);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j) {
            const double h = (in[j] - mu) * inv_std[i];
            xhat[i * c + j] = h;
            double y = h;
            if (gamma.defined()) y *= gamma.at(j);
            if (beta.defined()) y += beta.at(j);
            out[i * c + j] = y;
        }
    }
    return make_result(
        x.shape(), std::move(out), {&x, &gamma, &beta}, "layer_norm",
        [r, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
            const Node* gnode = self.parents[1].get();
            auto gx = pgrad(self, 0);
            auto gg = pgrad(self, 1);
            auto gb = pgrad(self, 2);
            const double fault = debug::backward_fault() == debug::BackwardFault::kLayerNorm ? 1.05 : 1.0;
            std::vector<double> dxhat(c);
            for (std::size_t i = 0; i < r; ++i) {
                double mean_d = 0.0, mean_dx = 0.0;
                for (std::size_t j = 0; j < c; ++j) {
                    const double dy = self.grad[i * c + j];
                    dxhat[j] = gnode ? dy * gnode->value[j] : dy;
                    mean_d += dxhat[j];
                    mean_dx += dxhat[j] * xhat[i * c + j];
                    if (!gg.empty()) gg[j] += dy * xhat[i * c + j];
                    if (!gb.empty()) gb[j] += dy;
                }
                mean_d /= static_cast<double>(c);
                mean_dx /= static_cast<double>(c);
                if (!gx.empty())
                    for (std::size_t j = 0; j < c; ++j)
                        gx[i * c + j] += fault * inv_std[i] * (dxhat[j] - mean_d - xhat[i * c + j] * mean_dx);
            }
        });
}

Tensor gelu(const Tensor& x) {
    check_defined(x, "gelu");
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = x.at(i);
        out[i] = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
    }
    return make_result(x.shape(), std::move(out), {&x}, "gelu", [](Node& self) {
        const auto& xv = pval(self, 0);
        auto g = pgrad(self, 0);
        const double fault = debug::backward_fault() == debug::BackwardFault::kGelu ? 1.05 : 1.0;
        const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = xv[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
            g[i] += fault * self.grad[i] * (cdf + v * pdf);
        }
    });
}

Tensor exp(const Tensor& x) {
    check_defined(x, "exp");
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x.at(i));
    return make_result(x.shape(), std::move(out), {&x}, "exp", [](Node& self) {
        auto g = pgrad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * self.value[i];
    });
}

Tensor log(const Tensor& x) {
    check_defined(x, "log");
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        require(x.at(i) > 0.0, ErrorKind::kDomain, "log of non-positive value");
        out[i] = std::log(x.at(i));
    }
    return make_result(x.shape(), std::move(out), {&x}, "log", [](Node& self) {
        const auto& xv = pval(self, 0);
        auto g = pgrad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / xv[i];
    });
}

Tensor clamp_max(const Tensor& x, double limit) {
    check_defined(x, "clamp_max");
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(x.at(i), limit);
    return make_result(x.shape(), std::move(out), {&x}, "clamp_max", [limit](Node& self) {
        const auto& xv = pval(self, 0);
        auto g = pgrad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (xv[i] < limit) g[i] += self.grad[i];
    });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) {
    check_defined(x, "conv2d");
    check_defined(w, "conv2d");
    if (!(x.dim() == 3)) fail(ErrorKind::kDimension, "conv2d: input must be C×H×W, got " + shape_str(x.shape()));
    if (!(w.dim() == 4)) fail(ErrorKind::kDimension, "conv2d: kernel must be O×C×k×k, got " + shape_str(w.shape()));
    const std::size_t C = x.extent(0), H = x.extent(1), W = x.extent(2);
    const std::size_t O = w.extent(0), K = w.extent(2);
    if (!(w.extent(1) == C && w.extent(3) == K)) fail(ErrorKind::kDimension, "conv2d: kernel " + shape_str(w.shape()) + " incompatible with input " + shape_str(x.shape()));
    require(stride >= 1, ErrorKind::kDimension, "conv2d: stride must be positive");
    require(H + 2 * pad >= K && W + 2 * pad >= K, ErrorKind::kDimension, "conv2d: kernel larger than padded input");
    if (b.defined()) require(b.numel() == O, ErrorKind::kDimension, "conv2d: bias does not match output channels");
    const std::size_t Ho = (H + 2 * pad - K) / stride + 1;
    const std::size_t Wo = (W + 2 * pad - K) / stride + 1;
    std::vector<double> out(O * Ho * Wo, 0.0);
    const auto xv = x.values();
    const auto wv = w.values();
    for (std::size_t o = 0; o < O; ++o) {
        const double bias = b.defined() ? b.at(o) : 0.0;
        for (std::size_t oy = 0; oy < Ho; ++oy)
            for (std::size_t ox = 0; ox < Wo; ++ox) {
                double acc = bias;
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t ky = 0; ky < K; ++ky) {
                        const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                        for (std::size_t kx = 0; kx < K; ++kx) {
                            const auto ix =
                                static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                            acc += wv[((o * C + c) * K + ky) * K + kx] * xv[(c * H + iy) * W + ix];
                        }
                    }
                out[(o * Ho + oy) * Wo + ox] = acc;
            }
    }
    return make_result({O, Ho, Wo}, std::move(out), {&x, &w, &b}, "conv2d",
                       [C, H, W, O, K, Ho, Wo, stride, pad](Node& self) {
                           const auto& xv = pval(self, 0);
                           const auto& wv = pval(self, 1);
                           auto gx = pgrad(self, 0);
                           auto gw = pgrad(self, 1);
                           auto gb = pgrad(self, 2);
                           for (std::size_t o = 0; o < O; ++o)
                               for (std::size_t oy = 0; oy < Ho; ++oy)
                                   for (std::size_t ox = 0; ox < Wo; ++ox) {
                                       const double d = self.grad[(o * Ho + oy) * Wo + ox];
                                       if (!gb.empty()) gb[o] += d;
                                       if (d == 0.0) continue;
                                       for (std::size_t c = 0; c < C; ++c)
                                           for (std::size_t ky = 0; ky < K; ++ky) {
                                               const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                                               static_cast<std::ptrdiff_t>(pad);
                                               if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                                               for (std::size_t kx = 0; kx < K; ++kx) {
                                                   const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                                                   static_cast<std::ptrdiff_t>(pad);
                                                   if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                                                   const std::size_t wi = ((o * C + c) * K + ky) * K + kx;
                                                   const std::size_t xi = (c * H + iy) * W + ix;
                                                   if (!gw.empty()) gw[wi] += d * xv[xi];
                                                   if (!gx.empty()) gx[xi] += d * wv[wi];
                                               }
                                           }
                                   }
                       });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
    check_matrix(table, "embedding");
    const std::size_t V = table.extent(0), s = table.extent(1);
    require(!ids.empty(), ErrorKind::kDimension, "embedding: no ids");
    std::vector<int> idv(ids.begin(), ids.end());
    std::vector<double> out(idv.size() * s);
    for (std::size_t i = 0; i < idv.size(); ++i) {
        if (!(idv[i] >= 0 && static_cast<std::size_t>(idv[i]) < V)) fail(ErrorKind::kDimension, "embedding: id " + std::to_string(idv[i]) + " outside table of " + std::to_string(V));
        std::copy_n(&table.values()[idv[i] * s], s, &out[i * s]);
    }
    return make_result({idv.size(), s}, std::move(out), {&table}, "embedding", [idv, s](Node& self) {
        auto g = pgrad(self, 0);
        for (std::size_t i = 0; i < idv.size(); ++i)
            for (std::size_t j = 0; j < s; ++j) g[idv[i] * s + j] += self.grad[i * s + j];
    });
}

Tensor l2_normalize_rows(const Tensor& x, double eps) {
    check_defined(x, "l2_normalize_rows");
    const std::size_t c = x.cols();
    const std::size_t r = x.numel() / c;
    std::vector<double> norms(r);
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < r; ++i) {
        double ss = 0.0;
        for (std::size_t j = 0; j < c; ++j) ss += x.at(i * c + j) * x.at(i * c + j);
        norms[i] = std::max(std::sqrt(ss), eps);
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x.at(i * c + j) / norms[i];
    }
    return make_result(x.shape(), std::move(out), {&x}, "l2_normalize_rows", [r, c, norms](Node& self) {
        auto g = pgrad(self, 0);
        const auto& y = self.value;
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += self.grad[i * c + j] * y[i * c + j];
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += (self.grad[i * c + j] - y[i * c + j] * dot) / norms[i];
        }
    });
}

Tensor cross_entropy_logits(const Tensor& logits, std::span<const int> labels) {
    check_defined(logits, "cross_entropy_logits");
    const std::size_t c = logits.cols();
    const std::size_t r = logits.numel() / c;
    require(labels.size() == r, ErrorKind::kDimension, "cross_entropy_logits: label count does not match rows");
    std::vector<int> lab(labels.begin(), labels.end());
    std::vector<double> probs(logits.numel());
    double loss = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        if (!(lab[i] >= 0 && static_cast<std::size_t>(lab[i]) < c)) fail(ErrorKind::kData, "cross_entropy_logits: label " + std::to_string(lab[i]) + " outside 0.." + std::to_string(c - 1));
        const double* in = &logits.values()[i * c];
        const double mx = *std::max_element(in, in + c);
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) total += (probs[i * c + j] = std::exp(in[j] - mx));
        for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= total;
        loss += mx + std::log(total) - in[lab[i]];
    }
    loss /= static_cast<double>(r);
    return make_result({1}, {loss}, {&logits}, "cross_entropy_logits",
                       [r, c, lab, probs = std::move(probs)](Node& self) {
                           auto g = pgrad(self, 0);
                           const double k = self.grad[0] / static_cast<double>(r);
                           for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < c; ++j)
                                   g[i * c + j] += k * (probs[i * c + j] - (static_cast<int>(j) == lab[i] ? 1.0 : 0.0));
                       });
}

Tensor nll_from_probs(const Tensor& probs, std::span<const int> labels) {
    check_defined(probs, "nll_from_probs");
    const std::size_t c = probs.cols();
    const std::size_t r = probs.numel() / c;
    require(labels.size() == r, ErrorKind::kDimension, "nll_from_probs: label count does not match rows");
    std::vector<int> lab(labels.begin(), labels.end());
    double loss = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        if (!(lab[i] >= 0 && static_cast<std::size_t>(lab[i]) < c)) fail(ErrorKind::kData, "nll_from_probs: label " + std::to_string(lab[i]) + " outside 0.." + std::to_string(c - 1));
        const double p = probs.at(i * c + lab[i]);
        require(p > 0.0, ErrorKind::kDomain, "nll_from_probs: zero probability on the true class");
        loss -= std::log(p);
    }
    loss /= static_cast<double>(r);
    return make_result({1}, {loss}, {&probs}, "nll_from_probs", [r, c, lab](Node& self) {
        const auto& pv = pval(self, 0);
        auto g = pgrad(self, 0);
        const double k = self.grad[0] / static_cast<double>(r);
        for (std::size_t i = 0; i < r; ++i) g[i * c + lab[i]] -= k / pv[i * c + lab[i]];
    });
}

Tensor sum(const Tensor& x) {
    check_defined(x, "sum");
    double total = 0.0;
    for (double v : x.values()) total += v;
    return make_result({1}, {total}, {&x}, "sum", [](Node& self) {
        auto g = pgrad(self, 0);
        for (auto& v : g) v += self.grad[0];
    });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

}  // namespace gazeclip::ag

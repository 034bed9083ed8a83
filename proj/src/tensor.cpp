#include "gazeclip/tensor.hpp"

#include <atomic>
#include <sstream>
#include <unordered_set>

#include "gazeclip/errors.hpp"

namespace gazeclip::ag {

namespace {
std::atomic<Precision> g_precision{Precision::kF32};
thread_local bool t_grad_enabled = true;
}  // namespace

void set_precision(Precision precision) { g_precision.store(precision); }
Precision precision() { return g_precision.load(); }

double quantize(double value) {
    if (g_precision.load(std::memory_order_relaxed) == Precision::kF32) {
        return static_cast<double>(static_cast<float>(value));
    }
    return value;
}

void quantize_all(std::span<double> values) {
    if (g_precision.load(std::memory_order_relaxed) != Precision::kF32) return;
    for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
}

NoGradGuard::NoGradGuard() : saved_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = saved_; }
bool grad_enabled() { return t_grad_enabled; }

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ',';
        out << shape[i];
    }
    out << ')';
    return out.str();
}

std::span<double> Node::grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const auto n = shape_numel(shape);
    return from_values(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
    for (auto e : shape) if (!(e > 0)) fail(ErrorKind::kDimension, "zero extent in shape " + shape_str(shape));
    if (!(shape_numel(shape) == values.size())) fail(ErrorKind::kDimension, "shape " + shape_str(shape) + " does not match " + std::to_string(values.size()) + " values");
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
    return from_values({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_values({1}, {value}, requires_grad); }

void undefined_tensor() { fail(ErrorKind::kContract, "use of undefined tensor"); }

std::size_t Tensor::extent(std::size_t axis) const {
    if (axis >= dim()) fail(ErrorKind::kDimension, "axis out of range for shape " + shape_str(shape()));
    return shape()[axis];
}

std::size_t Tensor::numel() const { return node_ ? node_->value.size() : 0; }

std::size_t Tensor::rows() const { return dim() >= 2 ? numel() / cols() : 1; }
std::size_t Tensor::cols() const { return shape().back(); }

std::span<double> Tensor::values_mut() {
    require(defined(), ErrorKind::kContract, "use of undefined tensor");
    return node_->value;
}

double Tensor::item() const {
    if (!(numel() == 1)) fail(ErrorKind::kContract, "item() on non-scalar tensor " + shape_str(shape()));
    return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
void Tensor::set_requires_grad(bool flag) { node_->requires_grad = flag; }
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::grad_mut() { return node_->grad_buffer(); }
void Tensor::zero_grad() {
    if (node_) node_->grad.clear();
}

void Tensor::backward() const {
    require(defined(), ErrorKind::kContract, "backward on undefined tensor");
    if (!(numel() == 1)) fail(ErrorKind::kContract, "backward requires a scalar root, got " + shape_str(shape()));
    if (!node_->requires_grad) return;

    // Iterative post-order DFS gives a topological order (parents first).
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent && parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    node_->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward && !node->grad.empty()) node->backward(*node);
    }
}

Tensor Tensor::detach() const { return from_values(shape(), node_->value, false); }

}  // namespace gazeclip::ag

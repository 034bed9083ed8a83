#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gazeclip::ag {

/// Storage precision of forward values. Values are held as doubles; in kF32
/// mode every op output and every optimizer update is rounded to the nearest
/// float, so tensors only ever contain float-representable numbers.
enum class Precision { kF32, kF64 };

void set_precision(Precision precision);
Precision precision();
double quantize(double value);
void quantize_all(std::span<double> values);

class PrecisionScope {
public:
    explicit PrecisionScope(Precision precision) : saved_(ag::precision()) { set_precision(precision); }
    ~PrecisionScope() { set_precision(saved_); }
    PrecisionScope(const PrecisionScope&) = delete;
    PrecisionScope& operator=(const PrecisionScope&) = delete;

private:
    Precision saved_;
};

/// Disables graph recording on the current thread (inference).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool saved_;
};
bool grad_enabled();

using Shape = std::vector<std::size_t>;
std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until a gradient reaches this node
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    /// Gradient buffer, zero-allocated on first use.
    std::span<double> grad_buffer();
};

[[noreturn]] void undefined_tensor();

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const {
        if (!node_) undefined_tensor();
        return node_->shape;
    }
    std::size_t dim() const { return shape().size(); }
    std::size_t extent(std::size_t axis) const;
    std::size_t numel() const;
    /// Leading extent of a matrix (1 for vectors).
    std::size_t rows() const;
    /// Trailing extent.
    std::size_t cols() const;

    std::span<const double> values() const {
        if (!node_) undefined_tensor();
        return node_->value;
    }
    /// Direct write access; only meaningful on leaves (init, load, optimizer).
    std::span<double> values_mut();
    double item() const;
    double at(std::size_t i) const { return values()[i]; }
    double at(std::size_t r, std::size_t c) const { return values()[r * cols() + c]; }

    bool requires_grad() const;
    void set_requires_grad(bool flag);
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> grad_mut();
    void zero_grad();

    /// Reverse-mode accumulation from a scalar root.
    void backward() const;

    /// Same values, no graph history.
    Tensor detach() const;

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

}  // namespace gazeclip::ag

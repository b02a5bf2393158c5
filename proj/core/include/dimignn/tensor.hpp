#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace dimignn {

/// Row-major extents. Every extent must be positive.
using Shape = std::vector<int>;

std::string shape_to_string(const Shape& s);
std::int64_t shape_numel(const Shape& s);

/// Operand shapes do not conform to an op's broadcasting/contraction rule.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An op produced (or was fed) a non-finite value. Forward passes abort
/// rather than letting NaN/Inf propagate silently.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {
struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;   // empty until backward touches it
    bool requires_grad = false;
};
} // namespace detail

/**
 * Dense double-precision tensor with an optional gradient slot.
 *
 * Tensor is a cheap handle: copies share the underlying storage, so the
 * tensor a ParamStore hands out and the one an optimizer updates are the
 * same object. Ops executed while a Tape is active record themselves so
 * Tape::backward can populate gradients in reverse order.
 */
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);  // shape {1}

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }

    const std::vector<double>& values() const { return node_->value; }
    /// Direct write access, for initialization and finite-difference probes.
    /// Must not be used on intermediates of a taped forward pass.
    std::vector<double>& mutable_values() { return node_->value; }

    double at(const std::vector<int>& index) const;
    double scalar_value() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool b) { node_->requires_grad = b; }
    bool has_grad() const { return !node_->grad.empty(); }
    const std::vector<double>& grad() const { return node_->grad; }
    void zero_grad() { node_->grad.clear(); }

    /// Value copy with no gradient tracking.
    Tensor detached() const;

    std::shared_ptr<detail::TensorNode> node() const { return node_; }

private:
    std::shared_ptr<detail::TensorNode> node_;
};

/**
 * Reverse-mode tape for one forward pass.
 *
 * Construct a Tape, run the forward ops, call backward(loss) once; the
 * tape clears itself afterwards. Tapes are thread-local: independent
 * workers may each run their own pass concurrently.
 */
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active() noexcept;

    void record(std::function<void()> backward_step);
    std::size_t size() const noexcept { return entries_.size(); }

    /// Seeds d(loss)/d(loss)=1 and walks the tape in reverse, accumulating
    /// gradients additively into every requires_grad tensor reachable from
    /// loss. The loss must be scalar-shaped (one element).
    void backward(const Tensor& loss);

private:
    std::vector<std::function<void()>> entries_;
    Tape* prev_ = nullptr;
};

// ---------------------------------------------------------------------------
// Differentiable ops. Binary elementwise ops broadcast numpy-style
// (trailing alignment; extents must match or be 1).
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

/// Matrix product. Accepted forms:
///   [m,k] x [k,n]                    plain
///   [B...,m,k] x [B...,k,n]          batched, equal batch extents
///   [...,k]    x [k,n]               linear map over the last axis
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double negative_slope = 0.01);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);

/// Numerically stable softmax over the last axis.
Tensor softmax_lastdim(const Tensor& x);

/// Mean over one axis. keepdim retains the axis with extent 1 so the
/// result broadcasts against the input. Reducing a rank-1 tensor yields
/// shape {1}.
Tensor mean_axis(const Tensor& x, int axis, bool keepdim = false);
Tensor sum_all(const Tensor& x);   // shape {1}
Tensor mean_all(const Tensor& x);  // shape {1}

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, int start, int length);

/// Axis permutation; perm must be a permutation of [0, rank).
Tensor transpose(const Tensor& x, const std::vector<int>& perm);

Tensor reshape(const Tensor& x, Shape shape);

/// Multiply by a compile-side constant (no learnable operand).
Tensor scale(const Tensor& x, double c);

/// Gather along an axis with an integer index grid. The axis is replaced
/// by the grid's dimensions:
///   x:[pre,E,post], indices index_shape=[g...] -> out:[pre,g...,post]
/// Backward scatter-adds, so repeated indices accumulate.
Tensor take(const Tensor& x, int axis, const std::vector<int>& indices,
            const Shape& index_shape);

/// x @ w + b with w:[in,out] applied over the last axis of x.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// ---------------------------------------------------------------------------
// Generic dispatch surface over the named op set.
// ---------------------------------------------------------------------------

enum class OpKind {
    Add, Sub, Mul, MatMul, Tanh, Relu, Exp, Log,
    SoftmaxLastDim, MeanAxis, Concat, Slice, Transpose, LeakyRelu,
};

const char* op_kind_name(OpKind k);

struct OpArgs {
    int axis = 0;
    int start = 0;
    int length = 0;
    std::vector<int> perm;
    double negative_slope = 0.01;
};

Tensor forward_op(OpKind kind, const std::vector<Tensor>& inputs, const OpArgs& args = {});

} // namespace dimignn

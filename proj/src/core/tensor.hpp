#pragma once

// Dense row-major float64 tensors with tape-based reverse-mode autodiff.
//
// Operations record a backward closure on the active Tape (see TapeScope)
// whenever at least one input requires a gradient. Without an active tape,
// operations are plain forward evaluations and produce constant tensors.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pg {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty unless requires_grad
    bool requires_grad = false;
};

class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor filled(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                         bool requires_grad = false);

    bool defined() const noexcept { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t numel() const { return impl_->data.size(); }
    // Leading extent and product of the remaining extents.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> data() const { return impl_->data; }
    std::span<double> mutable_data() { return impl_->data; }
    std::span<const double> grad() const { return impl_->grad; }
    std::span<double> mutable_grad() { return impl_->grad; }
    double item() const;

    bool requires_grad() const noexcept { return impl_ && impl_->requires_grad; }
    void set_requires_grad(bool on);
    void zero_grad();

    // Deep copy detached from any tape.
    Tensor clone() const;

    TensorImpl* impl() const noexcept { return impl_.get(); }
    const std::shared_ptr<TensorImpl>& handle() const noexcept { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// Ordered record of executed differentiable operations.
class Tape {
public:
    using Backward = std::function<void()>;

    void record(Backward fn) { ops_.push_back(std::move(fn)); }
    std::size_t size() const noexcept { return ops_.size(); }
    void clear() noexcept { ops_.clear(); }

    // Seeds d(root)/d(root) = 1, runs every recorded closure once in reverse
    // order, then empties the tape. Leaf gradients accumulate.
    void backward(const Tensor& root);

    static Tape* active() noexcept;

private:
    friend class TapeScope;
    std::vector<Backward> ops_;
};

class TapeScope {
public:
    explicit TapeScope(Tape& tape) noexcept;
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

namespace detail {
// Allocates an output tensor. It requires grad iff a tape is active and any
// input requires grad; in that case the caller must record a closure.
Tensor make_output(Shape shape, std::initializer_list<const Tensor*> inputs);
void accumulate(TensorImpl& target, std::span<const double> delta);
}  // namespace detail

// ---- operations -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// b may have a.shape() or be a bias vector ({n} or {1,n}) broadcast over rows.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor gelu(const Tensor& a);

// Scalar tanh-approximation GELU used by gelu().
double gelu_scalar(double x) noexcept;

Tensor softmax(const Tensor& x, int axis = -1);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double epsilon = 1e-5);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// 2-D block helpers used to build multi-head attention.
Tensor slice(const Tensor& x, std::size_t row0, std::size_t nrows, std::size_t col0, std::size_t ncols);
Tensor blocks(const std::vector<std::vector<Tensor>>& grid);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);

// ---- optimizer ------------------------------------------------------------

struct AdamWConfig {
    double learning_rate = 1.5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
};

struct AdamWState {
    AdamWConfig config;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::uint64_t step = 0;

    static AdamWState zeros_like(std::span<const Tensor> params, const AdamWConfig& config);
};

// Decoupled weight decay, then the bias-corrected Adam update, using each
// parameter's accumulated gradient.
void adamw_step(std::span<Tensor> params, AdamWState& state);
void adamw_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, AdamWState& state);

}  // namespace pg

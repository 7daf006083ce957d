#include "core/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "core/error.hpp"

namespace pg {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(std::span<const double> data, std::size_t rows, std::size_t cols) {
    return ConstMap(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MutMap as_matrix(std::span<double> data, std::size_t rows, std::size_t cols) {
    return MutMap(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

thread_local Tape* g_active_tape = nullptr;

void require_2d(const Tensor& t, const char* op) {
    require(t.defined() && t.rank() == 2, ErrorKind::Dimension,
            std::string(op) + ": expected a 2-D tensor, got " +
                (t.defined() ? shape_str(t.shape()) : std::string("undefined")));
}

bool is_bias_for(const Tensor& a, const Tensor& b) {
    if (a.rank() < 1 || a.shape() == b.shape()) return false;
    const std::size_t n = a.shape().back();
    if (b.rank() == 1) return b.shape()[0] == n;
    return b.rank() == 2 && b.shape()[0] == 1 && b.shape()[1] == n;
}

void record(std::function<void()> fn) {
    Tape* tape = Tape::active();
    tape->record(std::move(fn));
}

// Shared implementation of add/sub with optional row-broadcast of b.
Tensor add_impl(const Tensor& a, const Tensor& b, double sign, const char* name) {
    require(a.defined() && b.defined(), ErrorKind::Contract, std::string(name) + ": undefined operand");
    const bool same = a.shape() == b.shape();
    const bool bias = !same && is_bias_for(a, b);
    require(same || bias, ErrorKind::Dimension,
            std::string(name) + ": incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));

    Tensor out = detail::make_output(a.shape(), {&a, &b});
    auto y = out.mutable_data();
    auto x = a.data();
    auto z = b.data();
    if (same) {
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + sign * z[i];
    } else {
        const std::size_t n = z.size();
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + sign * z[i % n];
    }

    if (out.requires_grad()) {
        record([ai = a.handle(), bi = b.handle(), oi = out.handle(), sign, same] {
            const auto& g = oi->grad;
            if (ai->requires_grad) detail::accumulate(*ai, g);
            if (bi->requires_grad) {
                auto& gb = bi->grad;
                if (same) {
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
                } else {
                    const std::size_t n = gb.size();
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += sign * g[i];
                }
            }
        });
    }
    return out;
}

}  // namespace

// ---- Tensor ---------------------------------------------------------------

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
    require(shape_numel(shape) == data.size(), ErrorKind::Dimension,
            "tensor: shape " + shape_str(shape) + " does not match " + std::to_string(data.size()) + " values");
    impl_ = std::make_shared<TensorImpl>();
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    set_requires_grad(requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return filled(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({}, {value}, requires_grad); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data, bool requires_grad) {
    return Tensor({rows, cols}, std::move(data), requires_grad);
}

std::size_t Tensor::rows() const {
    if (rank() < 2) return 1;
    return shape()[0];
}

std::size_t Tensor::cols() const {
    const std::size_t r = rows();
    return r == 0 ? 0 : numel() / r;
}

double Tensor::item() const {
    require(numel() == 1, ErrorKind::Contract, "item: tensor of shape " + shape_str(shape()) + " is not a scalar");
    return impl_->data[0];
}

void Tensor::set_requires_grad(bool on) {
    impl_->requires_grad = on;
    if (on) {
        impl_->grad.assign(impl_->data.size(), 0.0);
    } else {
        impl_->grad.clear();
    }
}

void Tensor::zero_grad() {
    if (impl_->requires_grad) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const { return Tensor(impl_->shape, impl_->data, impl_->requires_grad); }

// ---- Tape -------------------------------------------------------------------

Tape* Tape::active() noexcept { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) noexcept : previous_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = previous_; }

void Tape::backward(const Tensor& root) {
    require(root.defined() && root.numel() == 1, ErrorKind::Contract,
            "backward: root must be scalar-shaped, got " + (root.defined() ? shape_str(root.shape()) : "undefined"));
    require(root.requires_grad(), ErrorKind::Contract, "backward: root does not depend on any recorded operation");
    root.impl()->grad[0] += 1.0;
    // Pop as we go so each closure runs exactly once even if one throws.
    while (!ops_.empty()) {
        Backward fn = std::move(ops_.back());
        ops_.pop_back();
        fn();
    }
}

namespace detail {

Tensor make_output(Shape shape, std::initializer_list<const Tensor*> inputs) {
    bool needs = false;
    if (Tape::active() != nullptr) {
        for (const Tensor* t : inputs) needs = needs || t->requires_grad();
    }
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), needs);
}

void accumulate(TensorImpl& target, std::span<const double> delta) {
    for (std::size_t i = 0; i < delta.size(); ++i) target.grad[i] += delta[i];
}

}  // namespace detail

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    require(b.shape()[0] == k, ErrorKind::Dimension,
            "matmul: inner dimensions disagree: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));

    Tensor out = detail::make_output({m, n}, {&a, &b});
    as_matrix(out.mutable_data(), m, n).noalias() = as_matrix(a.data(), m, k) * as_matrix(b.data(), k, n);

    if (out.requires_grad()) {
        record([ai = a.handle(), bi = b.handle(), oi = out.handle(), m, k, n] {
            auto g = as_matrix(std::span<const double>(oi->grad), m, n);
            if (ai->requires_grad) {
                as_matrix(std::span<double>(ai->grad), m, k).noalias() +=
                    g * as_matrix(std::span<const double>(bi->data), k, n).transpose();
            }
            if (bi->requires_grad) {
                as_matrix(std::span<double>(bi->grad), k, n).noalias() +=
                    as_matrix(std::span<const double>(ai->data), m, k).transpose() * g;
            }
        });
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    require_2d(a, "transpose");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    Tensor out = detail::make_output({n, m}, {&a});
    as_matrix(out.mutable_data(), n, m) = as_matrix(a.data(), m, n).transpose();
    if (out.requires_grad()) {
        record([ai = a.handle(), oi = out.handle(), m, n] {
            as_matrix(std::span<double>(ai->grad), m, n) +=
                as_matrix(std::span<const double>(oi->grad), n, m).transpose();
        });
    }
    return out;
}

// ---- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) { return add_impl(a, b, 1.0, "add"); }

Tensor sub(const Tensor& a, const Tensor& b) { return add_impl(a, b, -1.0, "sub"); }

Tensor mul(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), ErrorKind::Dimension,
            "mul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    Tensor out = detail::make_output(a.shape(), {&a, &b});
    auto y = out.mutable_data();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] * b.data()[i];
    if (out.requires_grad()) {
        record([ai = a.handle(), bi = b.handle(), oi = out.handle()] {
            const auto& g = oi->grad;
            if (ai->requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] * bi->data[i];
            if (bi->requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] += g[i] * ai->data[i];
        });
    }
    return out;
}

Tensor scale(const Tensor& a, double factor) {
    Tensor out = detail::make_output(a.shape(), {&a});
    auto y = out.mutable_data();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] * factor;
    if (out.requires_grad()) {
        record([ai = a.handle(), oi = out.handle(), factor] {
            const auto& g = oi->grad;
            for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] * factor;
        });
    }
    return out;
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

double gelu_scalar(double x) noexcept {
    return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

Tensor gelu(const Tensor& a) {
    Tensor out = detail::make_output(a.shape(), {&a});
    const bool keep = out.requires_grad();
    std::vector<double> th(keep ? a.numel() : 0);
    auto y = out.mutable_data();
    auto x = a.data();
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double t = std::tanh(kGeluC * (x[i] + kGeluA * x[i] * x[i] * x[i]));
        if (keep) th[i] = t;
        y[i] = 0.5 * x[i] * (1.0 + t);
    }
    if (keep) {
        record([ai = a.handle(), oi = out.handle(), th = std::move(th)] {
            const auto& g = oi->grad;
            const auto& x = ai->data;
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double t = th[i];
                const double d = 0.5 * (1.0 + t) +
                                 0.5 * x[i] * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x[i] * x[i]);
                ai->grad[i] += g[i] * d;
            }
        });
    }
    return out;
}

// ---- normalization --------------------------------------------------------

Tensor softmax(const Tensor& x, int axis) {
    const int rank = static_cast<int>(x.rank());
    const int ax = axis < 0 ? axis + rank : axis;
    require(ax >= 0 && ax < rank, ErrorKind::Contract,
            "softmax: axis " + std::to_string(axis) + " invalid for shape " + shape_str(x.shape()));
    const auto& s = x.shape();
    std::size_t outer = 1, inner = 1;
    for (int i = 0; i < ax; ++i) outer *= s[static_cast<std::size_t>(i)];
    for (int i = ax + 1; i < rank; ++i) inner *= s[static_cast<std::size_t>(i)];
    const std::size_t len = s[static_cast<std::size_t>(ax)];

    Tensor out = detail::make_output(s, {&x});
    auto in = x.data();
    auto y = out.mutable_data();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t j = 0; j < inner; ++j) {
            const std::size_t base = o * len * inner + j;
            double mx = in[base];
            for (std::size_t l = 1; l < len; ++l) mx = std::max(mx, in[base + l * inner]);
            double total = 0.0;
            for (std::size_t l = 0; l < len; ++l) {
                const double e = std::exp(in[base + l * inner] - mx);
                y[base + l * inner] = e;
                total += e;
            }
            for (std::size_t l = 0; l < len; ++l) y[base + l * inner] /= total;
        }
    }

    if (out.requires_grad()) {
        record([xi = x.handle(), oi = out.handle(), outer, inner, len] {
            const auto& g = oi->grad;
            const auto& p = oi->data;
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t j = 0; j < inner; ++j) {
                    const std::size_t base = o * len * inner + j;
                    double dot = 0.0;
                    for (std::size_t l = 0; l < len; ++l) dot += g[base + l * inner] * p[base + l * inner];
                    for (std::size_t l = 0; l < len; ++l) {
                        const std::size_t i = base + l * inner;
                        xi->grad[i] += p[i] * (g[i] - dot);
                    }
                }
            }
        });
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double epsilon) {
    require(x.rank() >= 1, ErrorKind::Dimension, "layer_norm: scalar input");
    const std::size_t n = x.shape().back();
    require(gain.numel() == n && bias.numel() == n, ErrorKind::Dimension,
            "layer_norm: gain/bias must have " + std::to_string(n) + " entries");
    const std::size_t rows = x.numel() / n;

    Tensor out = detail::make_output(x.shape(), {&x, &gain, &bias});
    const bool keep = out.requires_grad();
    std::vector<double> xhat(x.numel());
    std::vector<double> inv_std(rows);
    auto in = x.data();
    auto y = out.mutable_data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = in.data() + r * n;
        double mu = 0.0;
        for (std::size_t i = 0; i < n; ++i) mu += row[i];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (row[i] - mu) * (row[i] - mu);
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + epsilon);
        inv_std[r] = is;
        for (std::size_t i = 0; i < n; ++i) {
            const double h = (row[i] - mu) * is;
            xhat[r * n + i] = h;
            y[r * n + i] = h * gain.data()[i] + bias.data()[i];
        }
    }

    if (keep) {
        record([xi = x.handle(), gi = gain.handle(), bi = bias.handle(), oi = out.handle(), xhat = std::move(xhat),
                inv_std = std::move(inv_std), n, rows] {
            const auto& g = oi->grad;
            std::vector<double> gh(n);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* gr = g.data() + r * n;
                const double* hr = xhat.data() + r * n;
                if (gi->requires_grad)
                    for (std::size_t i = 0; i < n; ++i) gi->grad[i] += gr[i] * hr[i];
                if (bi->requires_grad)
                    for (std::size_t i = 0; i < n; ++i) bi->grad[i] += gr[i];
                if (!xi->requires_grad) continue;
                double m1 = 0.0, m2 = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    gh[i] = gr[i] * gi->data[i];
                    m1 += gh[i];
                    m2 += gh[i] * hr[i];
                }
                m1 /= static_cast<double>(n);
                m2 /= static_cast<double>(n);
                for (std::size_t i = 0; i < n; ++i) xi->grad[r * n + i] += inv_std[r] * (gh[i] - m1 - hr[i] * m2);
            }
        });
    }
    return out;
}

// ---- reductions -----------------------------------------------------------

Tensor sum(const Tensor& x) {
    Tensor out = detail::make_output({}, {&x});
    double total = 0.0;
    for (double v : x.data()) total += v;
    out.mutable_data()[0] = total;
    if (out.requires_grad()) {
        record([xi = x.handle(), oi = out.handle()] {
            const double g = oi->grad[0];
            for (auto& v : xi->grad) v += g;
        });
    }
    return out;
}

Tensor mean(const Tensor& x) {
    require(x.numel() > 0, ErrorKind::Contract, "mean: empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

// ---- block helpers --------------------------------------------------------

Tensor slice(const Tensor& x, std::size_t row0, std::size_t nrows, std::size_t col0, std::size_t ncols) {
    require_2d(x, "slice");
    const std::size_t cols = x.shape()[1];
    require(row0 + nrows <= x.shape()[0] && col0 + ncols <= cols, ErrorKind::Dimension,
            "slice: window exceeds " + shape_str(x.shape()));
    Tensor out = detail::make_output({nrows, ncols}, {&x});
    auto y = out.mutable_data();
    auto in = x.data();
    for (std::size_t r = 0; r < nrows; ++r)
        std::copy_n(in.begin() + static_cast<std::ptrdiff_t>((row0 + r) * cols + col0), ncols,
                    y.begin() + static_cast<std::ptrdiff_t>(r * ncols));
    if (out.requires_grad()) {
        record([xi = x.handle(), oi = out.handle(), row0, nrows, col0, ncols, cols] {
            for (std::size_t r = 0; r < nrows; ++r) {
                double* dst = xi->grad.data() + (row0 + r) * cols + col0;
                const double* src = oi->grad.data() + r * ncols;
                for (std::size_t c = 0; c < ncols; ++c) dst[c] += src[c];
            }
        });
    }
    return out;
}

Tensor blocks(const std::vector<std::vector<Tensor>>& grid) {
    require(!grid.empty() && !grid[0].empty(), ErrorKind::Contract, "blocks: empty grid");
    const std::size_t gr = grid.size(), gc = grid[0].size();
    std::vector<std::size_t> heights(gr), widths(gc);
    for (std::size_t i = 0; i < gr; ++i) {
        require(grid[i].size() == gc, ErrorKind::Dimension, "blocks: ragged grid");
        for (std::size_t j = 0; j < gc; ++j) {
            require_2d(grid[i][j], "blocks");
            if (j == 0) heights[i] = grid[i][j].shape()[0];
            if (i == 0) widths[j] = grid[i][j].shape()[1];
            require(grid[i][j].shape()[0] == heights[i] && grid[i][j].shape()[1] == widths[j], ErrorKind::Dimension,
                    "blocks: block (" + std::to_string(i) + "," + std::to_string(j) + ") has shape " +
                        shape_str(grid[i][j].shape()));
        }
    }
    const std::size_t rows = std::accumulate(heights.begin(), heights.end(), std::size_t{0});
    const std::size_t cols = std::accumulate(widths.begin(), widths.end(), std::size_t{0});

    bool needs = false;
    if (Tape::active() != nullptr)
        for (const auto& row : grid)
            for (const auto& t : row) needs = needs || t.requires_grad();
    Tensor out({rows, cols}, std::vector<double>(rows * cols), needs);

    std::vector<std::shared_ptr<TensorImpl>> parts;
    std::vector<std::size_t> r0s, c0s;
    std::size_t r0 = 0;
    for (std::size_t i = 0; i < gr; ++i) {
        std::size_t c0 = 0;
        for (std::size_t j = 0; j < gc; ++j) {
            const auto& t = grid[i][j];
            as_matrix(out.mutable_data(), rows, cols).block(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(c0),
                                                            static_cast<Eigen::Index>(heights[i]),
                                                            static_cast<Eigen::Index>(widths[j])) =
                as_matrix(t.data(), heights[i], widths[j]);
            if (needs) {
                parts.push_back(t.handle());
                r0s.push_back(r0);
                c0s.push_back(c0);
            }
            c0 += widths[j];
        }
        r0 += heights[i];
    }

    if (needs) {
        record([parts = std::move(parts), r0s = std::move(r0s), c0s = std::move(c0s), oi = out.handle(), rows, cols] {
            auto g = as_matrix(std::span<const double>(oi->grad), rows, cols);
            for (std::size_t p = 0; p < parts.size(); ++p) {
                auto& part = *parts[p];
                if (!part.requires_grad) continue;
                const std::size_t h = part.shape[0], w = part.shape[1];
                as_matrix(std::span<double>(part.grad), h, w) +=
                    g.block(static_cast<Eigen::Index>(r0s[p]), static_cast<Eigen::Index>(c0s[p]),
                            static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w));
            }
        });
    }
    return out;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    require_2d(a, "concat_rows");
    require_2d(b, "concat_rows");
    require(a.shape()[1] == b.shape()[1], ErrorKind::Dimension,
            "concat_rows: column mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const std::size_t na = a.numel();
    Tensor out = detail::make_output({a.shape()[0] + b.shape()[0], a.shape()[1]}, {&a, &b});
    auto y = out.mutable_data();
    std::copy(a.data().begin(), a.data().end(), y.begin());
    std::copy(b.data().begin(), b.data().end(), y.begin() + static_cast<std::ptrdiff_t>(na));
    if (out.requires_grad()) {
        record([ai = a.handle(), bi = b.handle(), oi = out.handle(), na] {
            const auto& g = oi->grad;
            if (ai->requires_grad) detail::accumulate(*ai, std::span<const double>(g).first(na));
            if (bi->requires_grad) detail::accumulate(*bi, std::span<const double>(g).subspan(na));
        });
    }
    return out;
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
    require_2d(x, "gather_rows");
    const std::size_t rows = x.shape()[0], cols = x.shape()[1];
    for (std::size_t i : index)
        require(i < rows, ErrorKind::Dimension,
                "gather_rows: index " + std::to_string(i) + " out of range for " + shape_str(x.shape()));
    Tensor out = detail::make_output({index.size(), cols}, {&x});
    auto y = out.mutable_data();
    for (std::size_t r = 0; r < index.size(); ++r)
        std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(index[r] * cols), cols,
                    y.begin() + static_cast<std::ptrdiff_t>(r * cols));
    if (out.requires_grad()) {
        record([xi = x.handle(), oi = out.handle(), idx = std::vector<std::size_t>(index.begin(), index.end()), cols] {
            for (std::size_t r = 0; r < idx.size(); ++r) {
                double* dst = xi->grad.data() + idx[r] * cols;
                const double* src = oi->grad.data() + r * cols;
                for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
            }
        });
    }
    return out;
}

// ---- AdamW ----------------------------------------------------------------

AdamWState AdamWState::zeros_like(std::span<const Tensor> params, const AdamWConfig& config) {
    AdamWState s;
    s.config = config;
    for (const auto& p : params) {
        s.first_moment.emplace_back(p.numel(), 0.0);
        s.second_moment.emplace_back(p.numel(), 0.0);
    }
    return s;
}

void adamw_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, AdamWState& state) {
    require(params.size() == grads.size() && params.size() == state.first_moment.size() &&
                params.size() == state.second_moment.size(),
            ErrorKind::Dimension, "adamw_step: parameter/gradient/state counts disagree");
    for (std::size_t i = 0; i < params.size(); ++i) {
        require(grads[i].size() == params[i].numel() && state.first_moment[i].size() == params[i].numel() &&
                    state.second_moment[i].size() == params[i].numel(),
                ErrorKind::Dimension, "adamw_step: shape mismatch for parameter " + std::to_string(i));
    }

    const auto& c = state.config;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    const double decay = 1.0 - c.learning_rate * c.weight_decay;

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto w = params[i].mutable_data();
        const auto& g = grads[i];
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] *= decay;
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
        }
    }
}

void adamw_step(std::span<Tensor> params, AdamWState& state) {
    std::vector<std::vector<double>> grads;
    grads.reserve(params.size());
    for (const auto& p : params) {
        require(p.requires_grad(), ErrorKind::Contract, "adamw_step: parameter does not track gradients");
        grads.emplace_back(p.grad().begin(), p.grad().end());
    }
    adamw_step(params, grads, state);
}

}  // namespace pg

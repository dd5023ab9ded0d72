#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gatecast/error.hpp"
#include "gatecast/rng.hpp"

namespace gatecast {

/**
 * Dense row-major matrix of doubles. Column vectors are n x 1 matrices.
 *
 * A default-constructed matrix is 0 x 0 and means "absent"; every other
 * constructor requires positive dimensions.
 */
class Matrix {
  public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(checked_size(rows, cols), fill) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != checked_size(rows, cols))
            throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match shape " +
                             shape_string(rows, cols));
    }

    /// Row-list literal, e.g. `Matrix{{1, 2}, {3, 4}}`.
    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        checked_size(rows_, cols_);
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw ShapeError("ragged matrix literal");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix column(std::span<const double> values) {
        return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    bool same_shape(const Matrix& other) const noexcept { return rows_ == other.rows_ && cols_ == other.cols_; }
    std::string shape() const { return shape_string(rows_, cols_); }

    void fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

    static std::string shape_string(std::size_t r, std::size_t c) {
        return std::to_string(r) + "x" + std::to_string(c);
    }

  private:
    static std::size_t checked_size(std::size_t r, std::size_t c) {
        if (r == 0 || c == 0) throw ShapeError("matrix dimensions must be positive, got " + shape_string(r, c));
        return r * c;
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

namespace detail {

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
}

template <class F>
Matrix map(const Matrix& x, F f) {
    Matrix out = x;
    for (double& v : out.values()) v = f(v);
    return out;
}

template <class F>
Matrix zip(const Matrix& a, const Matrix& b, const char* op, F f) {
    require_same_shape(a, b, op);
    Matrix out = a;
    auto bv = b.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = f(ov[i], bv[i]);
    return out;
}

// Largest double below 1 and smallest positive double: the open-interval clamps
// for saturated activations.
inline constexpr double below_one = 1.0 - 0x1.0p-53;
inline constexpr double above_zero = std::numeric_limits<double>::denorm_min();

}  // namespace detail

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: cannot multiply " + a.shape() + " by " + b.shape());
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    return out;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
    return detail::zip(a, b, "hadamard", [](double x, double y) { return x * y; });
}

inline Matrix add(const Matrix& a, const Matrix& b) {
    return detail::zip(a, b, "add", [](double x, double y) { return x + y; });
}

inline Matrix subtract(const Matrix& a, const Matrix& b) {
    return detail::zip(a, b, "subtract", [](double x, double y) { return x - y; });
}

inline Matrix scale(const Matrix& a, double s) {
    return detail::map(a, [s](double x) { return x * s; });
}

inline Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

/// Logistic function on a scalar, branching on sign so neither branch overflows.
/// Saturated results are clamped into the open interval (0, 1).
inline double sigmoid(double x) noexcept {
    double s;
    if (x >= 0.0) {
        s = 1.0 / (1.0 + std::exp(-x));
    } else {
        const double e = std::exp(x);
        s = e / (1.0 + e);
    }
    return std::clamp(s, detail::above_zero, detail::below_one);
}

inline double tanh_act(double x) noexcept {
    return std::clamp(std::tanh(x), -detail::below_one, detail::below_one);
}

inline Matrix sigmoid(const Matrix& x) {
    return detail::map(x, [](double v) { return sigmoid(v); });
}

inline Matrix tanh_act(const Matrix& x) {
    return detail::map(x, [](double v) { return tanh_act(v); });
}

/// Uniform Glorot initialization on [-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))].
/// Entries are drawn in row-major order.
inline Matrix xavier_init(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix out(rows, cols);
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (double& v : out.values()) v = rng.uniform(-bound, bound);
    return out;
}

inline double sum_squares(const Matrix& a) noexcept {
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    return s;
}

// In-place kernels used on the hot path of the recurrent cells. They assume
// shapes were validated by the caller.

/// y += W x
inline void gemv_acc(std::span<double> y, const Matrix& w, std::span<const double> x) noexcept {
    const std::size_t n = w.cols();
    const double* row = w.values().data();
    for (std::size_t i = 0; i < w.rows(); ++i, row += n) {
        double acc = 0.0;
#pragma omp simd reduction(+ : acc)
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
        y[i] += acc;
    }
}

/// y += W^T v
inline void gemv_t_acc(std::span<double> y, const Matrix& w, std::span<const double> v) noexcept {
    const std::size_t n = w.cols();
    const double* row = w.values().data();
    for (std::size_t i = 0; i < w.rows(); ++i, row += n) {
        const double vi = v[i];
#pragma omp simd
        for (std::size_t j = 0; j < n; ++j) y[j] += row[j] * vi;
    }
}

/// G += a b^T
inline void ger_acc(Matrix& g, std::span<const double> a, std::span<const double> b) noexcept {
    const std::size_t n = g.cols();
    double* row = g.values().data();
    for (std::size_t i = 0; i < g.rows(); ++i, row += n) {
        const double ai = a[i];
#pragma omp simd
        for (std::size_t j = 0; j < n; ++j) row[j] += ai * b[j];
    }
}

/// y += x
inline void axpy(std::span<double> y, std::span<const double> x, double alpha = 1.0) noexcept {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace gatecast

#pragma once

// Dense row-major matrix/vector kernels for the recurrent cells.
// Everything is a plain loop on contiguous storage; shapes are checked
// hard (no broadcasting) and results are checked finite.

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ghazalforge {

/// Floor for probabilities fed to log(); keeps losses and logits finite even
/// when a softmax entry underflows to zero.
inline constexpr double kProbFloor = 1e-300;

template <typename T>
class Vec {
    static_assert(std::is_floating_point_v<T>);

public:
    Vec() = default;
    explicit Vec(std::size_t n, T value = T(0)) : data_(n, value) {}
    Vec(std::initializer_list<T> init) : data_(init) {}

    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    bool operator==(const Vec& other) const { return data_ == other.data_; }

private:
    std::vector<T> data_;
};

template <typename T>
class Mat {
    static_assert(std::is_floating_point_v<T>);

public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, T value = T(0))
        : rows_(rows), cols_(cols), data_(rows * cols, value) {
        if (rows == 0 || cols == 0)
            throw std::invalid_argument("Mat: dimensions must be positive");
    }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T* row(std::size_t r) { return data_.data() + r * cols_; }
    const T* row(std::size_t r) const { return data_.data() + r * cols_; }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    bool operator==(const Mat& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

namespace detail {

template <typename T>
void require_finite(const Vec<T>& v, const char* op) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i])) {
            std::ostringstream msg;
            msg << op << ": non-finite value at index " << i;
            throw std::runtime_error(msg.str());
        }
}

[[noreturn]] inline void throw_dim(const std::string& msg) {
    throw std::invalid_argument(msg);
}

}  // namespace detail

/// result[i] = sum_j m(i,j) * v[j]
template <typename T>
Vec<T> matvec(const Mat<T>& m, const Vec<T>& v) {
    if (m.cols() != v.size()) {
        std::ostringstream msg;
        msg << "matvec: matrix is " << m.rows() << "x" << m.cols()
            << " but vector has length " << v.size();
        detail::throw_dim(msg.str());
    }
    Vec<T> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const T* r = m.row(i);
        T acc = T(0);
        for (std::size_t j = 0; j < m.cols(); ++j) acc += r[j] * v[j];
        out[i] = acc;
    }
    detail::require_finite(out, "matvec");
    return out;
}

/// result[j] = sum_i m(i,j) * v[i]  (multiply by the transpose without forming it)
template <typename T>
Vec<T> matvec_transposed(const Mat<T>& m, const Vec<T>& v) {
    if (m.rows() != v.size()) {
        std::ostringstream msg;
        msg << "matvec_transposed: matrix is " << m.rows() << "x" << m.cols()
            << " but vector has length " << v.size();
        detail::throw_dim(msg.str());
    }
    Vec<T> out(m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const T* r = m.row(i);
        const T s = v[i];
        for (std::size_t j = 0; j < m.cols(); ++j) out[j] += r[j] * s;
    }
    detail::require_finite(out, "matvec_transposed");
    return out;
}

/// Max-subtracted softmax; sums to 1 and keeps the argmax.
template <typename T>
Vec<T> softmax(const Vec<T>& v) {
    if (v.empty()) detail::throw_dim("softmax: empty vector");
    T mx = v[0];
    for (std::size_t i = 1; i < v.size(); ++i) mx = std::max(mx, v[i]);
    Vec<T> out(v.size());
    T sum = T(0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        sum += out[i];
    }
    for (std::size_t i = 0; i < v.size(); ++i) out[i] /= sum;
    detail::require_finite(out, "softmax");
    return out;
}

// Saturated tanh/sigmoid round to exactly +-1 / 0 / 1 in floating point;
// clamp one ulp inside so downstream log/derivative code can rely on the
// open ranges (-1,1) and (0,1).
template <typename T>
T tanh_clamped(T x) {
    const T one_minus = std::nextafter(T(1), T(0));
    T y = std::tanh(x);
    if (y >= T(1)) y = one_minus;
    if (y <= T(-1)) y = -one_minus;
    return y;
}

template <typename T>
T sigmoid_clamped(T x) {
    // split by sign so exp never overflows
    T y;
    if (x >= T(0)) {
        y = T(1) / (T(1) + std::exp(-x));
    } else {
        const T e = std::exp(x);
        y = e / (T(1) + e);
    }
    const T one_minus = std::nextafter(T(1), T(0));
    if (y >= T(1)) y = one_minus;
    if (y <= T(0)) y = std::numeric_limits<T>::min();
    return y;
}

template <typename T>
Vec<T> tanh_vec(const Vec<T>& v) {
    Vec<T> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = tanh_clamped(v[i]);
    detail::require_finite(out, "tanh_vec");
    return out;
}

template <typename T>
Vec<T> sigmoid_vec(const Vec<T>& v) {
    Vec<T> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid_clamped(v[i]);
    detail::require_finite(out, "sigmoid_vec");
    return out;
}

/// Elementwise product.
template <typename T>
Vec<T> hadamard(const Vec<T>& a, const Vec<T>& b) {
    if (a.size() != b.size()) {
        std::ostringstream msg;
        msg << "hadamard: lengths " << a.size() << " and " << b.size() << " differ";
        detail::throw_dim(msg.str());
    }
    Vec<T> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    detail::require_finite(out, "hadamard");
    return out;
}

// In-place accumulation helpers used by the cells and the backward pass.

template <typename T>
void add_inplace(Vec<T>& dst, const Vec<T>& src) {
    if (dst.size() != src.size()) detail::throw_dim("add_inplace: length mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

/// dst += a outer b, i.e. dst(i,j) += a[i] * b[j]
template <typename T>
void add_outer(Mat<T>& dst, const Vec<T>& a, const Vec<T>& b) {
    if (dst.rows() != a.size() || dst.cols() != b.size())
        detail::throw_dim("add_outer: shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) {
        T* r = dst.row(i);
        const T s = a[i];
        for (std::size_t j = 0; j < b.size(); ++j) r[j] += s * b[j];
    }
}

/// dst(:, col) += a  (one-hot outer product, realized as a column update)
template <typename T>
void add_column(Mat<T>& dst, std::size_t col, const Vec<T>& a) {
    if (dst.rows() != a.size() || col >= dst.cols())
        detail::throw_dim("add_column: shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) dst(i, col) += a[i];
}

/// out[i] = m(i, col); one-hot matvec is just a column read.
template <typename T>
Vec<T> column(const Mat<T>& m, std::size_t col) {
    if (col >= m.cols()) detail::throw_dim("column: index out of range");
    Vec<T> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) out[i] = m(i, col);
    return out;
}

}  // namespace ghazalforge

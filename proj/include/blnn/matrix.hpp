#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "blnn/errors.hpp"

namespace blnn {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                                 " does not match " + shape_string(rows_, cols_));
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r == 0 ? 0 : rows.begin()->size();
        Matrix m(r, c);
        std::size_t i = 0;
        for (const auto& row : rows) {
            if (row.size() != c) throw DimensionError("ragged initializer for Matrix");
            std::copy(row.begin(), row.end(), m.row(i++).begin());
        }
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }
    double operator()(std::size_t r, std::size_t c) const noexcept {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }
    std::string shape() const { return shape_string(rows_, cols_); }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

    static std::string shape_string(std::size_t r, std::size_t c) {
        return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

namespace linalg {

/// out = a * b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul shape mismatch " + a.shape() + " * " + b.shape());
    Matrix out(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* o = out.data().data() + i * n;
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.data().data() + k * n;
            for (std::size_t j = 0; j < n; ++j) o[j] += aik * brow[j];
        }
    }
    return out;
}

/// out = a^T * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw DimensionError("matmul_tn shape mismatch " + a.shape() + "^T * " + b.shape());
    Matrix out(a.cols(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* brow = b.data().data() + k * n;
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            if (aki == 0.0) continue;
            double* o = out.data().data() + i * n;
            for (std::size_t j = 0; j < n; ++j) o[j] += aki * brow[j];
        }
    }
    return out;
}

/// out = a * b^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw DimensionError("matmul_nt shape mismatch " + a.shape() + " * " + b.shape() + "^T");
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto ar = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto br = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < ar.size(); ++k) s += ar[k] * br[k];
            out(i, j) = s;
        }
    }
    return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline double norm(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

/// Cosine similarity with each norm clamped below by eps.
inline double cosine(std::span<const double> a, std::span<const double> b, double eps = 1e-12) {
    return dot(a, b) / (std::max(norm(a), eps) * std::max(norm(b), eps));
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw DimensionError("max_abs_diff shape mismatch " + a.shape() + " vs " + b.shape());
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
    return m;
}

inline bool all_finite(const Matrix& a) noexcept {
    return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace linalg
}  // namespace blnn

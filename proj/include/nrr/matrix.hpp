#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nrr/common.hpp"

namespace nrr {

/// Dense row-major matrix of doubles. The whole study runs in double
/// precision so finite-difference gradient checks stay meaningful.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    std::span<double> row(std::size_t r) { return {v_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {v_.data() + r * cols_, cols_}; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    Matrix transposed() const;

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(double s);

    // C = A * B
    static Matrix multiply(const Matrix& a, const Matrix& b);
    // C = A * B^T  (dense forward: X[N,in] * W[out,in]^T)
    static Matrix multiply_bt(const Matrix& a, const Matrix& b);
    // C = A^T * B  (dense weight gradient: G[N,out]^T * X[N,in])
    static Matrix multiply_at(const Matrix& a, const Matrix& b);

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> v_;
};

}  // namespace nrr

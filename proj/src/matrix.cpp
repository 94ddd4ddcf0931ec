#include "nrr/matrix.hpp"

namespace nrr {

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c)
            t(c, r) = (*this)(r, c);
    return t;
}

Matrix& Matrix::operator+=(const Matrix& o) {
    if (!same_shape(o)) throw StructuralError("matrix shape mismatch in +=");
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
    if (!same_shape(o)) throw StructuralError("matrix shape mismatch in -=");
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& x : v_) x *= s;
    return *this;
}

// ikj loop order: the inner loop walks both C's and B's rows contiguously,
// which the compiler vectorizes well.
Matrix Matrix::multiply(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw StructuralError("matrix shape mismatch in multiply");
    Matrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
        double* ci = c.v_.data() + i * c.cols_;
        const double* ai = a.v_.data() + i * a.cols_;
        for (std::size_t k = 0; k < a.cols_; ++k) {
            const double aik = ai[k];
            const double* bk = b.v_.data() + k * b.cols_;
            for (std::size_t j = 0; j < b.cols_; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Matrix Matrix::multiply_bt(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.cols_) throw StructuralError("matrix shape mismatch in multiply_bt");
    // transpose once, then reuse the contiguous kernel
    return multiply(a, b.transposed());
}

Matrix Matrix::multiply_at(const Matrix& a, const Matrix& b) {
    if (a.rows_ != b.rows_) throw StructuralError("matrix shape mismatch in multiply_at");
    Matrix c(a.cols_, b.cols_);
    for (std::size_t k = 0; k < a.rows_; ++k) {
        const double* ak = a.v_.data() + k * a.cols_;
        const double* bk = b.v_.data() + k * b.cols_;
        for (std::size_t i = 0; i < a.cols_; ++i) {
            const double aki = ak[i];
            double* ci = c.v_.data() + i * c.cols_;
            for (std::size_t j = 0; j < b.cols_; ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

}  // namespace nrr

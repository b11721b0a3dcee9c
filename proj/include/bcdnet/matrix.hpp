#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bcdnet {

/// Thrown when a Cholesky factorization hits a non-positive pivot,
/// i.e. the input was not positive definite.
class SpdError : public std::runtime_error {
public:
    SpdError(std::size_t pivot, double value)
        : std::runtime_error("solve_spd: matrix is not positive definite (pivot " +
                             std::to_string(pivot) + " = " + std::to_string(value) + ")"),
          pivot_(pivot) {}
    std::size_t pivot() const { return pivot_; }

private:
    std::size_t pivot_;
};

/// Dense row-major matrix of doubles. The one container used for weights,
/// states, pre-activations and data throughout the library.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
        if (rows == 0 || cols == 0)
            throw std::invalid_argument("Matrix: dimensions must be positive, got " +
                                        shape_str(rows, cols));
    }

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (rows == 0 || cols == 0)
            throw std::invalid_argument("Matrix: dimensions must be positive, got " +
                                        shape_str(rows, cols));
        if (data_.size() != rows * cols)
            throw std::invalid_argument("Matrix: data length " + std::to_string(data_.size()) +
                                        " does not match shape " + shape_str(rows, cols));
        ensure_finite("construction");
    }

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        if (rows_ == 0 || cols_ == 0)
            throw std::invalid_argument("Matrix: empty initializer");
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_)
                throw std::invalid_argument("Matrix: ragged initializer rows");
            data_.insert(data_.end(), r.begin(), r.end());
        }
        ensure_finite("construction");
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix constant(std::size_t rows, std::size_t cols, double value) {
        Matrix m(rows, cols);
        for (double& x : m.data_) x = value;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    std::string shape() const { return shape_str(rows_, cols_); }

    bool all_finite() const {
        for (double x : data_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    void ensure_finite(const char* where) const {
        if (!all_finite())
            throw std::runtime_error(std::string("Matrix: non-finite entry after ") + where);
    }

    Matrix& operator+=(const Matrix& other) {
        require_same_shape(other, "operator+=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
        return *this;
    }

    Matrix& operator-=(const Matrix& other) {
        require_same_shape(other, "operator-=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
        return *this;
    }

    Matrix& operator*=(double s) {
        for (double& x : data_) x *= s;
        return *this;
    }

    static std::string shape_str(std::size_t r, std::size_t c) {
        return std::to_string(r) + "x" + std::to_string(c);
    }

private:
    void require_same_shape(const Matrix& other, const char* op) const {
        if (!same_shape(other))
            throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape() +
                                        " vs " + other.shape());
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
inline Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
inline Matrix operator*(double s, Matrix a) { return a *= s; }

/// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: dimension mismatch " + a.shape() + " * " + b.shape());
    Matrix c(a.rows(), b.cols());
    const std::size_t m = a.rows(), kk = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c.row(i);
        const double* arow = a.row(i);
        for (std::size_t k = 0; k < kk; ++k) {
            const double aik = arow[k];
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    c.ensure_finite("matmul");
    return c;
}

/// C = A * B^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw std::invalid_argument("matmul_nt: dimension mismatch " + a.shape() + " * " +
                                    b.shape() + "^T");
    Matrix c(a.rows(), b.rows());
    const std::size_t m = a.rows(), kk = a.cols(), n = b.rows();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < kk; ++k) acc += arow[k] * brow[k];
            crow[j] = acc;
        }
    }
    c.ensure_finite("matmul_nt");
    return c;
}

/// C = A^T * B
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw std::invalid_argument("matmul_tn: dimension mismatch " + a.shape() + "^T * " +
                                    b.shape());
    Matrix c(a.cols(), b.cols());
    const std::size_t m = a.cols(), kk = a.rows(), n = b.cols();
    for (std::size_t k = 0; k < kk; ++k) {
        const double* arow = a.row(k);
        const double* brow = b.row(k);
        for (std::size_t i = 0; i < m; ++i) {
            const double aki = arow[i];
            double* crow = c.row(i);
            for (std::size_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
        }
    }
    c.ensure_finite("matmul_tn");
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

/// sum of squared entries, i.e. ||A||_F^2
inline double fro_norm_sq(const Matrix& a) {
    double s = 0.0;
    const double* p = a.data();
    for (std::size_t k = 0; k < a.size(); ++k) s += p[k] * p[k];
    return s;
}

/// ||A - B||_F^2 without forming the difference
inline double fro_norm_sq_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("fro_norm_sq_diff: shape mismatch " + a.shape() + " vs " +
                                    b.shape());
    double s = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = pa[k] - pb[k];
        s += d * d;
    }
    return s;
}

inline double fro_norm(const Matrix& a) { return std::sqrt(fro_norm_sq(a)); }

namespace detail {

inline void check_symmetric(const Matrix& a) {
    double scale = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) scale = std::max(scale, std::abs(a.data()[k]));
    const double tol = 1e-12 * (1.0 + scale);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j)
            if (std::abs(a(i, j) - a(j, i)) > tol)
                throw std::invalid_argument("solve_spd: matrix is not symmetric at (" +
                                            std::to_string(i) + "," + std::to_string(j) + ")");
}

/// In-place lower Cholesky factor of a. Throws SpdError on a non-positive pivot.
inline Matrix cholesky(const Matrix& a) {
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
        if (diag <= 0.0) throw SpdError(j, diag);
        const double ljj = std::sqrt(diag);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            const double* li = l.row(i);
            const double* lj = l.row(j);
            for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
            l(i, j) = s / ljj;
        }
    }
    return l;
}

}  // namespace detail

/// Solves A X = B for symmetric positive definite A via Cholesky.
inline Matrix solve_spd(const Matrix& a, const Matrix& b) {
    if (a.rows() != a.cols())
        throw std::invalid_argument("solve_spd: matrix must be square, got " + a.shape());
    if (a.rows() != b.rows())
        throw std::invalid_argument("solve_spd: dimension mismatch " + a.shape() + " vs " +
                                    b.shape());
    detail::check_symmetric(a);
    const Matrix l = detail::cholesky(a);
    const std::size_t n = a.rows(), m = b.cols();

    // forward substitution L Z = B
    Matrix z = b;
    for (std::size_t i = 0; i < n; ++i) {
        const double* li = l.row(i);
        double* zi = z.row(i);
        for (std::size_t k = 0; k < i; ++k) {
            const double lik = li[k];
            const double* zk = z.row(k);
            for (std::size_t j = 0; j < m; ++j) zi[j] -= lik * zk[j];
        }
        const double inv = 1.0 / li[i];
        for (std::size_t j = 0; j < m; ++j) zi[j] *= inv;
    }

    // back substitution L^T X = Z
    Matrix& x = z;
    for (std::size_t ii = n; ii-- > 0;) {
        double* xi = x.row(ii);
        for (std::size_t k = ii + 1; k < n; ++k) {
            const double lki = l(k, ii);
            const double* xk = x.row(k);
            for (std::size_t j = 0; j < m; ++j) xi[j] -= lki * xk[j];
        }
        const double inv = 1.0 / l(ii, ii);
        for (std::size_t j = 0; j < m; ++j) xi[j] *= inv;
    }
    x.ensure_finite("solve_spd");
    return x;
}

/// Largest singular value of A, estimated by power iteration on A^T A.
/// Deterministic: fixed start vector, fixed iteration count.
inline double op_norm_estimate(const Matrix& a, std::size_t iters = 20) {
    std::vector<double> v(a.cols(), 1.0 / std::sqrt(static_cast<double>(a.cols())));
    std::vector<double> av(a.rows(), 0.0), atav(a.cols(), 0.0);
    double sigma = 0.0;
    for (std::size_t t = 0; t < iters; ++t) {
        for (std::size_t i = 0; i < a.rows(); ++i) {
            const double* arow = a.row(i);
            double acc = 0.0;
            for (std::size_t j = 0; j < a.cols(); ++j) acc += arow[j] * v[j];
            av[i] = acc;
        }
        std::fill(atav.begin(), atav.end(), 0.0);
        for (std::size_t i = 0; i < a.rows(); ++i) {
            const double* arow = a.row(i);
            const double avi = av[i];
            for (std::size_t j = 0; j < a.cols(); ++j) atav[j] += arow[j] * avi;
        }
        double norm = 0.0;
        for (double x : atav) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) v[j] = atav[j] / norm;
        sigma = std::sqrt(norm);
    }
    return sigma;
}

}  // namespace bcdnet

#pragma once

// Small dense linear algebra for the low-dimensional designs used by the
// bandit estimators (d up to a few dozen).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "riskbandit/errors.hpp"

namespace riskbandit {

using Vector = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// y += s * x
inline void axpy(double s, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

inline Vector scaled(std::span<const double> x, double s) {
    Vector out(x.begin(), x.end());
    for (double& v : out) v *= s;
    return out;
}

/// Row-major dense matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n, double diag = 1.0) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = diag;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    /// this += w * x x^T
    void add_outer(std::span<const double> x, double w = 1.0) {
        for (std::size_t i = 0; i < rows_; ++i) {
            const double wi = w * x[i];
            for (std::size_t j = 0; j < cols_; ++j) data_[i * cols_ + j] += wi * x[j];
        }
    }

    void add_diagonal(double v) {
        for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) (*this)(i, i) += v;
    }

    Vector operator*(std::span<const double> x) const {
        Vector y(rows_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i) y[i] = dot(row(i), x);
        return y;
    }

    Matrix operator*(const Matrix& o) const {
        Matrix r(rows_, o.cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = 0; k < cols_; ++k) {
                const double a = (*this)(i, k);
                for (std::size_t j = 0; j < o.cols_; ++j) r(i, j) += a * o(k, j);
            }
        return r;
    }

    Matrix transpose() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    double max_abs_diff(const Matrix& o) const {
        double m = 0.0;
        for (std::size_t i = 0; i < data_.size(); ++i) m = std::max(m, std::abs(data_[i] - o.data_[i]));
        return m;
    }

    const std::vector<double>& data() const { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Lower Cholesky factor A = L L^T with rank-one updates.
class Cholesky {
public:
    Cholesky() = default;
    explicit Cholesky(const Matrix& a) { factor(a); }

    /// Factor a symmetric positive definite matrix; throws if it is not.
    void factor(const Matrix& a) {
        if (!try_factor(a)) throw invariant_error("matrix is not positive definite");
    }

    bool try_factor(const Matrix& a) {
        const std::size_t n = a.rows();
        l_ = Matrix(n, n);
        for (std::size_t j = 0; j < n; ++j) {
            double s = a(j, j);
            for (std::size_t k = 0; k < j; ++k) s -= l_(j, k) * l_(j, k);
            if (!(s > 0.0) || !std::isfinite(s)) return false;
            const double ljj = std::sqrt(s);
            l_(j, j) = ljj;
            for (std::size_t i = j + 1; i < n; ++i) {
                double v = a(i, j);
                for (std::size_t k = 0; k < j; ++k) v -= l_(i, k) * l_(j, k);
                l_(i, j) = v / ljj;
            }
        }
        return true;
    }

    std::size_t dim() const { return l_.rows(); }
    const Matrix& lower() const { return l_; }

    /// L L^T <- L L^T + x x^T
    void rank_one_update(std::span<const double> x) {
        const std::size_t n = dim();
        Vector w(x.begin(), x.end());
        for (std::size_t k = 0; k < n; ++k) {
            const double lkk = l_(k, k);
            const double r = std::hypot(lkk, w[k]);
            const double c = r / lkk;
            const double s = w[k] / lkk;
            l_(k, k) = r;
            for (std::size_t i = k + 1; i < n; ++i) {
                l_(i, k) = (l_(i, k) + s * w[i]) / c;
                w[i] = c * w[i] - s * l_(i, k);
            }
        }
    }

    /// Solve L y = b.
    Vector solve_lower(std::span<const double> b) const {
        const std::size_t n = dim();
        Vector y(b.begin(), b.end());
        for (std::size_t i = 0; i < n; ++i) {
            double s = y[i];
            for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * y[k];
            y[i] = s / l_(i, i);
        }
        return y;
    }

    /// Solve L^T x = y.
    Vector solve_upper(std::span<const double> y) const {
        const std::size_t n = dim();
        Vector x(y.begin(), y.end());
        for (std::size_t ii = n; ii-- > 0;) {
            double s = x[ii];
            for (std::size_t k = ii + 1; k < n; ++k) s -= l_(k, ii) * x[k];
            x[ii] = s / l_(ii, ii);
        }
        return x;
    }

    Vector solve(std::span<const double> b) const { return solve_upper(solve_lower(b)); }

    /// x^T A^{-1} x
    double inv_quad(std::span<const double> x) const {
        const Vector y = solve_lower(x);
        return dot(y, y);
    }

    double inv_norm(std::span<const double> x) const { return std::sqrt(inv_quad(x)); }

    double logdet() const {
        double s = 0.0;
        for (std::size_t i = 0; i < dim(); ++i) s += std::log(l_(i, i));
        return 2.0 * s;
    }

    Matrix inverse() const {
        const std::size_t n = dim();
        Matrix inv(n, n);
        Vector e(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            std::fill(e.begin(), e.end(), 0.0);
            e[j] = 1.0;
            const Vector col = solve(e);
            for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
        }
        return inv;
    }

private:
    Matrix l_;
};

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
inline Vector symmetric_eigenvalues(Matrix a) {
    const std::size_t n = a.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                total += a(i, j) * a(i, j);
                if (i != j) off += a(i, j) * a(i, j);
            }
        if (off <= 1e-30 * std::max(total, std::numeric_limits<double>::min())) break;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
    }
    Vector ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

inline double min_eigenvalue(const Matrix& a) { return symmetric_eigenvalues(a).front(); }

/// Euclidean projection onto the ball of radius s (s = +inf is the identity).
inline Vector project_ball(Vector v, double s) {
    const double n = norm2(v);
    if (n > s) {
        const double f = s / n;
        for (double& x : v) x *= f;
    }
    return v;
}

}  // namespace riskbandit

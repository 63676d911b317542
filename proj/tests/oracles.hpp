#pragma once

// Independent reference computations used by the unit tests. Nothing here
// calls into the library's numerical routines.

#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle {

// Frozen reference values (30-digit arithmetic, rounded to double).
inline constexpr double kStdNormalExpectile01 = -0.86159211241582879;
inline constexpr double kZeroExpectileMean01Sigma05 = 0.43079605620791441;
inline constexpr double kZeroExpectileMean01Sigma3 = 2.5847763372474864;
inline constexpr double kEntropicArm1 = 0.43378083048302719;
inline constexpr double kEntropicArm2 = 0.66719608858604289;
inline constexpr double kLambertMinus01 = -3.5771520639572971;
inline constexpr double kRadiusKappa1 = 2.4291932052578695;
inline constexpr double kRadiusKappa9 = 9.8627388473208252;
inline constexpr double kAsymMeanSigma05 = 0.84104417400672002;
inline constexpr double kAsymMeanSigma15 = 2.5231325220201600;

inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 4000) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

inline double gauss_pdf(double y, double mu, double s) {
    const double z = (y - mu) / s;
    return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
}

/// Golden-section minimizer on [a, b].
inline double golden(const std::function<double(double)>& f, double a, double b, double tol = 1e-10) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d; d = c; fd = fc; c = b - r * (b - a); fc = f(c);
        } else {
            a = c; c = d; fc = fd; d = a + r * (b - a); fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

/// p-expectile of N(mu, s^2) by Simpson integration + golden section.
inline double gaussian_expectile(double p, double mu, double s) {
    const auto obj = [&](double xi) {
        const auto f = [&](double y) {
            const double z = y - xi;
            return (z < 0 ? 1.0 - p : p) * z * z * gauss_pdf(y, mu, s);
        };
        return simpson(f, mu - 12 * s, xi, 4000) + simpson(f, xi, mu + 12 * s, 4000);
    };
    return golden(obj, mu - 5 * s, mu + 5 * s, 1e-9 * s);
}

/// W_{-1}(z) by plain bisection on w e^w = z over [-50, -1].
inline double lambert_wm1(double z) {
    double lo = -50.0, hi = -1.0;
    for (int i = 0; i < 300; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid * std::exp(mid) > z) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

using Mat = std::vector<std::vector<double>>;

/// Solve A x = b by Gaussian elimination with partial pivoting; also returns log|det A|.
inline std::pair<std::vector<double>, double> solve(Mat a, std::vector<double> b) {
    const std::size_t n = b.size();
    double logdet = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
        std::swap(a[k], a[piv]);
        std::swap(b[k], b[piv]);
        logdet += std::log(std::abs(a[k][k]));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a[i][k] / a[k][k];
            for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
            b[i] -= f * b[k];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
        x[i] = s / a[i][i];
    }
    return {x, logdet};
}

inline Mat gram(const std::vector<std::vector<double>>& xs, std::size_t d, double reg) {
    Mat m(d, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) m[i][i] = reg;
    for (const auto& x : xs)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) m[i][j] += x[i] * x[j];
    return m;
}

/// Ridge estimate (sum X X^T + alpha I)^{-1} sum Y X.
inline std::vector<double> ridge(const std::vector<std::vector<double>>& xs, const std::vector<double>& ys,
                                 std::size_t d, double alpha) {
    std::vector<double> b(d, 0.0);
    for (std::size_t s = 0; s < xs.size(); ++s)
        for (std::size_t i = 0; i < d; ++i) b[i] += ys[s] * xs[s][i];
    return solve(gram(xs, d, alpha), b).first;
}

inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace oracle

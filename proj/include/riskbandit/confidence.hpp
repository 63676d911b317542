#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>

#include "riskbandit/errors.hpp"
#include "riskbandit/loss.hpp"

namespace riskbandit {

struct BanditParams {
    std::size_t d = 1;
    double alpha = 1.0;
    double delta = 0.1;
    double sigma = 1.0;
    double S = 1.0;
    double L = 1.0;
    CurvatureBounds curvature{1.0, 1.0};

    double m() const { return curvature.m; }
    double M() const { return curvature.M; }
    double kappa() const { return curvature.kappa(); }
    double beta() const { return kappa() * alpha; }

    void validate() const {
        require(d >= 1, "d must be positive");
        require(alpha > 0.0, "alpha must be positive");
        require(delta > 0.0 && delta < 1.0, "delta must lie in (0,1)");
        require(sigma >= 0.0, "sigma must be nonnegative");
        require(S > 0.0, "S must be positive");
        require(L > 0.0, "L must be positive");
        require(curvature.m > 0.0 && curvature.M >= curvature.m, "curvature bounds need 0 < m <= M");
    }
};

struct StochasticActionParams {
    double rho_x;
    double eps_h;

    void validate(std::size_t d) const {
        require(rho_x > 0.0, "rho_x must be positive");
        require(rho_x * static_cast<double>(d) <= 1.0 + 1e-12, "rho_x must not exceed 1/d");
        require(eps_h >= 0.0, "eps_h must be nonnegative");
    }
};

/// Ceiling that ignores floating noise just above an integer.
inline long long stable_ceil(double x) {
    const double r = std::round(x);
    if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<long long>(r);
    return static_cast<long long>(std::ceil(x));
}

/// 2 log(1/delta) + d log(m/alpha) + log det V^{alpha/m}
inline double radius_bracket(const BanditParams& p, double logdet_v) {
    const double b = 2.0 * std::log(1.0 / p.delta) + static_cast<double>(p.d) * std::log(p.m() / p.alpha) + logdet_v;
    if (b < -1e-9 * std::max(1.0, std::abs(logdet_v))) throw invariant_error("negative confidence bracket");
    return std::max(b, 0.0);
}

/// c_t = 2 kappa (sigma sqrt(bracket) + sqrt(alpha/kappa) S)
inline double radius_c(const BanditParams& p, double logdet_v, std::size_t /*t*/ = 0) {
    return 2.0 * p.kappa() * (p.sigma * std::sqrt(radius_bracket(p, logdet_v)) + std::sqrt(p.alpha / p.kappa()) * p.S);
}

inline double bonus(const BanditParams& /*p*/, double c, double h_inv_norm) { return c * h_inv_norm; }

/// Global-metric bonus: prefactor 2 sqrt(kappa/m)(...) = c / sqrt(kappa m), times |x|_{V^{-1}}.
inline double bonus_global(const BanditParams& p, double c, double v_inv_norm) {
    return c / std::sqrt(p.kappa() * p.m()) * v_inv_norm;
}

/// Extra radius for the averaged OGD parameter; zero at t = h.
inline double ogd_radius(const BanditParams& p, double t, double T, double h, double eps_h, double c_prime = 1.0) {
    require(h >= 1.0, "episode length must be positive");
    if (t < h) throw config_error("ogd_radius requires t >= h");
    require(eps_h > 0.0, "eps_h must be positive");
    const double d = static_cast<double>(p.d);
    const double a = p.L * p.L + p.alpha / (p.m() * p.M() * t);
    const double b = 2.0 * p.kappa() * c_prime * d * h * h * p.sigma * p.sigma / (eps_h * eps_h);
    const double l1 = std::log(2.0 * d * T / (h * p.delta));
    const double l2 = std::log(t / h);
    return std::sqrt(std::max(0.0, a * b * l1 * l2));
}

inline long long episode_length_simple(const StochasticActionParams& sap, double L, double delta) {
    require(delta > 0.0 && delta < 2.0, "delta must lie in (0,2)");
    const double v = 2.0 * sap.eps_h / (sap.rho_x * L * L) + 8.0 / (sap.rho_x * sap.rho_x) * std::log(2.0 / delta);
    return std::max<long long>(1, stable_ceil(v));
}

/// Lower branch W_{-1} on [-1/e, 0).
inline double lambert_w_minus1(double z) {
    const double branch = -1.0 / std::numbers::e;
    if (!(z >= branch - 1e-15 && z < 0.0)) throw config_error("lambert_w_minus1: argument outside [-1/e, 0)");
    if (z <= branch) return -1.0;

    const auto residual_ok = [z](double w) { return std::abs(w * std::exp(w) - z) <= 1e-13 * std::abs(z); };

    double w;
    if (z < -0.25) {
        const double q = -std::sqrt(2.0 * (std::numbers::e * z + 1.0));
        w = -1.0 + q - q * q / 3.0 + 11.0 / 72.0 * q * q * q;
    } else {
        const double l1 = std::log(-z);
        w = l1 - std::log(-l1);
    }
    for (int it = 0; it < 100 && std::isfinite(w) && w < -1.0; ++it) {
        const double ew = std::exp(w);
        const double f = w * ew - z;
        const double fp = ew * (w + 1.0);
        const double denom = fp - (w + 2.0) * f / (2.0 * w + 2.0);
        const double next = w - f / denom;
        if (!std::isfinite(next) || next >= -1.0) break;
        const bool done = std::abs(next - w) <= 1e-15 * std::abs(w);
        w = next;
        if (done) break;
    }
    if (std::isfinite(w) && w <= -1.0 && residual_ok(w)) return w;

    // Bisection: w e^w decreases from 0 to -1/e on (-inf, -1].
    double lo = -2.0;
    while (lo * std::exp(lo) <= z) lo *= 2.0;
    double hi = -1.0;
    for (int it = 0; it < 400 && hi - lo > 1e-16 * std::abs(lo); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (mid * std::exp(mid) > z ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline double gamma_delta(double delta) {
    return -1.0 / (1.0 + lambert_w_minus1(-delta * delta / (4.0 * std::numbers::e)));
}

inline long long episode_length_tight(const StochasticActionParams& sap, double L, double delta) {
    require(delta > 0.0 && delta < 1.0, "delta must lie in (0,1)");
    const double g_d = gamma_delta(delta);
    const double g = std::sqrt(2.0 * (1.0 + g_d) * std::log(2.0 / delta * std::sqrt(1.0 + 1.0 / g_d)));
    const double rho = sap.rho_x;
    const double root = g + std::sqrt(g + rho * sap.eps_h / (L * L));
    return std::max<long long>(1, stable_ceil(root * root / (4.0 * rho * rho)));
}

/// Burn-in round after which the minimum eigenvalue line is positive.
inline long long theorem2_t0(const BanditParams& p, const StochasticActionParams& sap) {
    const double rho = sap.rho_x;
    return stable_ceil(8.0 / (rho * rho) * std::log(2.0 / p.delta) - 2.0 * p.beta() / (p.m() * rho * p.L * p.L));
}

/**
 * @brief High-probability regret bound for stochastic action sets.
 *
 * c_T uses the deterministic bound log det V_T <= d log(alpha/m + T L^2/d).
 * Square roots of possibly negative burn-in terms are clamped at zero.
 */
inline double theorem2_bound(const BanditParams& p, const StochasticActionParams& sap, double T) {
    p.validate();
    sap.validate(p.d);
    const long long t0 = std::max<long long>(1, theorem2_t0(p, sap));
    if (T < static_cast<double>(t0)) throw config_error("theorem2_bound requires T >= t0");
    const double d = static_cast<double>(p.d);
    const double m = p.m();
    const double L = p.L;
    const double rho = sap.rho_x;
    const double ka = p.beta();
    const double logdet = d * std::log(p.alpha / m + T * L * L / d);
    const double cT = radius_c(p, logdet);
    const double a = ka - 4.0 * m * L * L / rho * std::log(2.0 / p.delta);
    const double tt0 = static_cast<double>(t0);
    const double c1 = (1.0 / (L * L)) * std::sqrt(std::max(0.0, a / (2.0 * m * rho)));
    const double c2 = (1.0 / (2.0 * L)) * std::sqrt(std::max(0.0, tt0 - 1.0 + 2.0 * a / (m * rho * L * L)));
    const double c3 = 0.5 * std::max(1.0, L * std::sqrt(m / ka)) *
                      std::sqrt(rho * d * tt0 * std::log(1.0 + m * L * L * tt0 / (d * ka)));
    const double C = c1 - c2 + c3;
    return 4.0 * cT * std::sqrt(2.0 * T / (m * rho)) * (1.0 + C / std::sqrt(T));
}

inline double ts_norm_bound(double sigma_xi, std::size_t d, double T, double delta) {
    const double dd = static_cast<double>(d);
    return sigma_xi * std::sqrt(2.0 * dd * std::log(2.0 * dd * T / delta));
}

/// max(1, L/sqrt(eps)) sqrt(2 t d log(1 + t L^2 / (d eps)))
inline double elliptic_potential_bound(double t, std::size_t d, double L, double eps) {
    const double dd = static_cast<double>(d);
    return std::max(1.0, L / std::sqrt(eps)) * std::sqrt(2.0 * t * dd * std::log1p(t * L * L / (dd * eps)));
}

}  // namespace riskbandit

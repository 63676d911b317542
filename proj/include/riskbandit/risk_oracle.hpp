#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "riskbandit/errors.hpp"
#include "riskbandit/loss.hpp"

namespace riskbandit {

class Distribution;

struct GaussianDist {
    double mu;
    double sigma;
};

/// Two-piece half-Gaussian law whose p-expectile equals mu.
struct ExpectileAsymmetricDist {
    double mu;
    double sigma;
    double p;
};

/// p * delta_a + (1 - p) * delta_b
struct TwoPointDist {
    double p;
    double a;
    double b;
};

struct ShiftedDist {
    std::shared_ptr<const Distribution> base;
    double c;
};

class Distribution {
public:
    using Variant = std::variant<GaussianDist, ExpectileAsymmetricDist, TwoPointDist, ShiftedDist>;

    static Distribution gaussian(double mu, double sigma) {
        require(sigma > 0.0, "gaussian sigma must be positive");
        return Distribution(GaussianDist{mu, sigma});
    }
    static Distribution expectile_asymmetric(double mu, double sigma, double p) {
        require(sigma > 0.0, "sigma must be positive");
        require(p > 0.0 && p < 1.0, "p must lie in (0,1)");
        return Distribution(ExpectileAsymmetricDist{mu, sigma, p});
    }
    static Distribution two_point(double p, double a, double b) {
        require(p >= 0.0 && p <= 1.0, "two-point weight must lie in [0,1]");
        return Distribution(TwoPointDist{p, a, b});
    }
    static Distribution shifted(const Distribution& base, double c) {
        return Distribution(ShiftedDist{std::make_shared<const Distribution>(base), c});
    }

    const Variant& get() const { return v_; }

private:
    explicit Distribution(Variant v) : v_(std::move(v)) {}
    Variant v_;
};

namespace detail {

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Density pieces on a bounded window or a finite atom list.
struct Law {
    std::vector<std::pair<double, double>> atoms;  // (weight, location)
    std::function<double(double)> density;
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> kinks;
    double center = 0.0;
    double scale = 1.0;
};

inline double asym_left_weight(double p) { return std::sqrt(p) / (std::sqrt(p) + std::sqrt(1.0 - p)); }

inline Law law_of(const Distribution& dist, double shift = 0.0) {
    Law law;
    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, GaussianDist>) {
                const double mu = d.mu + shift;
                const double s = d.sigma;
                law.density = [mu, s](double y) { return normal_pdf((y - mu) / s) / s; };
                law.lo = mu - 12.0 * s;
                law.hi = mu + 12.0 * s;
                law.center = mu;
                law.scale = s;
            } else if constexpr (std::is_same_v<T, ExpectileAsymmetricDist>) {
                const double mu = d.mu + shift;
                const double s = d.sigma;
                const double p = d.p;
                const double norm = std::sqrt(2.0 * p * (1.0 - p)) /
                                    (s * std::sqrt(std::numbers::pi) * (std::sqrt(p) + std::sqrt(1.0 - p)));
                law.density = [=](double y) {
                    const double w = y < mu ? 1.0 - p : p;
                    const double z = y - mu;
                    return norm * std::exp(-w * z * z / (2.0 * s * s));
                };
                law.lo = mu - 12.0 * s / std::sqrt(1.0 - p);
                law.hi = mu + 12.0 * s / std::sqrt(p);
                law.kinks.push_back(mu);
                law.center = mu;
                law.scale = s / std::sqrt(std::min(p, 1.0 - p));
            } else if constexpr (std::is_same_v<T, TwoPointDist>) {
                law.atoms = {{d.p, d.a + shift}, {1.0 - d.p, d.b + shift}};
                law.center = d.p * d.a + (1.0 - d.p) * d.b + shift;
                law.scale = std::max(std::abs(d.a - d.b), 1e-3);
            } else {
                law = law_of(*d.base, shift + d.c);
            }
        },
        dist.get());
    return law;
}

/// Integrate g over the law's window, splitting at kinks and at `extra`.
template <class G>
double expect(const Law& law, G&& g, double extra) {
    if (!law.atoms.empty()) {
        double s = 0.0;
        for (const auto& [w, y] : law.atoms)
            if (w > 0.0) s += w * g(y);
        return s;
    }
    std::vector<double> cuts{law.lo, law.hi};
    for (double k : law.kinks) cuts.push_back(k);
    cuts.push_back(extra);
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = std::max(cuts[i], law.lo);
        const double b = std::min(cuts[i + 1], law.hi);
        // Slivers left by a split point next to a kink contribute nothing measurable.
        if (!(b - a > 1e-12 * law.scale)) continue;
        // Narrow pieces are smooth at their own scale; adaptive refinement there only chases rounding.
        const unsigned depth = b - a < 1e-3 * law.scale ? 0 : 12;
        double err = 0.0;
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            [&](double y) { return law.density(y) * g(y); }, a, b, depth, 1e-13, &err);
    }
    return total;
}

}  // namespace detail

/// Mean of a distribution (closed form).
inline double mean(const Distribution& dist) {
    return std::visit(
        [](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, GaussianDist>) {
                return d.mu;
            } else if constexpr (std::is_same_v<T, ExpectileAsymmetricDist>) {
                const double w = detail::asym_left_weight(d.p);
                const double k = std::sqrt(2.0 / std::numbers::pi) * d.sigma;
                return d.mu + k * ((1.0 - w) / std::sqrt(d.p) - w / std::sqrt(1.0 - d.p));
            } else if constexpr (std::is_same_v<T, TwoPointDist>) {
                return d.p * d.a + (1.0 - d.p) * d.b;
            } else {
                return mean(*d.base) + d.c;
            }
        },
        dist.get());
}

/// Expectile of the standard normal: root of e((1-2p)Phi(e) + p) = (2p-1)phi(e).
inline double standard_normal_expectile(double p) {
    require(p > 0.0 && p < 1.0, "expectile level p must lie in (0,1)");
    if (p == 0.5) return 0.0;
    using detail::normal_cdf;
    using detail::normal_pdf;
    const auto foc = [p](double e) { return e * ((1.0 - 2.0 * p) * normal_cdf(e) + p) - (2.0 * p - 1.0) * normal_pdf(e); };
    const auto map = [p](double e) { return (2.0 * p - 1.0) * normal_pdf(e) / ((1.0 - 2.0 * p) * normal_cdf(e) + p); };

    double e = 0.0;
    double prev_step = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 200; ++it) {
        const double next = 0.5 * e + 0.5 * map(e);
        const double step = std::abs(next - e);
        e = next;
        if (step <= 1e-15 * (1.0 + std::abs(e))) return e;
        if (step > prev_step) break;  // oscillation
        prev_step = step;
    }

    double lo = -40.0;
    double hi = 40.0;
    if (!(foc(lo) < 0.0 && foc(hi) > 0.0)) throw convergence_error("gaussian expectile: no bracket");
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (foc(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline double gaussian_expectile(double p, double mu, double sigma) {
    require(sigma > 0.0, "sigma must be positive");
    return mu + sigma * standard_normal_expectile(p);
}

/// Location mu such that the p-expectile of N(mu, sigma^2) is zero.
inline double zero_expectile_mean(double p, double sigma) {
    require(sigma > 0.0, "sigma must be positive");
    return -sigma * standard_normal_expectile(p);
}

/// Entropic risk (1/gamma) log(p e^{gamma a} + (1-p) e^{gamma b}).
inline double entropic_two_point(double p, double a, double b, double gamma) {
    require(p >= 0.0 && p <= 1.0, "weight must lie in [0,1]");
    require(gamma > 0.0, "gamma must be positive");
    if (gamma * std::max(a, b) > kEntropicExponentCap) throw overflow_error("entropic exponent exceeds cap");
    if (p == 1.0) return a;
    if (p == 0.0) return b;
    const double ga = gamma * a;
    const double gb = gamma * b;
    const double top = std::max(ga, gb);
    return (top + std::log(p * std::exp(ga - top) + (1.0 - p) * std::exp(gb - top))) / gamma;
}

/// Expected loss E[L(Y, xi)] and its xi-derivative by quadrature.
inline std::pair<double, double> expected_loss(const LossModel& loss, const Distribution& dist, double xi) {
    const detail::Law law = detail::law_of(dist);
    const double v = detail::expect(law, [&](double y) { return loss.evaluate(y, xi).value; }, xi);
    const double g = detail::expect(law, [&](double y) { return loss.evaluate(y, xi).d1; }, xi);
    return {v, g};
}

/**
 * @brief Risk measure argmin_xi E[L(Y, xi)] by numerical integration.
 *
 * Brackets the minimizer by widening until the derivative changes sign,
 * then bisects on the derivative.
 */
inline double risk_by_quadrature(const LossModel& loss, const Distribution& dist) {
    if (!loss.strongly_convex()) throw not_strongly_convex("risk_by_quadrature needs a strongly convex loss");
    const detail::Law law = detail::law_of(dist);
    const auto slope = [&](double xi) {
        return detail::expect(law, [&](double y) { return loss.evaluate(y, xi).d1; }, xi);
    };

    double step = law.scale;
    double lo = law.center - step;
    double hi = law.center + step;
    int widen = 0;
    while (slope(lo) > 0.0) {
        lo -= step;
        step *= 2.0;
        if (++widen > 200) throw convergence_error("risk_by_quadrature: cannot bracket minimizer");
    }
    step = law.scale;
    while (slope(hi) < 0.0) {
        hi += step;
        step *= 2.0;
        if (++widen > 400) throw convergence_error("risk_by_quadrature: cannot bracket minimizer");
    }

    // The expected loss is convex in xi, so its derivative is monotone: bisect on its sign.
    double a = lo;
    double b = hi;
    for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
        const double mid = 0.5 * (a + b);
        (slope(mid) < 0.0 ? a : b) = mid;
    }
    return 0.5 * (a + b);
}

}  // namespace riskbandit

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>

#include "riskbandit/errors.hpp"

namespace riskbandit {

enum class LossKind { squared, expectile, entropic, quantile, generalized_moment };

inline constexpr double kEntropicExponentCap = 50.0;

struct LossValue {
    double value;
    double d1;  ///< dL/dxi
    double d2;  ///< d2L/dxi2
};

struct CurvatureBounds {
    double m;
    double M;
    double kappa() const { return M / m; }
};

/**
 * @brief Convex loss L(y, xi) eliciting a scalar risk measure.
 *
 * Potential losses are L(y, xi) = psi(y - xi). Instances are immutable.
 */
class LossModel {
public:
    static LossModel squared() { return LossModel(LossKind::squared); }

    static LossModel expectile(double p) {
        require(p > 0.0 && p < 1.0, "expectile level p must lie in (0,1)");
        LossModel l(LossKind::expectile);
        l.p_ = p;
        return l;
    }

    /// @param support_diameter bound on |y - xi| used for curvature bounds.
    static LossModel entropic(double gamma, double support_diameter = std::numeric_limits<double>::infinity()) {
        require(gamma > 0.0 && std::isfinite(gamma), "entropic rate gamma must be positive");
        require(support_diameter >= 0.0, "support diameter must be nonnegative");
        LossModel l(LossKind::entropic);
        l.gamma_ = gamma;
        l.diameter_ = support_diameter;
        return l;
    }

    static LossModel quantile(double p) {
        require(p > 0.0 && p < 1.0, "quantile level p must lie in (0,1)");
        LossModel l(LossKind::quantile);
        l.p_ = p;
        return l;
    }

    /// L(y, xi) = xi^2/2 - xi T(y); elicits E[T(Y)].
    static LossModel generalized_moment(std::function<double(double)> t, std::string name = "T") {
        require(static_cast<bool>(t), "generalized moment needs a statistic");
        LossModel l(LossKind::generalized_moment);
        l.stat_ = std::move(t);
        l.stat_name_ = std::move(name);
        return l;
    }

    LossKind kind() const { return kind_; }
    double level() const { return p_; }
    double gamma() const { return gamma_; }
    double support_diameter() const { return diameter_; }
    const std::string& statistic_name() const { return stat_name_; }
    bool strongly_convex() const { return kind_ != LossKind::quantile; }
    bool is_potential() const { return kind_ != LossKind::generalized_moment; }

    std::string name() const {
        switch (kind_) {
            case LossKind::squared: return "squared";
            case LossKind::expectile: return "expectile";
            case LossKind::entropic: return "entropic";
            case LossKind::quantile: return "quantile";
            case LossKind::generalized_moment: return "generalized_moment";
        }
        return "unknown";
    }

    LossValue evaluate(double y, double xi) const {
        if (!std::isfinite(y) || !std::isfinite(xi)) throw config_error("loss evaluated at a non-finite point");
        const double z = y - xi;
        switch (kind_) {
            case LossKind::squared:
                return {0.5 * z * z, -z, 1.0};
            case LossKind::expectile: {
                const double w = z < 0.0 ? 1.0 - p_ : p_;
                return {w * z * z, -2.0 * w * z, 2.0 * w};
            }
            case LossKind::entropic: {
                const double ez = gamma_ * z;
                if (ez > kEntropicExponentCap)
                    throw overflow_error("entropic exponent " + std::to_string(ez) + " exceeds cap");
                const double e = std::exp(ez);
                return {xi + std::expm1(ez) / gamma_, 1.0 - e, gamma_ * e};
            }
            case LossKind::quantile: {
                const double w = p_ - (z < 0.0 ? 1.0 : 0.0);
                return {w * z, -w, 0.0};
            }
            case LossKind::generalized_moment: {
                const double ty = stat_(y);
                return {0.5 * xi * xi - xi * ty, xi - ty, 1.0};
            }
        }
        throw invariant_error("unknown loss kind");
    }

    /// Loss value only; returns +inf instead of throwing on entropic overflow.
    double value_or_inf(double y, double xi) const {
        if (kind_ == LossKind::entropic && gamma_ * (y - xi) > kEntropicExponentCap)
            return std::numeric_limits<double>::infinity();
        return evaluate(y, xi).value;
    }

private:
    explicit LossModel(LossKind k) : kind_(k) {}

    LossKind kind_;
    double p_ = 0.5;
    double gamma_ = 1.0;
    double diameter_ = std::numeric_limits<double>::infinity();
    std::function<double(double)> stat_;
    std::string stat_name_;
};

inline LossValue evaluate(const LossModel& loss, double y, double xi) { return loss.evaluate(y, xi); }

inline CurvatureBounds curvature_bounds(const LossModel& loss) {
    switch (loss.kind()) {
        case LossKind::squared:
        case LossKind::generalized_moment:
            return {1.0, 1.0};
        case LossKind::expectile: {
            const double p = loss.level();
            return {2.0 * std::min(p, 1.0 - p), 2.0 * std::max(p, 1.0 - p)};
        }
        case LossKind::entropic: {
            const double d = loss.support_diameter();
            if (!std::isfinite(d)) throw config_error("entropic curvature bounds need a finite support diameter");
            const double g = loss.gamma();
            return {g * std::exp(-g * d), g * std::exp(g * d)};
        }
        case LossKind::quantile:
            throw not_strongly_convex("quantile loss is not strongly convex");
    }
    throw invariant_error("unknown loss kind");
}

}  // namespace riskbandit

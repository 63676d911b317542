#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "riskbandit/errors.hpp"
#include "riskbandit/linalg.hpp"
#include "riskbandit/loss.hpp"

namespace riskbandit {

/**
 * @brief Observation history with the design matrix V = sum X X^T + (alpha/m) I.
 *
 * The Cholesky factor and log-determinant of V are maintained by rank-one
 * updates. `alpha` is the ERM regularization; `m` the loss's lower curvature.
 */
class DesignState {
public:
    DesignState(std::size_t d, double alpha, double m = 1.0,
                double action_bound = std::numeric_limits<double>::infinity())
        : d_(d), alpha_(alpha), m_(m), bound_(action_bound) {
        require(d >= 1, "dimension must be positive");
        require(alpha > 0.0, "regularization alpha must be positive");
        require(m > 0.0, "curvature m must be positive");
        v_ = Matrix::identity(d, alpha / m);
        chol_.factor(v_);
        logdet_ = static_cast<double>(d) * std::log(alpha / m);
    }

    void update(std::span<const double> x, double y) {
        if (x.size() != d_) throw config_error("action dimension mismatch");
        if (!std::isfinite(y)) throw config_error("non-finite reward");
        const double n = norm2(x);
        if (n > bound_ * (1.0 + 1e-12)) throw config_error("action norm exceeds L");
        xs_.insert(xs_.end(), x.begin(), x.end());
        ys_.push_back(y);
        v_.add_outer(x);
        logdet_ += std::log1p(chol_.inv_quad(x));
        chol_.rank_one_update(x);
    }

    std::size_t dim() const { return d_; }
    std::size_t size() const { return ys_.size(); }
    double alpha() const { return alpha_; }
    double m() const { return m_; }
    double v_regularizer() const { return alpha_ / m_; }
    double action_bound() const { return bound_; }

    std::span<const double> x(std::size_t s) const { return {xs_.data() + s * d_, d_}; }
    double y(std::size_t s) const { return ys_[s]; }

    const Matrix& gram() const { return v_; }
    const Cholesky& factor() const { return chol_; }
    /// log det V by the matrix-determinant lemma (tracks the factor's own logdet).
    double logdet() const { return logdet_; }

private:
    std::size_t d_;
    double alpha_;
    double m_;
    double bound_;
    std::vector<double> xs_;
    std::vector<double> ys_;
    Matrix v_;
    Cholesky chol_;
    double logdet_;
};

struct Estimate {
    Vector theta_hat;
    Vector theta_bar;
    double grad_norm = 0.0;
    int iterations = 0;
    bool projected = false;
};

/// F(theta) = sum dL(Y, <theta, X>) X + alpha theta
inline Vector grad_F(const DesignState& st, const LossModel& loss, std::span<const double> theta) {
    Vector g = scaled(theta, st.alpha());
    for (std::size_t s = 0; s < st.size(); ++s) {
        const auto x = st.x(s);
        axpy(loss.evaluate(st.y(s), dot(theta, x)).d1, x, g);
    }
    return g;
}

/// H(theta) = sum d2L(Y, <theta, X>) X X^T + beta I
inline Matrix hess_H(const DesignState& st, const LossModel& loss, std::span<const double> theta, double beta) {
    Matrix h = Matrix::identity(st.dim(), beta);
    for (std::size_t s = 0; s < st.size(); ++s) {
        const auto x = st.x(s);
        h.add_outer(x, loss.evaluate(st.y(s), dot(theta, x)).d2);
    }
    return h;
}

/// Regularized empirical loss sum L(Y, <theta, X>) + alpha/2 |theta|^2; +inf on overflow.
inline double erm_objective(const DesignState& st, const LossModel& loss, std::span<const double> theta) {
    double j = 0.5 * st.alpha() * dot(theta, theta);
    for (std::size_t s = 0; s < st.size(); ++s) {
        j += loss.value_or_inf(st.y(s), dot(theta, st.x(s)));
        if (!std::isfinite(j)) return std::numeric_limits<double>::infinity();
    }
    return j;
}

inline double erm_tolerance(std::size_t t) { return 1e-9 * std::max(1.0, std::sqrt(static_cast<double>(t))); }

/// Damped Newton with Armijo backtracking on the regularized empirical loss.
inline Estimate erm_fit(const DesignState& st, const LossModel& loss, std::span<const double> warm_start) {
    if (!loss.strongly_convex()) throw not_strongly_convex("ERM needs a strongly convex loss");
    const std::size_t d = st.dim();
    Vector theta(warm_start.begin(), warm_start.end());
    if (theta.size() != d) theta.assign(d, 0.0);
    const double tol = erm_tolerance(st.size());

    double obj = erm_objective(st, loss, theta);
    if (!std::isfinite(obj)) {
        theta.assign(d, 0.0);
        obj = erm_objective(st, loss, theta);
    }

    Estimate est;
    for (int it = 0; it <= 100; ++it) {
        Vector g = scaled(theta, st.alpha());
        Matrix h = Matrix::identity(d, st.alpha());
        for (std::size_t s = 0; s < st.size(); ++s) {
            const auto x = st.x(s);
            const LossValue lv = loss.evaluate(st.y(s), dot(theta, x));
            axpy(lv.d1, x, g);
            h.add_outer(x, lv.d2);
        }
        const double gn = norm2(g);
        if (gn <= tol) {
            est.grad_norm = gn;
            est.iterations = it;
            break;
        }
        if (it == 100) throw convergence_error("ERM Newton solver did not converge");

        const Cholesky hc(h);
        Vector dir = hc.solve(g);
        for (double& v : dir) v = -v;
        const double slope = dot(g, dir);

        double step = 1.0;
        bool accepted = false;
        Vector trial(d);
        // Near the optimum the predicted decrease is below the objective's rounding; skip the search.
        const bool flat = -slope <= 1e-13 * (1.0 + std::abs(obj));
        for (int ls = 0; ls < 60 && !flat; ++ls) {
            for (std::size_t i = 0; i < d; ++i) trial[i] = theta[i] + step * dir[i];
            const double tobj = erm_objective(st, loss, trial);
            if (tobj <= obj + 1e-4 * step * slope) {
                theta = trial;
                obj = tobj;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // Objective differences are below rounding: take the full Newton step if it shrinks the gradient.
            for (std::size_t i = 0; i < d; ++i) trial[i] = theta[i] + dir[i];
            if (norm2(grad_F(st, loss, trial)) >= gn) {
                est.grad_norm = gn;
                est.iterations = it;
                break;
            }
            theta = trial;
            obj = erm_objective(st, loss, theta);
        }
    }
    est.theta_hat = theta;
    est.theta_bar = theta;
    return est;
}

/// Squared distance |F(theta) - f_ref|^2 in the H^{beta}(theta)^{-1} metric.
inline double projection_objective(const DesignState& st, const LossModel& loss, std::span<const double> theta,
                                   std::span<const double> f_ref, double beta) {
    Vector r = grad_F(st, loss, theta);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= f_ref[i];
    Cholesky hc;
    if (!hc.try_factor(hess_H(st, loss, theta, beta))) return std::numeric_limits<double>::infinity();
    return hc.inv_quad(r);
}

/**
 * @brief Projection of an ERM solution onto the ball |theta| <= s.
 *
 * Minimizes |F(theta) - F(theta_hat)| in the H^{beta}(theta)^{-1} metric
 * with projected gradient steps (Hessian frozen per outer iteration),
 * started from the radial rescaling. Returns the best iterate seen.
 */
inline Vector project(const DesignState& st, const LossModel& loss, std::span<const double> theta_hat, double s,
                      double beta) {
    Vector th(theta_hat.begin(), theta_hat.end());
    const double n = norm2(th);
    if (!std::isfinite(s) || n <= s) return th;

    const std::size_t d = st.dim();
    const Vector f_ref = grad_F(st, loss, th);
    Vector cur = project_ball(th, s);
    double cur_obj = projection_objective(st, loss, cur, f_ref, beta);
    Vector best = cur;
    double best_obj = cur_obj;

    for (int outer = 0; outer < 50; ++outer) {
        // Frozen metric: q(theta) = r^T Hb^{-1} r with r = F(theta) - f_ref, dr/dtheta = H^{alpha}(theta).
        const Matrix jac = hess_H(st, loss, cur, st.alpha());
        Cholesky hb;
        if (!hb.try_factor(hess_H(st, loss, cur, beta))) break;
        Vector r = grad_F(st, loss, cur);
        for (std::size_t i = 0; i < d; ++i) r[i] -= f_ref[i];
        const Vector w = hb.solve(r);
        Vector grad = jac * w;
        for (double& v : grad) v *= 2.0;
        const double gn = norm2(grad);
        if (gn == 0.0) break;

        // Initial step from a curvature estimate of the frozen quadratic.
        const Vector jg = jac * grad;
        const double curv = 2.0 * hb.inv_quad(jg);
        double step = curv > 0.0 ? (gn * gn) / curv : 1.0;
        bool improved = false;
        for (int ls = 0; ls < 40; ++ls) {
            Vector trial(d);
            for (std::size_t i = 0; i < d; ++i) trial[i] = cur[i] - step * grad[i];
            trial = project_ball(std::move(trial), s);
            const double tobj = projection_objective(st, loss, trial, f_ref, beta);
            if (tobj < cur_obj) {
                cur = std::move(trial);
                cur_obj = tobj;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (cur_obj < best_obj) {
            best = cur;
            best_obj = cur_obj;
        }
        if (!improved) break;
    }
    return best;
}

}  // namespace riskbandit

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "riskbandit/confidence.hpp"
#include "riskbandit/errors.hpp"
#include "riskbandit/estimator.hpp"
#include "riskbandit/linalg.hpp"
#include "riskbandit/loss.hpp"
#include "riskbandit/rng.hpp"

namespace riskbandit {

enum class BonusMetric { local, global };

/// Index of the largest score; ties go to the lowest index.
inline std::size_t argmax_lowest(std::span<const double> scores) {
    if (scores.empty()) throw config_error("empty action set");
    std::size_t best = 0;
    for (std::size_t k = 1; k < scores.size(); ++k)
        if (scores[k] > scores[best]) best = k;
    return best;
}

/// Round-robin arm indices, `pulls` passes over K arms.
inline std::vector<std::size_t> warmup_schedule(std::size_t k, std::size_t pulls) {
    require(k >= 1, "arm count must be positive");
    std::vector<std::size_t> out;
    out.reserve(k * pulls);
    for (std::size_t r = 0; r < pulls; ++r)
        for (std::size_t a = 0; a < k; ++a) out.push_back(a);
    return out;
}

class Policy {
public:
    virtual ~Policy() = default;
    /// Pick an index into `actions` at round t (1-based).
    virtual std::size_t choose(const std::vector<Vector>& actions, std::size_t t) = 0;
    virtual void observe(std::span<const double> x, double y) = 0;
    virtual std::string name() const = 0;
    /// Most recent ERM estimate, if the policy computes one.
    virtual const Estimate* estimate() const { return nullptr; }
};

/// Optimistic policy on a projected convex-risk ERM estimate.
class LinUcbCr : public Policy {
public:
    LinUcbCr(LossModel loss, BanditParams params, BonusMetric metric = BonusMetric::local, bool project_estimates = true)
        : loss_(std::move(loss)),
          params_(params),
          metric_(metric),
          project_(project_estimates),
          design_(params.d, params.alpha, params.m(), params.L),
          warm_(params.d, 0.0) {
        params_.validate();
    }

    std::size_t choose(const std::vector<Vector>& actions, std::size_t /*t*/) override {
        if (actions.empty()) throw config_error("empty action set");
        refit();
        const double c = radius_c(params_, design_.logdet());
        std::vector<double> scores(actions.size());
        if (metric_ == BonusMetric::local) {
            const Cholesky hc(hess_H(design_, loss_, est_.theta_bar, params_.beta()));
            for (std::size_t k = 0; k < actions.size(); ++k)
                scores[k] = dot(est_.theta_bar, actions[k]) + bonus(params_, c, hc.inv_norm(actions[k]));
        } else {
            for (std::size_t k = 0; k < actions.size(); ++k)
                scores[k] = dot(est_.theta_bar, actions[k]) +
                            bonus_global(params_, c, design_.factor().inv_norm(actions[k]));
        }
        return argmax_lowest(scores);
    }

    void observe(std::span<const double> x, double y) override { design_.update(x, y); }
    std::string name() const override { return "linucb_cr"; }
    const Estimate* estimate() const override { return &est_; }
    const DesignState& design() const { return design_; }
    const BanditParams& params() const { return params_; }

protected:
    void refit() {
        est_ = erm_fit(design_, loss_, warm_);
        warm_ = est_.theta_hat;
        if (project_) {
            est_.theta_bar = project(design_, loss_, est_.theta_hat, params_.S, params_.beta());
            est_.projected = est_.theta_bar != est_.theta_hat;
        }
    }

    LossModel loss_;
    BanditParams params_;
    BonusMetric metric_;
    bool project_;
    DesignState design_;
    Vector warm_;
    Estimate est_;
};

/// Mean-criterion LinUCB with Sherman-Morrison ridge updates.
class MeanLinUcb : public Policy {
public:
    explicit MeanLinUcb(BanditParams params) : params_(params) {
        params_.curvature = {1.0, 1.0};
        params_.validate();
        const std::size_t d = params_.d;
        vinv_ = Matrix::identity(d, 1.0 / params_.alpha);
        b_.assign(d, 0.0);
        theta_.assign(d, 0.0);
        logdet_ = static_cast<double>(d) * std::log(params_.alpha);
    }

    std::size_t choose(const std::vector<Vector>& actions, std::size_t /*t*/) override {
        if (actions.empty()) throw config_error("empty action set");
        const double c = radius_c(params_, logdet_);
        std::vector<double> scores(actions.size());
        for (std::size_t k = 0; k < actions.size(); ++k) {
            const Vector vx = vinv_ * actions[k];
            scores[k] = dot(theta_, actions[k]) + c * std::sqrt(std::max(0.0, dot(actions[k], vx)));
        }
        return argmax_lowest(scores);
    }

    void observe(std::span<const double> x, double y) override {
        const Vector vx = vinv_ * x;
        const double q = dot(x, vx);
        vinv_.add_outer(vx, -1.0 / (1.0 + q));
        logdet_ += std::log1p(q);
        axpy(y, x, b_);
        theta_ = vinv_ * b_;
    }

    std::string name() const override { return "linucb_mean"; }
    const Vector& theta() const { return theta_; }
    const Matrix& v_inverse() const { return vinv_; }
    double logdet() const { return logdet_; }

private:
    BanditParams params_;
    Matrix vinv_;
    Vector b_;
    Vector theta_;
    double logdet_;
};

/// Step-size schedule for the episodic OGD iterates.
struct OgdStep {
    enum class Rule { theory, experiment } rule = Rule::experiment;
    double scale = 0.1;  ///< experiment: scale / n
    double a = 1.0;      ///< theory: 3 / (a n), a = m eps_h

    double operator()(std::size_t n) const {
        const double nn = static_cast<double>(n);
        return rule == Rule::theory ? 3.0 / (a * nn) : scale / nn;
    }
};

struct OGDState {
    Vector theta;
    Vector avg;
    std::size_t n = 0;
    std::size_t h = 1;
    double radius = std::numeric_limits<double>::infinity();
    OgdStep step;
    bool keep_history = false;
    std::vector<Vector> kept;

    static OGDState start(std::size_t d, std::size_t h, double radius, OgdStep step) {
        OGDState s;
        s.theta.assign(d, 0.0);
        s.avg.assign(d, 0.0);
        s.h = h;
        s.radius = radius;
        s.step = step;
        return s;
    }
};

/// One projected OGD step on an episode's summed loss plus (alpha/N)|theta|^2/2.
inline void ogd_episode_update(OGDState& s, std::span<const Vector> xs, std::span<const double> ys,
                               const LossModel& loss, double alpha, std::size_t n_total) {
    if (xs.size() != s.h || ys.size() != s.h) throw config_error("episode length mismatch");
    require(n_total >= 1, "episode count must be positive");
    Vector g = scaled(s.theta, alpha / static_cast<double>(n_total));
    for (std::size_t k = 0; k < xs.size(); ++k) axpy(loss.evaluate(ys[k], dot(s.theta, xs[k])).d1, xs[k], g);
    const std::size_t n = s.n + 1;
    const double eps = s.step(n);
    Vector next = s.theta;
    axpy(-eps, g, next);
    next = project_ball(std::move(next), s.radius);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < next.size(); ++i) s.avg[i] += (next[i] - s.avg[i]) * inv;
    s.theta = std::move(next);
    s.n = n;
    if (s.keep_history) s.kept.push_back(s.theta);
}

struct OgdOptions {
    std::size_t h = 5;
    OgdStep step;
    std::size_t horizon = 1;
    bool theory_radius = false;  ///< add the OGD correction radius
    double eps_h = 0.1;
    double c_prime = 1.0;
};

/// Optimistic policy on the running average of episodic OGD iterates.
class LinUcbOgdCr : public Policy {
public:
    LinUcbOgdCr(LossModel loss, BanditParams params, OgdOptions opt)
        : loss_(std::move(loss)),
          params_(params),
          opt_(opt),
          design_(params.d, params.alpha, params.m(), params.L),
          ogd_(OGDState::start(params.d, opt.h, params.S, opt.step)) {
        params_.validate();
        require(opt.h >= 1, "episode length must be positive");
        require(opt.horizon >= 1, "horizon must be positive");
        n_total_ = std::max<std::size_t>(1, (opt.horizon - 1 + opt.h - 1) / opt.h);
    }

    std::size_t choose(const std::vector<Vector>& actions, std::size_t t) override {
        if (actions.empty()) throw config_error("empty action set");
        double c = radius_c(params_, design_.logdet());
        if (opt_.theory_radius && t >= opt_.h)
            c += ogd_radius(params_, static_cast<double>(t), static_cast<double>(opt_.horizon),
                            static_cast<double>(opt_.h), opt_.eps_h, opt_.c_prime);
        if (!h_valid_) {
            h_ = hess_H(design_, loss_, ogd_.avg, params_.beta());
            h_valid_ = true;
        }
        const Cholesky hc(h_);
        std::vector<double> scores(actions.size());
        for (std::size_t k = 0; k < actions.size(); ++k)
            scores[k] = dot(ogd_.avg, actions[k]) + c * hc.inv_norm(actions[k]);
        return argmax_lowest(scores);
    }

    void observe(std::span<const double> x, double y) override {
        design_.update(x, y);
        if (h_valid_) h_.add_outer(x, loss_.evaluate(y, dot(ogd_.avg, x)).d2);
        ep_x_.emplace_back(x.begin(), x.end());
        ep_y_.push_back(y);
        if (ep_x_.size() == opt_.h) {
            ogd_episode_update(ogd_, ep_x_, ep_y_, loss_, params_.alpha, n_total_);
            ep_x_.clear();
            ep_y_.clear();
            h_valid_ = false;
        }
    }

    std::string name() const override { return "linucb_ogd_cr"; }
    const OGDState& ogd() const { return ogd_; }
    OGDState& ogd() { return ogd_; }
    std::size_t episodes_total() const { return n_total_; }

private:
    LossModel loss_;
    BanditParams params_;
    OgdOptions opt_;
    DesignState design_;
    OGDState ogd_;
    std::size_t n_total_;
    std::vector<Vector> ep_x_;
    std::vector<double> ep_y_;
    Matrix h_;
    bool h_valid_ = false;
};

inline Vector standard_normal_vector(std::size_t d, Rng& rng) {
    Vector v(d);
    for (double& x : v) x = rng.normal();
    return v;
}

/// Thompson-style sampling around the projected ERM estimate.
class LinTsCr : public LinUcbCr {
public:
    LinTsCr(LossModel loss, BanditParams params, std::size_t horizon, Rng rng)
        : LinUcbCr(std::move(loss), params), horizon_(horizon), rng_(rng) {
        require(horizon >= 1, "horizon must be positive");
        inflated_ = params_;
        inflated_.delta = params_.delta / (4.0 * static_cast<double>(horizon));
    }

    std::size_t choose(const std::vector<Vector>& actions, std::size_t t) override {
        return choose_with_noise(actions, t, standard_normal_vector(params_.d, rng_));
    }

    /// Same as choose() with an explicit standard-normal draw `xi`.
    std::size_t choose_with_noise(const std::vector<Vector>& actions, std::size_t /*t*/, std::span<const double> xi) {
        if (actions.empty()) throw config_error("empty action set");
        refit();
        const Cholesky hc(hess_H(design_, loss_, est_.theta_bar, params_.beta()));
        const double c = radius_c(inflated_, design_.logdet());
        sampled_ = est_.theta_bar;
        axpy(c, hc.solve_upper(xi), sampled_);
        std::vector<double> scores(actions.size());
        for (std::size_t k = 0; k < actions.size(); ++k) scores[k] = dot(sampled_, actions[k]);
        return argmax_lowest(scores);
    }

    /// c H^{-1/2} xi with H = L L^T, via L^T u = xi.
    static Vector perturbation(const Cholesky& h, double c, std::span<const double> xi) {
        return scaled(h.solve_upper(xi), c);
    }

    std::string name() const override { return "lints_cr"; }
    const Vector& sampled_parameter() const { return sampled_; }

private:
    std::size_t horizon_;
    Rng rng_;
    BanditParams inflated_;
    Vector sampled_;
};

}  // namespace riskbandit

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "riskbandit/errors.hpp"
#include "riskbandit/linalg.hpp"
#include "riskbandit/loss.hpp"
#include "riskbandit/risk_oracle.hpp"
#include "riskbandit/rng.hpp"

namespace riskbandit {

enum class EnvKind { gaussian_expectile_arms, expectile_linear, bernoulli_entropic_arms, generic };

inline std::string to_string(EnvKind k) {
    switch (k) {
        case EnvKind::gaussian_expectile_arms: return "gaussian_expectile_arms";
        case EnvKind::expectile_linear: return "expectile_linear";
        case EnvKind::bernoulli_entropic_arms: return "bernoulli_entropic_arms";
        case EnvKind::generic: return "generic";
    }
    return "unknown";
}

/// mu - |N(0, s^2/(1-p))| w.p. sqrt(p)/(sqrt(p)+sqrt(1-p)), else mu + |N(0, s^2/p)|.
inline double sample_expectile_asymmetric(double mu, double sigma, double p, Rng& rng) {
    const double w = detail::asym_left_weight(p);
    const double u = rng.uniform();
    const double z = std::abs(rng.normal());
    if (u < w) return mu - z * sigma / std::sqrt(1.0 - p);
    return mu + z * sigma / std::sqrt(p);
}

inline double sample(const Distribution& dist, Rng& rng) {
    return std::visit(
        [&rng](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, GaussianDist>) {
                return rng.normal(d.mu, d.sigma);
            } else if constexpr (std::is_same_v<T, ExpectileAsymmetricDist>) {
                return sample_expectile_asymmetric(d.mu, d.sigma, d.p, rng);
            } else if constexpr (std::is_same_v<T, TwoPointDist>) {
                return rng.uniform() < d.p ? d.a : d.b;
            } else {
                return sample(*d.base, rng) + d.c;
            }
        },
        dist.get());
}

/**
 * @brief Simulated bandit whose per-action risk is linear in the action.
 *
 * Additive environments draw Y = <theta*, x> + eta_k with eta_k the k-th
 * arm's noise law; two-point environments draw Y from the arm law directly
 * and store the arm risks in theta*.
 */
class RiskEnvironment {
public:
    static RiskEnvironment gaussian_expectile_arms(double p = 0.1, std::vector<double> sigmas = {0.5, 3.0},
                                                   Vector theta = {1.0, 0.0}) {
        require(theta.size() == sigmas.size(), "one sigma per arm required");
        RiskEnvironment env(EnvKind::gaussian_expectile_arms, theta.size(), sigmas.size(), LossModel::expectile(p));
        env.theta_ = std::move(theta);
        env.fixed_actions_ = basis(env.d_);
        for (double s : sigmas) {
            env.arm_mu_.push_back(zero_expectile_mean(p, s));
            env.noise_.push_back(Distribution::gaussian(env.arm_mu_.back(), s));
        }
        env.check_zero_expectile();
        env.finish();
        return env;
    }

    /// @param sigma_x covariance scale of the Gaussian action perturbation.
    static RiskEnvironment expectile_linear(double p = 0.1, std::vector<double> sigmas = {0.5, 1.5},
                                            Vector theta = {0.9, 0.0, 1.0}, double sigma_x = 0.1) {
        require(sigmas.size() <= theta.size(), "more arms than dimensions");
        require(sigma_x >= 0.0, "sigma_x must be nonnegative");
        RiskEnvironment env(EnvKind::expectile_linear, theta.size(), sigmas.size(), LossModel::expectile(p));
        env.theta_ = std::move(theta);
        env.sigma_x_ = sigma_x;
        env.fixed_actions_ = basis(env.d_);
        env.fixed_actions_.resize(env.k_);
        for (double s : sigmas) {
            env.arm_mu_.push_back(0.0);
            env.noise_.push_back(Distribution::expectile_asymmetric(0.0, s, p));
        }
        env.check_zero_expectile();
        env.finish();
        return env;
    }

    /// Arms p_k delta_{a_k} + (1-p_k) delta_{b_k} on canonical actions.
    static RiskEnvironment bernoulli_entropic_arms(double gamma = 1.0,
                                                   std::vector<TwoPointDist> arms = {{0.5, 1.0, -1.0},
                                                                                     {0.25, 2.0, -2.0}},
                                                   double S = 1.0, double L = 1.0) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& a : arms) {
            lo = std::min({lo, a.a, a.b});
            hi = std::max({hi, a.a, a.b});
        }
        const double diameter = (hi - lo) + 2.0 * S * L;
        RiskEnvironment env(EnvKind::bernoulli_entropic_arms, arms.size(), arms.size(),
                            LossModel::entropic(gamma, diameter));
        env.fixed_actions_ = basis(env.d_);
        for (const auto& a : arms) {
            env.noise_.push_back(Distribution::two_point(a.p, a.a, a.b));
            env.theta_.push_back(entropic_two_point(a.p, a.a, a.b, gamma));
            env.arm_mu_.push_back(0.0);
        }
        env.direct_rewards_ = true;
        env.finish();
        return env;
    }

    /// Mean-linear bandit: K fresh uniform unit actions per round, Gaussian noise.
    static RiskEnvironment generic(Vector theta, std::size_t k, double noise_sigma) {
        require(k >= 1, "arm count must be positive");
        RiskEnvironment env(EnvKind::generic, theta.size(), k, LossModel::squared());
        env.theta_ = std::move(theta);
        for (std::size_t i = 0; i < k; ++i) {
            env.noise_.push_back(Distribution::gaussian(0.0, noise_sigma));
            env.arm_mu_.push_back(0.0);
        }
        env.finish();
        return env;
    }

    EnvKind kind() const { return kind_; }
    std::size_t dim() const { return d_; }
    std::size_t arms() const { return k_; }
    const LossModel& loss() const { return loss_; }
    const Vector& theta_star() const { return theta_; }
    bool stochastic_actions() const { return kind_ == EnvKind::expectile_linear || kind_ == EnvKind::generic; }
    double sigma_x() const { return sigma_x_; }
    const Distribution& noise(std::size_t arm) const { return noise_.at(arm); }
    double arm_location(std::size_t arm) const { return arm_mu_.at(arm); }
    double reward_min() const { return reward_min_; }
    double reward_max() const { return reward_max_; }

    /// Representative action of arm k (the fixed action, or the centre of its law).
    const Vector& arm_center(std::size_t arm) const { return centers_.at(arm); }
    double arm_risk(std::size_t arm) const { return dot(theta_, centers_.at(arm)); }
    double arm_mean(std::size_t arm) const { return mean_of(centers_.at(arm), arm); }
    std::size_t risk_optimal_arm() const { return best_of([this](std::size_t k) { return arm_risk(k); }); }
    std::size_t mean_optimal_arm() const { return best_of([this](std::size_t k) { return arm_mean(k); }); }
    bool deceptive() const { return risk_optimal_arm() != mean_optimal_arm(); }

    std::vector<Vector> sample_action_set(Rng& rng) const {
        switch (kind_) {
            case EnvKind::gaussian_expectile_arms:
            case EnvKind::bernoulli_entropic_arms:
                return fixed_actions_;
            case EnvKind::expectile_linear: {
                std::vector<Vector> out(k_, Vector(d_));
                const double s = std::sqrt(sigma_x_);
                for (std::size_t a = 0; a < k_; ++a) {
                    for (std::size_t i = 0; i < d_; ++i) out[a][i] = fixed_actions_[a][i] + s * rng.normal();
                    const double n = norm2(out[a]);
                    if (n == 0.0) throw invariant_error("degenerate action draw");
                    for (double& v : out[a]) v /= n;
                }
                return out;
            }
            case EnvKind::generic: {
                std::vector<Vector> out(k_, Vector(d_));
                for (auto& x : out) {
                    double n = 0.0;
                    while (n == 0.0) {
                        for (double& v : x) v = rng.normal();
                        n = norm2(x);
                    }
                    for (double& v : x) v /= n;
                }
                return out;
            }
        }
        throw invariant_error("unknown environment kind");
    }

    /// Reward for playing x, the `arm`-th element of the current action set.
    double sample_reward(std::span<const double> x, std::size_t arm, Rng& rng) const {
        if (direct_rewards_) return sample(noise_.at(arm), rng);
        return dot(theta_, x) + sample(noise_.at(arm), rng);
    }

    double true_risk(std::span<const double> x) const { return dot(theta_, x); }

    double mean_of(std::span<const double> x, std::size_t arm) const {
        if (direct_rewards_) return mean(noise_.at(arm));
        return dot(theta_, x) + mean(noise_.at(arm));
    }

private:
    RiskEnvironment(EnvKind kind, std::size_t d, std::size_t k, LossModel loss)
        : kind_(kind), d_(d), k_(k), loss_(std::move(loss)) {
        require(d >= 1 && k >= 1, "environment needs at least one dimension and one arm");
    }

    static std::vector<Vector> basis(std::size_t d) {
        std::vector<Vector> out(d, Vector(d, 0.0));
        for (std::size_t i = 0; i < d; ++i) out[i][i] = 1.0;
        return out;
    }

    template <class F>
    std::size_t best_of(F&& f) const {
        std::size_t best = 0;
        for (std::size_t k = 1; k < k_; ++k)
            if (f(k) > f(best)) best = k;
        return best;
    }

    void check_zero_expectile() const {
        for (const auto& n : noise_) {
            const double e = risk_by_quadrature(loss_, n);
            if (std::abs(e) > 1e-6) throw invariant_error("arm noise does not have zero expectile");
        }
    }

    void finish() {
        require(theta_.size() == d_, "theta* dimension mismatch");
        centers_ = fixed_actions_;
        if (centers_.empty()) {
            // Generic: no canonical arm identity; use theta* direction for every arm.
            const double n = norm2(theta_);
            Vector u = n > 0.0 ? scaled(theta_, 1.0 / n) : Vector(d_, 0.0);
            centers_.assign(k_, u);
        }
        reward_min_ = std::numeric_limits<double>::infinity();
        reward_max_ = -reward_min_;
        if (direct_rewards_) {
            for (const auto& n : noise_) {
                const auto& tp = std::get<TwoPointDist>(n.get());
                reward_min_ = std::min({reward_min_, tp.a, tp.b});
                reward_max_ = std::max({reward_max_, tp.a, tp.b});
            }
        }
    }

    EnvKind kind_;
    std::size_t d_;
    std::size_t k_;
    LossModel loss_;
    Vector theta_;
    std::vector<Vector> fixed_actions_;
    std::vector<Vector> centers_;
    std::vector<Distribution> noise_;
    std::vector<double> arm_mu_;
    double sigma_x_ = 0.0;
    bool direct_rewards_ = false;
    double reward_min_ = 0.0;
    double reward_max_ = 0.0;
};

/// Monte Carlo estimate of min_k lambda_min(E[X^k X^k^T]) for stochastic action sets.
inline double estimate_rho_x(const RiskEnvironment& env, std::size_t draws, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t d = env.dim();
    std::vector<Matrix> second(env.arms(), Matrix(d, d));
    for (std::size_t i = 0; i < draws; ++i) {
        const auto set = env.sample_action_set(rng);
        for (std::size_t k = 0; k < set.size(); ++k) second[k].add_outer(set[k], 1.0 / static_cast<double>(draws));
    }
    double rho = std::numeric_limits<double>::infinity();
    for (const auto& m : second) rho = std::min(rho, min_eigenvalue(m));
    return rho;
}

}  // namespace riskbandit

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "riskbandit/environments.hpp"

using namespace riskbandit;

namespace {

double asym_cdf(double y, double mu, double s, double p) {
    const double w = std::sqrt(p) / (std::sqrt(p) + std::sqrt(1 - p));
    const auto Phi = [](double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); };
    if (y < mu) return w * 2.0 * (1.0 - Phi((mu - y) * std::sqrt(1 - p) / s));
    return w + (1 - w) * (2.0 * Phi((y - mu) * std::sqrt(p) / s) - 1.0);
}

}  // namespace

TEST(Rng, ReproducibleAndSplit) {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        EXPECT_EQ(x, b.next_u64());
        EXPECT_NE(x, c.next_u64());
    }
    EXPECT_NE(split_seed(1, 0), split_seed(1, 1));
    EXPECT_NE(split_seed(1, 0), split_seed(2, 0));
    Rng u(7);
    for (int i = 0; i < 10000; ++i) {
        const double v = u.uniform();
        ASSERT_GT(v, 0.0);
        ASSERT_LT(v, 1.0);
    }
}

TEST(Samplers, AsymmetricLeftWeight) {
    EXPECT_NEAR(detail::asym_left_weight(0.1), 0.25, 1e-15);
    Rng rng(5);
    int left = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) left += sample_expectile_asymmetric(1.0, 2.0, 0.1, rng) < 1.0;
    EXPECT_NEAR(static_cast<double>(left) / n, 0.25, 0.005);
}

TEST(Samplers, AsymmetricKolmogorovSmirnov) {
    for (double s : {0.5, 1.5}) {
        Rng rng(split_seed(11, static_cast<std::uint64_t>(s * 10)));
        std::vector<double> xs(20000);
        for (double& x : xs) x = sample_expectile_asymmetric(0.0, s, 0.1, rng);
        std::sort(xs.begin(), xs.end());
        double dmax = 0.0;
        const double n = static_cast<double>(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double f = asym_cdf(xs[i], 0.0, s, 0.1);
            dmax = std::max({dmax, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
        }
        // 1% critical value 1.63 / sqrt(n).
        EXPECT_LT(dmax, 1.63 / std::sqrt(n));
    }
}

TEST(Samplers, MomentsAndEmpiricalExpectile) {
    const auto check = [](const Distribution& d, double mean_expect, double tol, std::uint64_t seed) {
        Rng rng(seed);
        double s = 0.0;
        const int n = 200000;
        for (int i = 0; i < n; ++i) s += sample(d, rng);
        EXPECT_NEAR(s / n, mean_expect, tol);
    };
    check(Distribution::gaussian(0.43, 0.5), 0.43, 0.005, 1);
    check(Distribution::expectile_asymmetric(0.0, 0.5, 0.1), oracle::kAsymMeanSigma05, 0.01, 2);
    check(Distribution::expectile_asymmetric(0.0, 1.5, 0.1), oracle::kAsymMeanSigma15, 0.02, 3);
    check(Distribution::two_point(0.25, 2.0, -2.0), -1.0, 0.02, 4);
    check(Distribution::shifted(Distribution::gaussian(0.0, 1.0), 3.0), 3.0, 0.01, 5);

    // Sample 0.1-expectile of the asymmetric noise is near zero.
    Rng rng(9);
    std::vector<double> ys(200000);
    for (double& y : ys) y = sample_expectile_asymmetric(0.0, 0.5, 0.1, rng);
    const auto foc = [&](double xi) {
        double g = 0.0;
        for (double y : ys) g += (y < xi ? 0.9 : 0.1) * (y - xi);
        return g;
    };
    double lo = -1, hi = 1;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (foc(mid) > 0 ? lo : hi) = mid;
    }
    EXPECT_NEAR(0.5 * (lo + hi), 0.0, 0.01);
}

TEST(Environment, GaussianExpectileArms) {
    const RiskEnvironment env = RiskEnvironment::gaussian_expectile_arms();
    EXPECT_EQ(env.dim(), 2u);
    EXPECT_NEAR(env.arm_location(0), oracle::kZeroExpectileMean01Sigma05, 1e-12);
    EXPECT_NEAR(env.arm_location(1), oracle::kZeroExpectileMean01Sigma3, 1e-11);
    EXPECT_EQ(env.arm_risk(0), 1.0);
    EXPECT_EQ(env.arm_risk(1), 0.0);
    EXPECT_NEAR(env.arm_mean(0), 1.0 + oracle::kZeroExpectileMean01Sigma05, 1e-12);
    EXPECT_EQ(env.risk_optimal_arm(), 0u);
    EXPECT_EQ(env.mean_optimal_arm(), 1u);
    EXPECT_TRUE(env.deceptive());
    for (std::size_t k = 0; k < 2; ++k)
        EXPECT_LE(std::abs(risk_by_quadrature(env.loss(), env.noise(k))), 1e-6);
}

TEST(Environment, ExpectileLinear) {
    const RiskEnvironment env = RiskEnvironment::expectile_linear();
    EXPECT_EQ(env.dim(), 3u);
    EXPECT_EQ(env.arms(), 2u);
    EXPECT_TRUE(env.stochastic_actions());
    EXPECT_NEAR(env.arm_risk(0), 0.9, 1e-15);
    EXPECT_EQ(env.arm_risk(1), 0.0);
    EXPECT_NEAR(env.arm_mean(0), 0.9 + oracle::kAsymMeanSigma05, 1e-12);
    EXPECT_NEAR(env.arm_mean(1), oracle::kAsymMeanSigma15, 1e-12);
    EXPECT_TRUE(env.deceptive());
    Rng rng(3);
    for (int i = 0; i < 100; ++i)
        for (const auto& x : env.sample_action_set(rng)) EXPECT_NEAR(norm2(x), 1.0, 1e-12);
    const double rho = estimate_rho_x(env, 5000, 1);
    EXPECT_GT(rho, 0.0);
    EXPECT_LE(rho, 1.0 / 3.0);
}

TEST(Environment, BernoulliEntropicArms) {
    const RiskEnvironment env = RiskEnvironment::bernoulli_entropic_arms();
    EXPECT_NEAR(env.theta_star()[0], oracle::kEntropicArm1, 1e-15);
    EXPECT_NEAR(env.theta_star()[1], oracle::kEntropicArm2, 1e-15);
    EXPECT_NEAR(env.arm_risk(1) - env.arm_risk(0), 0.2334, 1e-4);
    EXPECT_EQ(env.arm_mean(0), 0.0);
    EXPECT_EQ(env.arm_mean(1), -1.0);
    EXPECT_EQ(env.risk_optimal_arm(), 1u);
    EXPECT_EQ(env.mean_optimal_arm(), 0u);
    EXPECT_EQ(env.loss().support_diameter(), 6.0);
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double y = env.sample_reward(Vector{0.0, 1.0}, 1, rng);
        ASSERT_TRUE(y == 2.0 || y == -2.0);
    }
}

TEST(Environment, GenericActionsOnSphere) {
    const RiskEnvironment env = RiskEnvironment::generic({0.6, 0.8, 0.0}, 5, 0.1);
    Rng rng(4);
    const auto set = env.sample_action_set(rng);
    EXPECT_EQ(set.size(), 5u);
    for (const auto& x : set) EXPECT_NEAR(norm2(x), 1.0, 1e-12);
    EXPECT_NEAR(estimate_rho_x(env, 20000, 2), 1.0 / 3.0, 0.02);
}

TEST(Environment, RejectsMismatchedSizes) {
    EXPECT_THROW(RiskEnvironment::gaussian_expectile_arms(0.1, {0.5}, {1.0, 0.0}), config_error);
    EXPECT_THROW(RiskEnvironment::expectile_linear(0.1, {0.5, 1, 2, 3}, {1.0, 0.0, 0.0}), config_error);
}

TEST(Environment, RewardStreamsAreDeterministic) {
    const RiskEnvironment env = RiskEnvironment::expectile_linear();
    const auto draw = [&] {
        Rng a(10), r(11);
        std::vector<double> out;
        for (int t = 0; t < 50; ++t) {
            const auto set = env.sample_action_set(a);
            out.push_back(env.sample_reward(set[t % 2], t % 2, r));
        }
        return out;
    };
    EXPECT_EQ(draw(), draw());
}

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "riskbandit/policies.hpp"

using namespace riskbandit;

namespace {

BanditParams params_for(const LossModel& loss, std::size_t d, double S = 1.0) {
    BanditParams p;
    p.d = d;
    p.alpha = 0.1;
    p.delta = 0.1;
    p.sigma = 0.1;
    p.S = S;
    p.L = 1.0;
    p.curvature = curvature_bounds(loss);
    return p;
}

std::vector<Vector> random_actions(std::mt19937_64& gen, std::size_t k, std::size_t d) {
    std::normal_distribution<double> g;
    std::vector<Vector> out;
    for (std::size_t i = 0; i < k; ++i) {
        Vector x(d);
        for (double& v : x) v = g(gen);
        out.push_back(scaled(x, 1.0 / norm2(x)));
    }
    return out;
}

}  // namespace

TEST(Warmup, Schedules) {
    EXPECT_EQ(warmup_schedule(2, 5), (std::vector<std::size_t>{0, 1, 0, 1, 0, 1, 0, 1, 0, 1}));
    EXPECT_TRUE(warmup_schedule(4, 0).empty());
    EXPECT_EQ(warmup_schedule(3, 1), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Argmax, TiesAndScaleInvariance) {
    const std::vector<double> s{1.0, 3.0, 3.0, 2.0};
    EXPECT_EQ(argmax_lowest(s), 1u);
    std::vector<double> t = s;
    for (double& v : t) v *= 7.5;
    EXPECT_EQ(argmax_lowest(t), 1u);
    EXPECT_THROW(argmax_lowest(std::vector<double>{}), config_error);
}

TEST(LinUcbCr, IdenticalActionsPickFirst) {
    const LossModel loss = LossModel::expectile(0.1);
    LinUcbCr pol(loss, params_for(loss, 2));
    const std::vector<Vector> acts{{0.6, 0.8}, {0.6, 0.8}};
    EXPECT_EQ(pol.choose(acts, 1), 0u);
    EXPECT_THROW(pol.choose({}, 1), config_error);
}

TEST(LinUcbCr, EmptyHistoryPicksLongestAction) {
    const LossModel loss = LossModel::expectile(0.1);
    LinUcbCr pol(loss, params_for(loss, 2));
    const std::vector<Vector> acts{{0.3, 0.0}, {0.0, 0.9}, {0.5, 0.5}};
    EXPECT_EQ(pol.choose(acts, 1), 1u);
}

TEST(LinUcbCr, SquaredLossMatchesReferenceLinUcb) {
    const LossModel loss = LossModel::squared();
    const BanditParams p = params_for(loss, 3, 100.0);
    LinUcbCr cr(loss, p, BonusMetric::local, true);
    MeanLinUcb mean(p);
    std::mt19937_64 gen(123);
    std::normal_distribution<double> g;
    const Vector theta{0.5, -0.3, 0.2};
    std::vector<Vector> hist;
    std::vector<double> ys;
    for (std::size_t t = 1; t <= 100; ++t) {
        const auto acts = random_actions(gen, 5, 3);
        // Reference: dense ridge solve and explicit radius.
        const auto v = oracle::gram(hist, 3, p.alpha);
        const Vector th = oracle::ridge(hist, ys, 3, p.alpha);
        const double logdet = oracle::solve(v, {0, 0, 0}).second;
        const double c = 2.0 * (p.sigma * std::sqrt(2 * std::log(1 / p.delta) + 3 * std::log(1 / p.alpha) + logdet) +
                                std::sqrt(p.alpha) * p.S);
        std::vector<double> score;
        for (const auto& x : acts) {
            const auto w = oracle::solve(v, x).first;
            score.push_back(dot(th, x) + c * std::sqrt(dot(x, w)));
        }
        const std::size_t expect = argmax_lowest(score);
        const std::size_t a = cr.choose(acts, t);
        const std::size_t b = mean.choose(acts, t);
        ASSERT_EQ(a, expect) << "t=" << t;
        ASSERT_EQ(b, expect) << "t=" << t;
        const double y = dot(theta, acts[a]) + 0.1 * g(gen);
        cr.observe(acts[a], y);
        mean.observe(acts[a], y);
        hist.push_back(acts[a]);
        ys.push_back(y);
    }
}

TEST(MeanLinUcb, SingleObservationRidge) {
    const BanditParams p = params_for(LossModel::squared(), 2);
    MeanLinUcb m(p);
    m.observe(Vector{1.0, 0.0}, 2.0);
    EXPECT_NEAR(m.theta()[0], 2.0 / 1.1, 1e-14);
    EXPECT_EQ(m.theta()[1], 0.0);
    EXPECT_NEAR(m.v_inverse()(0, 0), 1 / 1.1, 1e-15);
    EXPECT_NEAR(m.logdet(), std::log(1.1) + std::log(0.1), 1e-15);
}

TEST(Ogd, HandComputedQuadraticStep) {
    OgdStep step;
    step.scale = 0.1;
    OGDState s = OGDState::start(2, 2, 10.0, step);
    s.theta = {0.5, -0.2};
    const std::vector<Vector> xs{{1.0, 0.0}, {0.6, 0.8}};
    const std::vector<double> ys{1.0, -0.5};
    const double alpha = 0.3;
    const std::size_t N = 4;
    // V theta0 - sum Y X + (alpha/N) theta0, V = [[1.36, 0.48], [0.48, 0.64]].
    const double g0 = 1.36 * 0.5 + 0.48 * -0.2 - (1.0 + -0.5 * 0.6) + alpha / N * 0.5;
    const double g1 = 0.48 * 0.5 + 0.64 * -0.2 - (-0.5 * 0.8) + alpha / N * -0.2;
    ogd_episode_update(s, xs, ys, LossModel::squared(), alpha, N);
    EXPECT_NEAR(s.theta[0], 0.5 - 0.1 * g0, 1e-15);
    EXPECT_NEAR(s.theta[1], -0.2 - 0.1 * g1, 1e-15);
    EXPECT_EQ(s.avg, s.theta);
    EXPECT_EQ(s.n, 1u);
    EXPECT_THROW(ogd_episode_update(s, std::span(xs).first(1), std::span(ys).first(1), LossModel::squared(), alpha, N),
                 config_error);
}

TEST(Ogd, ZeroGradientAndConstantIterates) {
    OGDState s = OGDState::start(2, 1, 1.0, OgdStep{});
    const std::vector<Vector> xs{{1.0, 0.0}};
    const std::vector<double> ys{0.0};
    for (int i = 0; i < 5; ++i) ogd_episode_update(s, xs, ys, LossModel::squared(), 1.0, 5);
    EXPECT_EQ(s.theta, (Vector{0.0, 0.0}));
    EXPECT_EQ(s.avg, (Vector{0.0, 0.0}));
}

TEST(Ogd, StepRules) {
    OgdStep th;
    th.rule = OgdStep::Rule::theory;
    th.a = 0.02;
    EXPECT_NEAR(th(1), 150.0, 1e-12);
    EXPECT_NEAR(th(3), 50.0, 1e-12);
    OgdStep ex;
    EXPECT_NEAR(ex(4), 0.025, 1e-17);
}

TEST(Ogd, AverageMatchesKeptListAndStaysInBall) {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> g;
    OgdStep step;
    step.scale = 5.0;
    OGDState s = OGDState::start(3, 4, 0.7, step);
    s.keep_history = true;
    const LossModel loss = LossModel::expectile(0.2);
    for (int n = 0; n < 60; ++n) {
        std::vector<Vector> xs;
        std::vector<double> ys;
        for (int k = 0; k < 4; ++k) {
            Vector x{g(gen), g(gen), g(gen)};
            xs.push_back(scaled(x, 1.0 / norm2(x)));
            ys.push_back(3.0 * g(gen));
        }
        ogd_episode_update(s, xs, ys, loss, 0.1, 60);
        EXPECT_LE(norm2(s.theta), 0.7 + 1e-12);
        EXPECT_LE(norm2(s.avg), 0.7 + 1e-12);
        Vector mean(3, 0.0);
        for (const auto& v : s.kept) axpy(1.0 / static_cast<double>(s.kept.size()), v, mean);
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(s.avg[i], mean[i], 1e-12);
    }
}

TEST(LinUcbOgdCr, AverageFrozenWithinEpisode) {
    const LossModel loss = LossModel::expectile(0.1);
    OgdOptions opt;
    opt.h = 5;
    opt.horizon = 200;
    LinUcbOgdCr pol(loss, params_for(loss, 2), opt);
    EXPECT_EQ(pol.episodes_total(), 40u);
    std::mt19937_64 gen(9);
    std::normal_distribution<double> g;
    Vector prev = pol.ogd().avg;
    for (std::size_t t = 1; t <= 60; ++t) {
        const auto acts = random_actions(gen, 3, 2);
        const std::size_t a = pol.choose(acts, t);
        if (t <= 5) {
            EXPECT_EQ(pol.ogd().avg, (Vector{0.0, 0.0}));
        }
        if ((t - 1) % 5 != 0) {
            EXPECT_EQ(pol.ogd().avg, prev);
        }
        prev = pol.ogd().avg;
        pol.observe(acts[a], 0.3 * acts[a][0] + g(gen));
    }
    EXPECT_EQ(pol.ogd().n, 12u);
}

TEST(LinTsCr, ZeroNoiseIsGreedy) {
    const LossModel loss = LossModel::expectile(0.1);
    LinTsCr ts(loss, params_for(loss, 2), 100, Rng(1));
    std::mt19937_64 gen(10);
    std::normal_distribution<double> g;
    for (std::size_t t = 1; t <= 30; ++t) {
        const auto acts = random_actions(gen, 4, 2);
        const Vector zero(2, 0.0);
        const std::size_t a = ts.choose_with_noise(acts, t, zero);
        std::vector<double> scores;
        for (const auto& x : acts) scores.push_back(dot(ts.estimate()->theta_bar, x));
        EXPECT_EQ(a, argmax_lowest(scores));
        EXPECT_EQ(ts.sampled_parameter(), ts.estimate()->theta_bar);
        ts.observe(acts[a], 0.5 * acts[a][0] - 0.2 * acts[a][1] + g(gen));
    }
}

TEST(LinTsCr, PerturbationCovariance) {
    Matrix h(3, 3);
    h(0, 0) = 4.0; h(1, 1) = 2.0; h(2, 2) = 1.5;
    h(0, 1) = h(1, 0) = 0.8; h(1, 2) = h(2, 1) = -0.4;
    const Cholesky hc(h);
    const double c = 1.7;
    Rng rng(2024);
    Matrix cov(3, 3);
    const int n = 10000;
    for (int i = 0; i < n; ++i) cov.add_outer(LinTsCr::perturbation(hc, c, standard_normal_vector(3, rng)), 1.0 / n);
    const Matrix inv = hc.inverse();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            const double e = c * c * inv(i, j);
            num += (cov(i, j) - e) * (cov(i, j) - e);
            den += e * e;
        }
    EXPECT_LE(std::sqrt(num / den), 0.05);
}

TEST(LinTsCr, NormEventFrequency) {
    const double delta = 0.1;
    const double bound = ts_norm_bound(1.0, 3, 100, delta);
    int exceed = 0;
    for (std::uint64_t r = 0; r < 1000; ++r) {
        Rng rng(split_seed(99, r));
        bool hit = false;
        for (int t = 0; t < 100; ++t) hit |= norm2(standard_normal_vector(3, rng)) > bound;
        exceed += hit;
    }
    EXPECT_LE(exceed / 1000.0, delta + 0.05);
}

TEST(Policies, DeterministicGivenSeed) {
    const LossModel loss = LossModel::expectile(0.1);
    const auto run = [&] {
        LinTsCr ts(loss, params_for(loss, 2), 50, Rng(77));
        std::mt19937_64 gen(5);
        std::vector<std::size_t> seq;
        for (std::size_t t = 1; t <= 50; ++t) {
            const auto acts = random_actions(gen, 3, 2);
            seq.push_back(ts.choose(acts, t));
            ts.observe(acts[seq.back()], acts[seq.back()][1]);
        }
        return seq;
    };
    EXPECT_EQ(run(), run());
}

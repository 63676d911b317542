#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "riskbandit/confidence.hpp"
#include "riskbandit/environments.hpp"
#include "riskbandit/errors.hpp"
#include "riskbandit/estimator.hpp"
#include "riskbandit/policies.hpp"
#include "riskbandit/risk_oracle.hpp"
#include "riskbandit/rng.hpp"

namespace riskbandit {

inline constexpr const char* kCodeVersion = "0.1.0";

using json = nlohmann::json;

inline const std::vector<std::string>& known_algorithms() {
    static const std::vector<std::string> names{"linucb_mean", "linucb_cr", "linucb_ogd_cr", "lints_cr"};
    return names;
}

struct ExperimentConfig {
    std::string experiment = "exp1";
    std::vector<std::string> algorithms{"linucb_mean", "linucb_cr", "linucb_ogd_cr"};
    std::size_t T = 1500;
    std::size_t replications = 50;
    std::uint64_t base_seed = 1;
    std::size_t workers = 0;  ///< 0: hardware concurrency

    double sigma = 0.1;
    double alpha = 0.1;
    double delta = 0.1;
    double S = 2.0;
    double L = 1.0;
    double p = 0.1;
    double gamma = 1.0;
    std::size_t h = 5;
    double step_scale = 0.1;
    std::size_t warmup_pulls = 5;
    BonusMetric bonus_metric = BonusMetric::local;
    bool theory_mode = false;
    bool strict_theory = false;
    std::string episode_rule = "simple";
    double eps_h = 0.1;
    std::optional<double> rho_x;
    double rho_safety = 0.5;
    double ogd_constant = 1.0;

    // Environment overrides (empty = experiment defaults).
    std::vector<double> arm_sigmas;
    Vector theta_star;
    double sigma_x = 0.1;
    std::vector<TwoPointDist> two_point_arms;
    std::size_t generic_arms = 4;
    double noise_sigma = 0.1;

    bool diag_elliptic = true;
    bool diag_eigen = true;
    std::vector<std::string> coverage_algorithms{"linucb_cr"};
    std::optional<double> coverage_sigma;

    std::string output_dir;

    /// Canonical experiment identifier.
    std::string env_name() const {
        if (experiment == "exp1" || experiment == "gaussian_expectile_arms") return "gaussian_expectile_arms";
        if (experiment == "exp2" || experiment == "expectile_linear") return "expectile_linear";
        if (experiment == "exp3" || experiment == "bernoulli_entropic_arms") return "bernoulli_entropic_arms";
        if (experiment == "generic") return "generic";
        throw config_error("unknown experiment '" + experiment + "'");
    }
};

namespace detail {

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

inline std::size_t line_of_key(const std::string& text, const std::string& key) {
    const auto pos = text.find("\"" + key + "\"");
    return pos == std::string::npos ? 0 : line_of_offset(text, pos);
}

struct ConfigReader {
    const std::string& text;
    const json& doc;

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        const std::size_t line = line_of_key(text, key);
        std::string where = line ? "line " + std::to_string(line) + ": " : "";
        throw config_error(where + "'" + key + "': " + msg);
    }

    template <class T>
    void get(const json& obj, const std::string& key, T& out) const {
        if (!obj.contains(key) || obj.at(key).is_null()) return;
        try {
            out = obj.at(key).get<T>();
        } catch (const json::exception& e) {
            fail(key, std::string("wrong type (") + e.what() + ")");
        }
    }

    void get_size(const json& obj, const std::string& key, std::size_t& out) const {
        if (!obj.contains(key) || obj.at(key).is_null()) return;
        const json& v = obj.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0) fail(key, "expected a nonnegative integer");
        out = v.get<std::size_t>();
    }
};

}  // namespace detail

inline void validate(const ExperimentConfig& c, const std::string& text = "") {
    const auto fail = [&](const std::string& key, const std::string& msg) {
        const std::size_t line = text.empty() ? 0 : detail::line_of_key(text, key);
        throw config_error((line ? "line " + std::to_string(line) + ": " : std::string()) + "'" + key + "': " + msg);
    };
    try {
        (void)c.env_name();
    } catch (const config_error& e) {
        fail("experiment", e.what());
    }
    if (c.algorithms.empty()) fail("algorithms", "at least one algorithm is required");
    for (const auto& a : c.algorithms)
        if (std::find(known_algorithms().begin(), known_algorithms().end(), a) == known_algorithms().end())
            fail("algorithms", "unknown algorithm '" + a + "'");
    if (c.replications < 1) fail("replications", "must be at least 1");
    if (c.T < 1) fail("T", "must be at least 1");
    if (!(c.sigma >= 0.0)) fail("sigma", "must be nonnegative");
    if (!(c.alpha > 0.0)) fail("alpha", "must be positive");
    if (!(c.delta > 0.0 && c.delta < 1.0)) fail("delta", "must lie in (0,1)");
    if (!(c.S > 0.0)) fail("S", "must be positive");
    if (!(c.L > 0.0)) fail("L", "must be positive");
    if (!(c.p > 0.0 && c.p < 1.0)) fail("p", "must lie in (0,1)");
    if (!(c.gamma > 0.0)) fail("gamma", "must be positive");
    if (c.h < 1) fail("h", "must be at least 1");
    if (!(c.step_scale > 0.0)) fail("step_scale", "must be positive");
    if (c.episode_rule != "simple" && c.episode_rule != "tight") fail("episode_rule", "must be 'simple' or 'tight'");
    if (c.strict_theory && c.alpha < std::max(1.0, c.L * c.L)) fail("alpha", "strict theory requires alpha >= max(1, L^2)");
    if (c.rho_x && !(*c.rho_x > 0.0)) fail("rho_x", "must be positive");
    if (!(c.rho_safety > 0.0 && c.rho_safety <= 1.0)) fail("rho_safety", "must lie in (0,1]");
}

/// Experiment-specific defaults applied before user keys.
inline ExperimentConfig defaults_for(const std::string& experiment) {
    ExperimentConfig c;
    c.experiment = experiment;
    const std::string env = c.env_name();
    if (env == "bernoulli_entropic_arms") c.sigma = 1.0;
    return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw config_error("line " + std::to_string(detail::line_of_offset(text, e.byte ? e.byte - 1 : 0)) +
                           ": JSON syntax error: " + e.what());
    }
    if (!doc.is_object()) throw config_error("line 1: configuration must be a JSON object");
    const detail::ConfigReader r{text, doc};

    std::string experiment = "exp1";
    r.get(doc, "experiment", experiment);
    ExperimentConfig c;
    try {
        c = defaults_for(experiment);
    } catch (const config_error& e) {
        r.fail("experiment", e.what());
    }

    static const std::vector<std::string> allowed{
        "experiment", "algorithms", "T", "replications", "base_seed", "workers", "sigma", "alpha", "lambda",
        "delta", "S", "L", "p", "gamma", "h", "step_scale", "warmup_pulls", "bonus_metric", "theory_mode",
        "strict_theory", "episode_rule", "epsilon_h", "rho_x", "rho_safety", "ogd_constant", "environment",
        "diagnostics", "output_dir"};
    for (const auto& [key, _] : doc.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) r.fail(key, "unknown key");

    r.get(doc, "algorithms", c.algorithms);
    r.get_size(doc, "T", c.T);
    r.get_size(doc, "replications", c.replications);
    r.get(doc, "base_seed", c.base_seed);
    r.get_size(doc, "workers", c.workers);
    r.get(doc, "sigma", c.sigma);
    r.get(doc, "alpha", c.alpha);
    r.get(doc, "lambda", c.alpha);
    r.get(doc, "delta", c.delta);
    r.get(doc, "S", c.S);
    r.get(doc, "L", c.L);
    r.get(doc, "p", c.p);
    r.get(doc, "gamma", c.gamma);
    r.get_size(doc, "h", c.h);
    r.get(doc, "step_scale", c.step_scale);
    r.get_size(doc, "warmup_pulls", c.warmup_pulls);
    if (doc.contains("bonus_metric")) {
        std::string m;
        r.get(doc, "bonus_metric", m);
        if (m == "local") c.bonus_metric = BonusMetric::local;
        else if (m == "global") c.bonus_metric = BonusMetric::global;
        else r.fail("bonus_metric", "must be 'local' or 'global'");
    }
    r.get(doc, "theory_mode", c.theory_mode);
    r.get(doc, "strict_theory", c.strict_theory);
    r.get(doc, "episode_rule", c.episode_rule);
    r.get(doc, "epsilon_h", c.eps_h);
    if (doc.contains("rho_x") && !doc.at("rho_x").is_null()) {
        double v = 0.0;
        r.get(doc, "rho_x", v);
        c.rho_x = v;
    }
    r.get(doc, "rho_safety", c.rho_safety);
    r.get(doc, "ogd_constant", c.ogd_constant);
    r.get(doc, "output_dir", c.output_dir);

    if (doc.contains("environment")) {
        const json& e = doc.at("environment");
        if (!e.is_object()) r.fail("environment", "must be an object");
        r.get(e, "sigmas", c.arm_sigmas);
        r.get(e, "theta_star", c.theta_star);
        r.get(e, "sigma_x", c.sigma_x);
        r.get_size(e, "arms", c.generic_arms);
        r.get(e, "noise_sigma", c.noise_sigma);
        if (e.contains("two_point_arms")) {
            const json& arms = e.at("two_point_arms");
            if (!arms.is_array()) r.fail("two_point_arms", "must be an array of [p, a, b]");
            for (const auto& a : arms) {
                if (!a.is_array() || a.size() != 3) r.fail("two_point_arms", "each arm must be [p, a, b]");
                c.two_point_arms.push_back({a[0].get<double>(), a[1].get<double>(), a[2].get<double>()});
            }
        }
    }
    if (doc.contains("diagnostics")) {
        const json& d = doc.at("diagnostics");
        if (!d.is_object()) r.fail("diagnostics", "must be an object");
        r.get(d, "elliptic", c.diag_elliptic);
        r.get(d, "eigen", c.diag_eigen);
        r.get(d, "coverage", c.coverage_algorithms);
        if (d.contains("coverage_sigma") && !d.at("coverage_sigma").is_null()) {
            double v = 0.0;
            r.get(d, "coverage_sigma", v);
            c.coverage_sigma = v;
        }
    }
    validate(c, text);
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

inline RiskEnvironment make_environment(const ExperimentConfig& c) {
    const std::string env = c.env_name();
    if (env == "gaussian_expectile_arms")
        return RiskEnvironment::gaussian_expectile_arms(c.p, c.arm_sigmas.empty() ? std::vector<double>{0.5, 3.0} : c.arm_sigmas,
                                                        c.theta_star.empty() ? Vector{1.0, 0.0} : c.theta_star);
    if (env == "expectile_linear")
        return RiskEnvironment::expectile_linear(c.p, c.arm_sigmas.empty() ? std::vector<double>{0.5, 1.5} : c.arm_sigmas,
                                                 c.theta_star.empty() ? Vector{0.9, 0.0, 1.0} : c.theta_star,
                                                 c.sigma_x);
    if (env == "bernoulli_entropic_arms") {
        auto arms = c.two_point_arms.empty() ? std::vector<TwoPointDist>{{0.5, 1.0, -1.0}, {0.25, 2.0, -2.0}}
                                             : c.two_point_arms;
        return RiskEnvironment::bernoulli_entropic_arms(c.gamma, arms, c.S, c.L);
    }
    return RiskEnvironment::generic(c.theta_star.empty() ? Vector{1.0, 0.0, 0.0} : c.theta_star, c.generic_arms,
                                    c.noise_sigma);
}

inline BanditParams bandit_params(const ExperimentConfig& c, const RiskEnvironment& env) {
    BanditParams p;
    p.d = env.dim();
    p.alpha = c.alpha;
    p.delta = c.delta;
    p.sigma = c.sigma;
    p.S = c.S;
    p.L = c.L;
    p.curvature = curvature_bounds(env.loss());
    return p;
}

/// rho_x from the config, or a Monte Carlo estimate scaled by the safety factor.
inline std::optional<double> resolve_rho_x(const ExperimentConfig& c, const RiskEnvironment& env) {
    if (c.rho_x) return c.rho_x;
    if (!env.stochastic_actions()) return std::nullopt;
    return c.rho_safety * estimate_rho_x(env, 20000, split_seed(c.base_seed, 0xD1A6ULL));
}

inline std::size_t resolve_h(const ExperimentConfig& c, const RiskEnvironment& env) {
    if (!c.theory_mode) return c.h;
    const auto rho = resolve_rho_x(c, env);
    if (!rho) throw config_error("theory_mode requires a stochastic-action environment");
    const StochasticActionParams sap{std::min(*rho, 1.0 / static_cast<double>(env.dim())), c.eps_h};
    const long long h = c.episode_rule == "tight" ? episode_length_tight(sap, c.L, c.delta)
                                                  : episode_length_simple(sap, c.L, c.delta);
    return static_cast<std::size_t>(h);
}

inline std::unique_ptr<Policy> make_policy(const ExperimentConfig& c, const RiskEnvironment& env,
                                           const std::string& algorithm, std::size_t h, std::uint64_t seed) {
    const BanditParams p = bandit_params(c, env);
    if (algorithm == "linucb_mean") return std::make_unique<MeanLinUcb>(p);
    if (algorithm == "linucb_cr") return std::make_unique<LinUcbCr>(env.loss(), p, c.bonus_metric);
    if (algorithm == "linucb_ogd_cr") {
        OgdOptions o;
        o.h = h;
        o.horizon = c.T;
        o.theory_radius = c.theory_mode;
        o.eps_h = c.eps_h;
        o.c_prime = c.ogd_constant;
        if (c.theory_mode) {
            o.step.rule = OgdStep::Rule::theory;
            o.step.a = p.m() * c.eps_h;
        } else {
            o.step.rule = OgdStep::Rule::experiment;
            o.step.scale = c.step_scale;
        }
        return std::make_unique<LinUcbOgdCr>(env.loss(), p, o);
    }
    if (algorithm == "lints_cr") return std::make_unique<LinTsCr>(env.loss(), p, c.T, Rng(seed));
    throw config_error("unknown algorithm '" + algorithm + "'");
}

/// Sub-Gaussian scale used by the confidence-set coverage check.
inline double coverage_sigma(const ExperimentConfig& c, const RiskEnvironment& env) {
    if (c.coverage_sigma) return *c.coverage_sigma;
    const CurvatureBounds cb = curvature_bounds(env.loss());
    double s = 0.0;
    for (std::size_t k = 0; k < env.arms(); ++k) s = std::max(s, detail::law_of(env.noise(k)).scale);
    return cb.M * s / std::sqrt(cb.m);
}

struct RegretTrace {
    std::string algorithm;
    std::size_t replication = 0;
    std::vector<double> cum_regret;
    double wall_clock_seconds = 0.0;
    bool elliptic_ok = true;
    std::optional<bool> eigen_ok;
    std::optional<bool> coverage_ok;
    std::size_t elliptic_violations = 0;
};

struct PercentileCurves {
    std::vector<double> p5, p25, p50, p75, p95;
};

struct AlgorithmSummary {
    std::string algorithm;
    PercentileCurves curves;
    double runtime_mean = 0.0;
    double runtime_std = 0.0;
    std::size_t replications = 0;
    std::size_t elliptic_failures = 0;
    std::optional<double> coverage_failure_rate;
    std::optional<double> eigen_failure_rate;
};

struct SummaryStats {
    std::vector<AlgorithmSummary> algorithms;
    std::vector<std::optional<double>> theory_bound;  ///< empty unless theory mode applies
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<RegretTrace> traces;  ///< ordered by algorithm, then replication
    SummaryStats summary;
    json derived;
};

/// Percentile of sorted data: linear interpolation, nearest rank below 20 samples.
inline double percentile_sorted(const std::vector<double>& v, double q) {
    if (v.empty()) throw config_error("percentile of empty sample");
    const std::size_t n = v.size();
    if (n < 20) {
        std::size_t rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(n)));
        rank = std::clamp<std::size_t>(rank, 1, n);
        return v[rank - 1];
    }
    const double pos = q / 100.0 * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

/// Per-round percentile curves and runtime moments for one algorithm's traces.
inline AlgorithmSummary aggregate(const std::vector<const RegretTrace*>& traces) {
    if (traces.empty()) throw config_error("aggregate needs at least one trace");
    AlgorithmSummary s;
    s.algorithm = traces.front()->algorithm;
    s.replications = traces.size();
    const std::size_t T = traces.front()->cum_regret.size();
    for (const auto* t : traces)
        if (t->cum_regret.size() != T) throw invariant_error("traces have different lengths");
    std::vector<double> col(traces.size());
    for (auto* c : {&s.curves.p5, &s.curves.p25, &s.curves.p50, &s.curves.p75, &s.curves.p95}) c->resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t r = 0; r < traces.size(); ++r) col[r] = traces[r]->cum_regret[t];
        std::sort(col.begin(), col.end());
        s.curves.p5[t] = percentile_sorted(col, 5);
        s.curves.p25[t] = percentile_sorted(col, 25);
        s.curves.p50[t] = percentile_sorted(col, 50);
        s.curves.p75[t] = percentile_sorted(col, 75);
        s.curves.p95[t] = percentile_sorted(col, 95);
    }
    double sum = 0.0;
    for (const auto* t : traces) sum += t->wall_clock_seconds;
    s.runtime_mean = sum / static_cast<double>(traces.size());
    double ss = 0.0;
    for (const auto* t : traces) ss += (t->wall_clock_seconds - s.runtime_mean) * (t->wall_clock_seconds - s.runtime_mean);
    s.runtime_std = traces.size() > 1 ? std::sqrt(ss / static_cast<double>(traces.size() - 1)) : 0.0;

    std::size_t cov_n = 0, cov_fail = 0, eig_n = 0, eig_fail = 0;
    for (const auto* t : traces) {
        if (!t->elliptic_ok) ++s.elliptic_failures;
        if (t->coverage_ok) {
            ++cov_n;
            if (!*t->coverage_ok) ++cov_fail;
        }
        if (t->eigen_ok) {
            ++eig_n;
            if (!*t->eigen_ok) ++eig_fail;
        }
    }
    if (cov_n) s.coverage_failure_rate = static_cast<double>(cov_fail) / static_cast<double>(cov_n);
    if (eig_n) s.eigen_failure_rate = static_cast<double>(eig_fail) / static_cast<double>(eig_n);
    return s;
}

/// Shared, read-only inputs of one experiment.
struct RunContext {
    const ExperimentConfig& config;
    const RiskEnvironment& env;
    std::size_t h;
    std::optional<double> rho_x;
    double cov_sigma;
};

/// Flags checked alongside a run; none of this is timed.
class Diagnostics {
public:
    Diagnostics(const RunContext& ctx, bool coverage)
        : ctx_(ctx), params_(bandit_params(ctx.config, ctx.env)), coverage_(coverage) {
        const std::size_t d = ctx.env.dim();
        eps_ = params_.beta() / params_.m();
        if (ctx.config.diag_elliptic) ell_.factor(Matrix::identity(d, eps_));
        v0_ = Matrix(d, d);
        eigen_ = ctx.config.diag_eigen && ctx.env.stochastic_actions() && ctx.rho_x.has_value();
        if (coverage_) design_.emplace(d, params_.alpha, params_.m(), params_.L);
        warm_.assign(d, 0.0);
    }

    /// Called before observing round t's reward (history holds t-1 points).
    void before_observe() {
        if (!coverage_ || !coverage_ok_) return;
        const auto& st = *design_;
        const Estimate est = erm_fit(st, ctx_.env.loss(), warm_);
        warm_ = est.theta_hat;
        const Vector& ts = ctx_.env.theta_star();
        const double beta = params_.beta();
        const Cholesky hc(hess_H(st, ctx_.env.loss(), ts, beta));
        Vector r = grad_F(st, ctx_.env.loss(), ts);
        const Vector fh = grad_F(st, ctx_.env.loss(), est.theta_hat);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= fh[i];
        const double lhs = hc.inv_norm(r);
        const double d = static_cast<double>(st.dim());
        const double bracket = 2.0 * std::log(1.0 / params_.delta) + hc.logdet() - d * std::log(beta);
        const double rhs = ctx_.cov_sigma * std::sqrt(std::max(0.0, bracket)) + params_.alpha * hc.inv_norm(ts);
        if (lhs > rhs) coverage_ok_ = false;
    }

    void after_observe(std::span<const double> x, double y, std::size_t t) {
        if (ctx_.config.diag_elliptic) {
            ell_sum_ += ell_.inv_norm(x);
            ell_.rank_one_update(x);
            const double bound = elliptic_potential_bound(static_cast<double>(t), x.size(), params_.L, eps_);
            if (ell_sum_ > bound * (1.0 + 1e-12)) {
                elliptic_ok_ = false;
                ++elliptic_violations_;
            }
        }
        if (eigen_) {
            v0_.add_outer(x);
            const double rho = *ctx_.rho_x;
            const double L2 = params_.L * params_.L;
            const double line =
                -(4.0 * L2 / rho) * std::log(2.0 / params_.delta) + 0.5 * rho * L2 * static_cast<double>(t);
            if (!(min_eigenvalue(v0_) > line)) eigen_ok_ = false;
        }
        if (coverage_) design_->update(x, y);
    }

    void fill(RegretTrace& tr) const {
        tr.elliptic_ok = elliptic_ok_;
        tr.elliptic_violations = elliptic_violations_;
        if (eigen_) tr.eigen_ok = eigen_ok_;
        if (coverage_) tr.coverage_ok = coverage_ok_;
    }

private:
    const RunContext& ctx_;
    BanditParams params_;
    bool coverage_;
    double eps_ = 1.0;
    Cholesky ell_;
    double ell_sum_ = 0.0;
    bool elliptic_ok_ = true;
    std::size_t elliptic_violations_ = 0;
    Matrix v0_;
    bool eigen_ = false;
    bool eigen_ok_ = true;
    std::optional<DesignState> design_;
    Vector warm_;
    bool coverage_ok_ = true;
};

inline std::size_t algorithm_stream(const std::string& name) {
    const auto& names = known_algorithms();
    return static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
}

/// One policy on one replication's streams.
inline RegretTrace run_replication(const RunContext& ctx, const std::string& algorithm, std::size_t rep) {
    const ExperimentConfig& c = ctx.config;
    const RiskEnvironment& env = ctx.env;
    const std::uint64_t rep_seed = split_seed(c.base_seed, rep);
    Rng action_rng(split_seed(rep_seed, 1));
    Rng reward_rng(split_seed(rep_seed, 2));
    auto policy = make_policy(c, env, algorithm, ctx.h, split_seed(rep_seed, 3 + algorithm_stream(algorithm)));
    const bool coverage =
        std::find(c.coverage_algorithms.begin(), c.coverage_algorithms.end(), algorithm) != c.coverage_algorithms.end();
    Diagnostics diag(ctx, coverage);
    const std::vector<std::size_t> warm = warmup_schedule(env.arms(), c.warmup_pulls);

    RegretTrace tr;
    tr.algorithm = algorithm;
    tr.replication = rep;
    tr.cum_regret.resize(c.T);
    double cum = 0.0;
    std::chrono::steady_clock::duration busy{};
    for (std::size_t t = 1; t <= c.T; ++t) {
        const std::vector<Vector> actions = env.sample_action_set(action_rng);
        std::size_t idx;
        if (t <= warm.size()) {
            idx = warm[t - 1] % actions.size();
        } else {
            const auto t0 = std::chrono::steady_clock::now();
            idx = policy->choose(actions, t);
            busy += std::chrono::steady_clock::now() - t0;
        }
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& a : actions) best = std::max(best, env.true_risk(a));
        cum += best - env.true_risk(actions[idx]);
        tr.cum_regret[t - 1] = cum;

        diag.before_observe();
        const double y = env.sample_reward(actions[idx], idx, reward_rng);
        const auto t1 = std::chrono::steady_clock::now();
        policy->observe(actions[idx], y);
        busy += std::chrono::steady_clock::now() - t1;
        diag.after_observe(actions[idx], y, t);
    }
    tr.wall_clock_seconds = std::chrono::duration<double>(busy).count();
    diag.fill(tr);
    return tr;
}

inline json arm_table(const RiskEnvironment& env, std::uint64_t seed, std::size_t mc_draws) {
    json arms = json::array();
    for (std::size_t k = 0; k < env.arms(); ++k) {
        Rng rng(split_seed(seed, 0xA5A5ULL + k));
        double s = 0.0;
        for (std::size_t i = 0; i < mc_draws; ++i) s += sample(env.noise(k), rng);
        json a;
        a["arm"] = k;
        a["risk"] = env.arm_risk(k);
        a["mean"] = env.arm_mean(k);
        a["noise_location"] = env.arm_location(k);
        a["noise_mean"] = mean(env.noise(k));
        a["noise_mean_monte_carlo"] = s / static_cast<double>(mc_draws);
        arms.push_back(a);
    }
    return arms;
}

inline json describe_environment(const RiskEnvironment& env, std::uint64_t seed = 1, std::size_t mc_draws = 100000) {
    json j;
    j["kind"] = to_string(env.kind());
    j["dimension"] = env.dim();
    j["arms"] = arm_table(env, seed, mc_draws);
    j["theta_star"] = env.theta_star();
    j["loss"] = env.loss().name();
    j["stochastic_actions"] = env.stochastic_actions();
    j["risk_optimal_arm"] = env.risk_optimal_arm();
    j["mean_optimal_arm"] = env.mean_optimal_arm();
    j["deceptive"] = env.deceptive();
    if (env.kind() == EnvKind::bernoulli_entropic_arms) j["support_diameter"] = env.loss().support_diameter();
    return j;
}

inline json config_to_json(const ExperimentConfig& c) {
    json j;
    j["experiment"] = c.experiment;
    j["algorithms"] = c.algorithms;
    j["T"] = c.T;
    j["replications"] = c.replications;
    j["base_seed"] = c.base_seed;
    j["sigma"] = c.sigma;
    j["alpha"] = c.alpha;
    j["delta"] = c.delta;
    j["S"] = c.S;
    j["L"] = c.L;
    j["p"] = c.p;
    j["gamma"] = c.gamma;
    j["h"] = c.h;
    j["step_scale"] = c.step_scale;
    j["warmup_pulls"] = c.warmup_pulls;
    j["bonus_metric"] = c.bonus_metric == BonusMetric::local ? "local" : "global";
    j["theory_mode"] = c.theory_mode;
    j["strict_theory"] = c.strict_theory;
    j["episode_rule"] = c.episode_rule;
    j["epsilon_h"] = c.eps_h;
    j["rho_x"] = c.rho_x ? json(*c.rho_x) : json(nullptr);
    j["rho_safety"] = c.rho_safety;
    j["ogd_constant"] = c.ogd_constant;
    json e;
    if (!c.arm_sigmas.empty()) e["sigmas"] = c.arm_sigmas;
    if (!c.theta_star.empty()) e["theta_star"] = c.theta_star;
    e["sigma_x"] = c.sigma_x;
    if (!c.two_point_arms.empty()) {
        json arms = json::array();
        for (const auto& a : c.two_point_arms) arms.push_back({a.p, a.a, a.b});
        e["two_point_arms"] = arms;
    }
    e["arms"] = c.generic_arms;
    e["noise_sigma"] = c.noise_sigma;
    j["environment"] = e;
    j["diagnostics"] = {{"elliptic", c.diag_elliptic},
                        {"eigen", c.diag_eigen},
                        {"coverage", c.coverage_algorithms},
                        {"coverage_sigma", c.coverage_sigma ? json(*c.coverage_sigma) : json(nullptr)}};
    return j;
}

/// Runs every algorithm on every replication; results merge by replication index.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
    validate(config);
    const RiskEnvironment env = make_environment(config);
    if (config.T < env.arms() * config.warmup_pulls) throw config_error("'T': shorter than the warmup phase");
    const std::size_t h = resolve_h(config, env);
    const std::optional<double> rho = resolve_rho_x(config, env);
    const RunContext ctx{config, env, h, rho, coverage_sigma(config, env)};

    ExperimentResult res;
    res.config = config;
    const std::size_t n_alg = config.algorithms.size();
    const std::size_t n_rep = config.replications;
    res.traces.resize(n_alg * n_rep);

    std::size_t workers = config.workers ? config.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n_alg * n_rep);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    const auto work = [&] {
        for (;;) {
            const std::size_t job = next.fetch_add(1);
            if (job >= n_alg * n_rep) return;
            try {
                res.traces[job] = run_replication(ctx, config.algorithms[job / n_rep], job % n_rep);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = n_alg * n_rep;
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);

    for (std::size_t a = 0; a < n_alg; ++a) {
        std::vector<const RegretTrace*> group;
        for (std::size_t r = 0; r < n_rep; ++r) group.push_back(&res.traces[a * n_rep + r]);
        res.summary.algorithms.push_back(aggregate(group));
    }

    const BanditParams params = bandit_params(config, env);
    if (config.theory_mode && env.stochastic_actions() && rho) {
        const StochasticActionParams sap{std::min(*rho, 1.0 / static_cast<double>(env.dim())), config.eps_h};
        const long long t0 = std::max<long long>(1, theorem2_t0(params, sap));
        res.summary.theory_bound.resize(config.T);
        for (std::size_t t = 1; t <= config.T; ++t)
            if (static_cast<long long>(t) >= t0) res.summary.theory_bound[t - 1] = theorem2_bound(params, sap, static_cast<double>(t));
    }

    json derived;
    derived["arms"] = arm_table(env, config.base_seed, 100000);
    derived["m"] = params.m();
    derived["M"] = params.M();
    derived["kappa"] = params.kappa();
    derived["beta"] = params.beta();
    derived["h"] = h;
    derived["rho_x"] = rho ? json(*rho) : json(nullptr);
    derived["coverage_sigma"] = ctx.cov_sigma;
    derived["risk_optimal_arm"] = env.risk_optimal_arm();
    derived["mean_optimal_arm"] = env.mean_optimal_arm();
    derived["deceptive"] = env.deceptive();
    if (env.kind() == EnvKind::bernoulli_entropic_arms) derived["support_diameter"] = env.loss().support_diameter();
    res.derived = derived;
    return res;
}

inline std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_outputs(const ExperimentResult& res, const std::filesystem::path& dir) {
    if (res.traces.empty()) throw config_error("no replications to write");
    std::filesystem::create_directories(dir);
    const auto open = [&](const char* name) {
        std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
        return f;
    };
    const std::string exp = res.config.env_name();
    {
        auto f = open("trace.csv");
        f << "experiment,algorithm,replication,t,cum_regret\n";
        for (const auto& tr : res.traces)
            for (std::size_t t = 0; t < tr.cum_regret.size(); ++t)
                f << exp << ',' << tr.algorithm << ',' << tr.replication << ',' << (t + 1) << ','
                  << fmt17(tr.cum_regret[t]) << '\n';
        if (!f) throw std::runtime_error("write failed: trace.csv");
    }
    {
        auto f = open("summary.csv");
        const bool bound = !res.summary.theory_bound.empty();
        f << "algorithm,t,p5,p25,p50,p75,p95" << (bound ? ",theory_bound" : "") << '\n';
        for (const auto& s : res.summary.algorithms) {
            for (std::size_t t = 0; t < s.curves.p50.size(); ++t) {
                f << s.algorithm << ',' << (t + 1) << ',' << fmt17(s.curves.p5[t]) << ',' << fmt17(s.curves.p25[t])
                  << ',' << fmt17(s.curves.p50[t]) << ',' << fmt17(s.curves.p75[t]) << ','
                  << fmt17(s.curves.p95[t]);
                if (bound) {
                    f << ',';
                    if (res.summary.theory_bound[t]) f << fmt17(*res.summary.theory_bound[t]);
                }
                f << '\n';
            }
        }
        if (!f) throw std::runtime_error("write failed: summary.csv");
    }
    {
        auto f = open("runtimes.csv");
        f << "algorithm,mean_s,std_s\n";
        for (const auto& s : res.summary.algorithms)
            f << s.algorithm << ',' << fmt17(s.runtime_mean) << ',' << fmt17(s.runtime_std) << '\n';
        if (!f) throw std::runtime_error("write failed: runtimes.csv");
    }
    {
        json m;
        m["code_version"] = kCodeVersion;
        m["config"] = config_to_json(res.config);
        m["derived"] = res.derived;
        m["seeding"] = {{"scheme", "split(seed, i) = mix64(seed ^ mix64(i + salt)); rng output n = mix64(key + n * golden)"},
                        {"golden", "0x9E3779B97F4A7C15"},
                        {"mix_multipliers", {"0xBF58476D1CE4E5B9", "0x94D049BB133111EB"}},
                        {"salt", "0x632BE59BD9B4E019"},
                        {"streams", {{"actions", 1}, {"rewards", 2}, {"policy", "3 + algorithm index"}}}};
        json diag = json::object();
        for (const auto& s : res.summary.algorithms) {
            json d;
            d["elliptic_failures"] = s.elliptic_failures;
            d["coverage_failure_rate"] = s.coverage_failure_rate ? json(*s.coverage_failure_rate) : json(nullptr);
            d["eigen_failure_rate"] = s.eigen_failure_rate ? json(*s.eigen_failure_rate) : json(nullptr);
            diag[s.algorithm] = d;
        }
        m["diagnostics"] = diag;
        auto f = open("manifest.json");
        f << m.dump(2) << '\n';
        if (!f) throw std::runtime_error("write failed: manifest.json");
    }
}

}  // namespace riskbandit

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "riskbandit/harness.hpp"

namespace rb = riskbandit;

namespace {

rb::LossModel make_loss(const std::string& kind, double level, double gamma) {
    if (kind == "squared") return rb::LossModel::squared();
    if (kind == "expectile") return rb::LossModel::expectile(level);
    if (kind == "entropic") return rb::LossModel::entropic(gamma);
    throw rb::config_error("unknown loss '" + kind + "' (squared, expectile, entropic)");
}

rb::Distribution make_dist(const std::string& kind, double mu, double sigma, double p, double a, double b) {
    if (kind == "gaussian") return rb::Distribution::gaussian(mu, sigma);
    if (kind == "expectile_asymmetric") return rb::Distribution::expectile_asymmetric(mu, sigma, p);
    if (kind == "two_point") return rb::Distribution::two_point(p, a, b);
    throw rb::config_error("unknown distribution '" + kind + "' (gaussian, expectile_asymmetric, two_point)");
}

std::optional<double> closed_form(const std::string& loss, const std::string& dist, double level, double gamma,
                                  double mu, double sigma, double p, double a, double b) {
    if (loss == "squared") return rb::mean(make_dist(dist, mu, sigma, p, a, b));
    if (loss == "expectile" && dist == "gaussian") return rb::gaussian_expectile(level, mu, sigma);
    if (loss == "expectile" && dist == "expectile_asymmetric" && level == p) return mu;
    if (loss == "entropic" && dist == "two_point") return rb::entropic_two_point(p, a, b, gamma);
    if (loss == "entropic" && dist == "gaussian") return mu + 0.5 * gamma * sigma * sigma;
    return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Risk-aware linear bandit simulator"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run an experiment and write CSV/JSON outputs");
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> reps;
    std::optional<std::size_t> workers;
    run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "Output directory")->required();
    run->add_option("--seed", seed, "Base seed override");
    run->add_option("--reps", reps, "Replication count override");
    run->add_option("--workers", workers, "Concurrent replications (0 = all cores)");

    auto* risk = app.add_subcommand("risk", "Risk-measure oracle");
    risk->require_subcommand(1);
    auto* eval = risk->add_subcommand("eval", "Print a distribution's risk measure as JSON");
    std::string loss_kind = "expectile";
    std::string dist_kind = "gaussian";
    double level = 0.1, gamma = 1.0, mu = 0.0, sigma = 1.0, p = 0.5, a = 1.0, b = -1.0;
    eval->add_option("--loss", loss_kind, "squared | expectile | entropic")->capture_default_str();
    eval->add_option("--level", level, "Expectile level")->capture_default_str();
    eval->add_option("--gamma", gamma, "Entropic rate")->capture_default_str();
    eval->add_option("--dist", dist_kind, "gaussian | expectile_asymmetric | two_point")->capture_default_str();
    eval->add_option("--mu", mu, "Location")->capture_default_str();
    eval->add_option("--sigma", sigma, "Scale")->capture_default_str();
    eval->add_option("--p", p, "Asymmetry level or two-point weight on a")->capture_default_str();
    eval->add_option("--a", a, "First atom")->capture_default_str();
    eval->add_option("--b", b, "Second atom")->capture_default_str();

    auto* env = app.add_subcommand("env", "Environment tools");
    env->require_subcommand(1);
    auto* describe = env->add_subcommand("describe", "Print the true risk/mean table as JSON");
    std::string experiment = "exp1";
    std::string env_config;
    describe->add_option("--experiment", experiment, "exp1 | exp2 | exp3 | generic")->capture_default_str();
    describe->add_option("--config", env_config, "Take the environment from a config file")->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            rb::ExperimentConfig cfg = rb::load_config(config_path);
            if (seed) cfg.base_seed = *seed;
            if (reps) cfg.replications = *reps;
            if (workers) cfg.workers = *workers;
            rb::validate(cfg);
            const rb::ExperimentResult res = rb::run_experiment(cfg);
            rb::write_outputs(res, out_dir);
            for (const auto& s : res.summary.algorithms)
                std::cout << s.algorithm << ": median regret at T=" << cfg.T << " is "
                          << rb::fmt17(s.curves.p50.back()) << ", mean runtime " << rb::fmt17(s.runtime_mean)
                          << " s\n";
        } else if (*eval) {
            const rb::LossModel loss = make_loss(loss_kind, level, gamma);
            const rb::Distribution dist = make_dist(dist_kind, mu, sigma, p, a, b);
            rb::json j;
            j["loss"] = loss_kind;
            j["distribution"] = dist_kind;
            j["risk_quadrature"] = rb::risk_by_quadrature(loss, dist);
            const auto cf = closed_form(loss_kind, dist_kind, level, gamma, mu, sigma, p, a, b);
            j["risk_closed_form"] = cf ? rb::json(*cf) : rb::json(nullptr);
            j["mean"] = rb::mean(dist);
            std::cout << j.dump(2) << '\n';
        } else if (*describe) {
            rb::ExperimentConfig cfg = env_config.empty() ? rb::defaults_for(experiment) : rb::load_config(env_config);
            const rb::RiskEnvironment e = rb::make_environment(cfg);
            rb::json j = rb::describe_environment(e, cfg.base_seed);
            const auto rho = rb::resolve_rho_x(cfg, e);
            j["rho_x"] = rho ? rb::json(*rho) : rb::json(nullptr);
            std::cout << j.dump(2) << '\n';
        }
    } catch (const rb::config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <paneldml/cli.hpp>

namespace {

int run_simulate(const paneldml::DgpParams& params, const std::string& out, const std::string& delim) {
    if (delim.size() != 1) throw paneldml::ConfigError("--delimiter must be a single character");
    paneldml::cli::cmd_simulate(params, out, delim[0]);
    return 0;
}

template <class F>
auto with_flag(const char* flag, F parse) {
    try {
        return parse();
    } catch (const paneldml::ConfigError& e) {
        throw paneldml::ConfigError(std::string(flag) + ": " + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Double machine learning for partially linear panel regression"};
    app.require_subcommand(1);

    // simulate
    paneldml::DgpParams dgp;
    std::string sim_out;
    std::string sim_delim = ",";
    auto* sim = app.add_subcommand("simulate", "Write a simulated panel as CSV");
    sim->add_option("--n-obs", dgp.n_obs, "Number of subjects")->capture_default_str();
    sim->add_option("--t-per", dgp.t_per, "Periods per subject")->capture_default_str();
    sim->add_option("--dim-x", dgp.dim_x, "Number of covariates")->capture_default_str();
    sim->add_option("--theta", dgp.theta, "True treatment effect")->capture_default_str();
    sim->add_option("--rho", dgp.rho, "Correlation between alpha_i and the covariate level")->capture_default_str();
    sim->add_option("--seed", dgp.seed, "Random seed")->capture_default_str();
    sim->add_option("--delimiter", sim_delim, "Field delimiter")->capture_default_str();
    sim->add_option("-o,--out", sim_out, "Output CSV path")->required();

    // estimate
    std::string config_path;
    std::string input, approach, transform, score, procedure, result_out;
    int n_folds = 0;
    long long seed = -1;
    double level = 0.0;
    bool no_cross_fit = false, no_split = false;
    auto* est = app.add_subcommand("estimate", "Fit the model described by a JSON config");
    est->add_option("-c,--config", config_path, "JSON run config")->required();
    est->add_option("--input", input, "Override data.path");
    est->add_option("--approach", approach, "Override approach (fd-exact, wg-approx, cre, pooled)");
    est->add_option("--transformX", transform, "Override transformX (no, poly, minmax)");
    est->add_option("--score", score, "Override score (orth-PO, orth-IV)");
    est->add_option("--dml-procedure", procedure, "Override dml_procedure (dml1, dml2)");
    est->add_option("--n-folds", n_folds, "Override n_folds");
    est->add_option("--seed", seed, "Override seed");
    est->add_option("--ci-level", level, "Override ci_level");
    est->add_flag("--no-cross-fitting", no_cross_fit, "Use a single estimation fold");
    est->add_flag("--no-sample-splitting", no_split, "Train and predict on the full sample");
    est->add_option("-o,--out", result_out, "Override output (result JSON path)");

    // confint
    std::string result_path;
    double ci_level = 0.95;
    auto* ci = app.add_subcommand("confint", "Confidence interval from a result file");
    ci->add_option("-r,--result", result_path, "Result JSON written by estimate")->required();
    ci->add_option("-l,--level", ci_level, "Confidence level")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*sim) return run_simulate(dgp, sim_out, sim_delim);
        if (*est) {
            auto cfg = paneldml::cli::load_run_config(config_path);
            auto& o = cfg.options;
            if (!input.empty()) cfg.input = input;
            if (!approach.empty()) o.approach = with_flag("--approach", [&] { return paneldml::parse_approach(approach); });
            if (!transform.empty()) o.transform_x = with_flag("--transformX", [&] { return paneldml::parse_covariate_transform(transform); });
            if (!score.empty()) o.score = with_flag("--score", [&] { return paneldml::parse_score(score); });
            if (!procedure.empty()) o.procedure = with_flag("--dml-procedure", [&] { return paneldml::parse_procedure(procedure); });
            if (est->count("--n-folds")) o.n_folds = n_folds;
            if (seed >= 0) o.seed = static_cast<std::uint64_t>(seed);
            if (est->count("--ci-level")) {
                if (!(level > 0.0 && level < 1.0)) throw paneldml::ConfigError("--ci-level must lie in (0, 1)");
                cfg.ci_level = level;
            }
            if (no_cross_fit) o.apply_cross_fitting = false;
            if (no_split) o.draw_sample_splitting = false;
            if (!result_out.empty()) cfg.output = result_out;
            paneldml::cli::cmd_estimate(cfg, std::cout);
            return 0;
        }
        if (*ci) {
            const auto iv = paneldml::cli::cmd_confint(result_path, ci_level);
            std::cout << "level " << ci_level << "\n";
            std::cout.precision(17);
            std::cout << "lower " << iv.lower << "\nupper " << iv.upper << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return paneldml::cli::exit_code_for(e);
    }
    return 0;
}

#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "paneldml.hpp"

namespace paneldml::cli {

using json = nlohmann::ordered_json;

/// One estimation run as described by a JSON config file.
struct RunConfig {
    std::string source = "<config>";  // for error messages
    std::string input;
    ColumnSpec columns;
    bool strict_time_gaps = false;
    DmlOptions options;
    double ci_level = 0.95;
    std::string output;
};

namespace detail {

[[noreturn]] inline void field_error(const std::string& source, const std::string& field, const std::string& what) {
    throw ConfigError(source + ": " + field + ": " + what);
}

template <class T>
T read(const json& j, const std::string& key, const std::string& source, const std::string& path, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        field_error(source, path + key, "has the wrong type");
    }
}

inline LearnerSpec parse_learner(const json& j, const std::string& source, const std::string& field) {
    if (j.is_string()) {
        try {
            return LearnerSpec(parse_learner_kind(j.get<std::string>()));
        } catch (const ConfigError& e) {
            field_error(source, field, e.what());
        }
    }
    if (!j.is_object()) field_error(source, field, "expected an object with a \"kind\" entry");
    try {
        LearnerSpec spec(parse_learner_kind(read<std::string>(j, "kind", source, field + ".", "")));
        for (const auto& [key, value] : j.items()) {
            if (key == "kind") continue;
            if (key == "lambda_grid") {
                spec.set_lambda_grid(value.get<std::vector<double>>());
                continue;
            }
            if (!value.is_number()) field_error(source, field + "." + key, "expected a number");
            spec.set(key, value.get<double>());
        }
        return spec;
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        if (msg.rfind(source, 0) == 0) throw;
        field_error(source, field, msg);
    } catch (const json::exception& e) {
        field_error(source, field, e.what());
    }
}

inline ParamGrid parse_tuning(const json& j, const std::string& source) {
    if (!j.is_object()) field_error(source, "tuning", "expected an object");
    ParamGrid g;
    g.resolution = read<int>(j, "resolution", source, "tuning.", g.resolution);
    g.n_evals = read<int>(j, "n_evals", source, "tuning.", g.n_evals);
    g.cv_folds = read<int>(j, "cv_folds", source, "tuning.", g.cv_folds);
    g.tune_on_folds = read<bool>(j, "tune_on_folds", source, "tuning.", g.tune_on_folds);
    g.subject_level_cv = read<bool>(j, "subject_level_cv", source, "tuning.", g.subject_level_cv);
    if (auto it = j.find("order"); it != j.end()) {
        const std::string order = it->is_string() ? it->get<std::string>() : "";
        if (order == "shuffled") {
            g.order = GridOrder::Shuffled;
        } else if (order == "lexicographic") {
            g.order = GridOrder::Lexicographic;
        } else {
            field_error(source, "tuning.order", "expected \"shuffled\" or \"lexicographic\"");
        }
    }
    if (auto it = j.find("spaces"); it != j.end()) {
        if (!it->is_object()) field_error(source, "tuning.spaces", "expected an object keyed by nuisance");
        for (const auto& [nuisance, axes] : it->items()) {
            const std::string where = "tuning.spaces." + nuisance;
            if (nuisance != "ml_l" && nuisance != "ml_m" && nuisance != "ml_g") {
                field_error(source, where, "unknown nuisance (expected ml_l, ml_m or ml_g)");
            }
            if (!axes.is_array()) field_error(source, where, "expected an array of hyperparameter axes");
            for (const auto& a : axes) {
                ParamAxis axis;
                axis.name = read<std::string>(a, "name", source, where + ".", "");
                if (axis.name.empty()) field_error(source, where, "axis without a name");
                if (a.contains("values")) {
                    axis.values = read<std::vector<double>>(a, "values", source, where + ".", {});
                    if (axis.values->empty()) field_error(source, where + "." + axis.name, "empty value list");
                } else {
                    if (!a.contains("lower") || !a.contains("upper")) {
                        field_error(source, where + "." + axis.name, "needs lower/upper or values");
                    }
                    axis.lower = read<double>(a, "lower", source, where + ".", 0.0);
                    axis.upper = read<double>(a, "upper", source, where + ".", 0.0);
                }
                g.spaces[nuisance].push_back(std::move(axis));
            }
        }
    }
    try {
        g.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return g;
}

}  // namespace detail

/// Parses a run config. Every error names the source and the offending field.
inline RunConfig parse_run_config(const json& j, const std::string& source = "<config>") {
    using detail::field_error;
    using detail::read;
    if (!j.is_object()) field_error(source, "<root>", "expected a JSON object");
    RunConfig cfg;
    cfg.source = source;

    if (auto it = j.find("data"); it != j.end()) {
        const json& d = *it;
        if (!d.is_object()) field_error(source, "data", "expected an object");
        cfg.input = read<std::string>(d, "path", source, "data.", "");
        cfg.columns.y = read<std::string>(d, "y", source, "data.", "y");
        cfg.columns.d = read<std::string>(d, "d", source, "data.", "d");
        cfg.columns.x = read<std::vector<std::string>>(d, "x", source, "data.", {});
        cfg.columns.panel_id = read<std::string>(d, "panel_id", source, "data.", "id");
        cfg.columns.time_id = read<std::string>(d, "time_id", source, "data.", "time");
        if (d.contains("cluster_id") && !d["cluster_id"].is_null()) {
            cfg.columns.cluster_id = read<std::string>(d, "cluster_id", source, "data.", "");
        }
        const auto delim = read<std::string>(d, "delimiter", source, "data.", ",");
        if (delim == "\\t" || delim == "tab") {
            cfg.columns.delimiter = '\t';
        } else if (delim.size() == 1) {
            cfg.columns.delimiter = delim[0];
        } else {
            field_error(source, "data.delimiter", "must be a single character or \"tab\"");
        }
        cfg.strict_time_gaps = read<bool>(d, "strict_time_gaps", source, "data.", false);
    } else {
        cfg.columns = {"y", "d", {}, "id", "time", std::nullopt, ','};
    }

    auto enum_field = [&](const char* key, auto parse, auto fallback) {
        const auto value = read<std::string>(j, key, source, "", std::string(to_string(fallback)));
        try {
            return parse(value);
        } catch (const ConfigError& e) {
            field_error(source, key, e.what());
        }
    };
    DmlOptions& o = cfg.options;
    o.approach = enum_field("approach", parse_approach, ApproachKind::FDExact);
    o.transform_x = enum_field("transformX", parse_covariate_transform, CovariateTransform::None);
    o.score = enum_field("score", parse_score, ScoreKind::OrthPO);
    o.procedure = enum_field("dml_procedure", parse_procedure, DmlProcedure::DML2);
    o.n_folds = read<int>(j, "n_folds", source, "", 5);
    if (o.n_folds < 2) field_error(source, "n_folds", "must be >= 2");
    o.seed = read<std::uint64_t>(j, "seed", source, "", 1234);
    o.draw_sample_splitting = read<bool>(j, "draw_sample_splitting", source, "", true);
    o.apply_cross_fitting = read<bool>(j, "apply_cross_fitting", source, "", true);

    if (auto it = j.find("learners"); it != j.end()) {
        if (!it->is_object()) field_error(source, "learners", "expected an object");
        for (const auto& [name, spec] : it->items()) {
            const std::string field = "learners." + name;
            if (name == "ml_l") {
                o.ml_l = detail::parse_learner(spec, source, field);
            } else if (name == "ml_m") {
                o.ml_m = detail::parse_learner(spec, source, field);
            } else if (name == "ml_g") {
                o.ml_g = detail::parse_learner(spec, source, field);
            } else {
                field_error(source, field, "unknown nuisance (expected ml_l, ml_m or ml_g)");
            }
        }
    }
    if (auto it = j.find("tuning"); it != j.end() && !it->is_null()) o.tuning = detail::parse_tuning(*it, source);

    cfg.ci_level = read<double>(j, "ci_level", source, "", 0.95);
    if (!(cfg.ci_level > 0.0 && cfg.ci_level < 1.0)) field_error(source, "ci_level", "must lie in (0, 1)");
    cfg.output = read<std::string>(j, "output", source, "", "");
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_run_config(j, path);
}

/// Shortest decimal string that reads back to the same double.
inline std::string format_real(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

/// Writes id, time, y, d, X1..Xp (or the dataset's own column names).
inline void write_panel_csv(const PanelDataset& data, std::ostream& out, char delim = ',') {
    out << data.panel_name() << delim << data.time_name() << delim << data.y_name() << delim << data.d_name();
    for (const auto& name : data.x_names()) out << delim << name;
    out << '\n';
    for (const auto& s : data.subjects()) {
        for (std::size_t r = s.begin; r < s.end; ++r) {
            const auto i = static_cast<Eigen::Index>(r);
            out << s.id << delim << data.time_ids()[r] << delim << format_real(data.y()[i]) << delim
                << format_real(data.d()[i]);
            for (Eigen::Index j = 0; j < data.x().cols(); ++j) out << delim << format_real(data.x()(i, j));
            out << '\n';
        }
    }
}

inline void cmd_simulate(const DgpParams& params, const std::string& out_path, char delim = ',') {
    const PanelDataset data = make_plpr_data(params);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + out_path + "'");
    write_panel_csv(data, out, delim);
    if (!out) throw IoError("error while writing '" + out_path + "'");
}

/// Covariates default to every column that is not y, d, panel, time or cluster.
inline ColumnSpec resolve_columns(const RunConfig& cfg) {
    ColumnSpec spec = cfg.columns;
    if (!spec.x.empty()) return spec;
    std::ifstream in(cfg.input);
    if (!in) throw IoError("cannot open '" + cfg.input + "'");
    std::string header;
    std::getline(in, header);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    for (auto& name : paneldml::detail::split_record(header, spec.delimiter)) {
        name = paneldml::detail::trim(name);
        if (name == spec.y || name == spec.d || name == spec.panel_id || name == spec.time_id ||
            (spec.cluster_id && name == *spec.cluster_id)) {
            continue;
        }
        spec.x.push_back(name);
    }
    if (spec.x.empty()) throw ConfigError(cfg.source + ": data.x: no covariate columns found");
    return spec;
}

/// Flat record of every fitted quantity, full double precision.
inline json result_record(const DmlFit& fit, const RunConfig& cfg, const PanelDataset& data) {
    json r;
    const Interval ci = fit.ci(cfg.ci_level);
    r["treatment"] = data.d_name();
    r["outcome"] = data.y_name();
    r["theta"] = fit.theta;
    r["se"] = fit.se;
    r["t_stat"] = fit.t_stat;
    r["p_value"] = fit.p_value;
    r["ci_level"] = cfg.ci_level;
    r["ci_lower"] = ci.lower;
    r["ci_upper"] = ci.upper;
    r["model_rmse"] = fit.model_rmse;
    r["rmse_l"] = fit.rmse_l;
    r["rmse_m"] = fit.rmse_m;
    if (fit.rmse_g) r["rmse_g"] = *fit.rmse_g;
    r["n_obs"] = fit.info.n_obs;
    r["n_subjects"] = fit.info.n_subjects;
    r["n_groups"] = fit.info.n_groups;
    r["n_score_rows"] = fit.n_score_rows;
    r["moment_sum"] = fit.moment_sum;
    r["moment_scale"] = fit.moment_scale;
    r["approach"] = std::string(to_string(fit.approach));
    r["transformX"] = std::string(to_string(fit.transform_x));
    r["score"] = std::string(to_string(fit.score));
    r["dml_procedure"] = std::string(to_string(fit.procedure));
    r["n_folds"] = fit.n_folds;
    r["n_rep"] = 1;
    r["seed"] = fit.seed;
    r["sample_split"] = fit.sample_split;
    r["cross_fitted"] = fit.cross_fitted;
    r["tuned"] = fit.tuned;
    r["panel_id"] = data.panel_name();
    r["time_id"] = data.time_name();
    r["cluster_id"] = data.cluster_name();
    for (std::size_t k = 0; k < fit.fold_thetas.size(); ++k) r["fold_theta_" + std::to_string(k + 1)] = fit.fold_thetas[k];
    for (std::size_t k = 0; k < fit.preliminary_thetas.size(); ++k) {
        r["preliminary_theta_" + std::to_string(k + 1)] = fit.preliminary_thetas[k];
    }
    for (const auto& [name, specs] : fit.learners) {
        for (std::size_t k = 0; k < specs.size(); ++k) {
            const std::string key = "learner_" + name + (specs.size() > 1 ? "_fold_" + std::to_string(k + 1) : "");
            r[key] = specs[k].describe();
        }
    }
    return r;
}

namespace detail {

inline std::string sig(double v, int digits) {
    std::ostringstream s;
    s << std::setprecision(digits) << v;
    return s.str();
}

inline std::string format_p(double p) {
    if (p < 2e-16) return "<2e-16";
    return sig(p, 3);
}

inline std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
    return out;
}

}  // namespace detail

/// Coefficient table in the layout of R's printCoefmat.
inline std::string format_coef_table(const std::string& treatment, const DmlFit& fit) {
    std::ostringstream out;
    out << " Estimates and significance testing of the effect of target variables\n";
    out << std::left << std::setw(static_cast<int>(treatment.size()) + 1) << " " << std::right << std::setw(10)
        << "Estimate." << std::setw(11) << "Std. Error" << std::setw(8) << "t value" << std::setw(9) << "Pr(>|t|)"
        << "\n";
    out << treatment << " " << std::setw(9) << detail::sig(fit.theta, 5) << std::setw(11) << detail::sig(fit.se, 4)
        << std::setw(8) << std::fixed << std::setprecision(2) << fit.t_stat << std::defaultfloat << std::setw(9)
        << detail::format_p(fit.p_value) << " " << significance_stars(fit.p_value) << "\n";
    out << "---\nSignif. codes:  0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1\n";
    return out.str();
}

inline std::string format_summary(const DmlFit& fit, const PanelDataset& data) {
    std::ostringstream out;
    out << "================= paneldml fit ==================\n\n";
    out << "------------------ Data summary ------------------\n";
    out << "Outcome variable: " << data.y_name() << "\n";
    out << "Treatment variable: " << data.d_name() << "\n";
    out << "Covariates: " << detail::join(data.x_names()) << "\n";
    out << "Panel identifier: " << data.panel_name() << "\n";
    out << "Time identifier: " << data.time_name() << "\n";
    out << "Cluster variable(s): " << data.cluster_name() << "\n";
    out << "No. Observations: " << fit.info.n_obs << "\n";
    out << "No. Subjects: " << fit.info.n_subjects << "\n";
    out << "No. Groups: " << fit.info.n_groups << "\n\n";

    out << "------------------ Score & algorithm ------------------\n";
    out << "Score function: " << to_string(fit.score) << "\n";
    out << "DML algorithm: " << to_string(fit.procedure) << "\n";
    out << "Panel data approach: " << to_string(fit.approach) << "\n";
    out << "Type of transformation for X: " << to_string(fit.transform_x) << "\n\n";

    out << "------------------ Machine learner ------------------\n";
    auto learner_line = [&](const std::string& name, double rmse) {
        auto it = fit.learners.find(name);
        if (it == fit.learners.end()) return;
        out << "Learner of nuisance " << name << ": " << it->second.front().describe()
            << (it->second.size() > 1 ? " (tuned per fold)" : "") << "\n";
        out << "RMSE of nuisance " << name << " : " << std::fixed << std::setprecision(5) << rmse
            << std::defaultfloat << "\n";
    };
    learner_line("ml_l", fit.rmse_l);
    learner_line("ml_m", fit.rmse_m);
    if (fit.rmse_g) learner_line("ml_g", *fit.rmse_g);
    out << "Model RMSE: " << std::fixed << std::setprecision(5) << fit.model_rmse << std::defaultfloat << "\n\n";

    out << "------------------ Resampling ------------------\n";
    out << "No. folds: " << fit.n_folds << "\n";
    out << "No. repeated sample splits: 1\n";
    out << "Apply cross-fitting: " << (fit.cross_fitted ? "TRUE" : "FALSE") << "\n";
    if (!fit.cross_fitted) {
        out << "Note: nuisances were not cross-fitted; inference relies on "
            << (fit.sample_split ? "a single estimation fold" : "in-sample predictions") << "\n";
    }
    out << "\n------------------ Fit summary ------------------\n";
    out << format_coef_table(data.d_name(), fit);
    return out.str();
}

struct EstimateOutcome {
    DmlFit fit;
    json record;
};

/// Loads the data, runs the estimator, prints the summary to `report` and
/// writes the result record when cfg.output is set.
inline EstimateOutcome cmd_estimate(const RunConfig& cfg, std::ostream& report) {
    if (cfg.input.empty()) throw ConfigError(cfg.source + ": data.path: no input file given");
    const ColumnSpec columns = resolve_columns(cfg);
    PanelDataset data = [&] {
        try {
            return load_long_table(cfg.input, columns, cfg.strict_time_gaps);
        } catch (const DataError& e) {
            throw DataError(cfg.input + ": " + e.what());
        }
    }();
    EstimateOutcome res{run_dml(data, cfg.options), {}};
    res.record = result_record(res.fit, cfg, data);
    report << format_summary(res.fit, data);
    const Interval ci = res.fit.ci(cfg.ci_level);
    report << "\n" << std::setprecision(7) << (cfg.ci_level * 100) << "% confidence interval: [" << ci.lower << ", "
           << ci.upper << "]\n";
    if (!cfg.output.empty()) {
        std::ofstream out(cfg.output);
        if (!out) throw IoError("cannot write '" + cfg.output + "'");
        out << res.record.dump(2) << "\n";
    }
    return res;
}

/// Interval at `level` from the theta and se stored in a result file.
inline Interval cmd_confint(const std::string& result_path, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("level: must lie in (0, 1)");
    std::ifstream in(result_path);
    if (!in) throw MissingResult("no result file at '" + result_path + "'");
    json r;
    try {
        r = json::parse(in);
    } catch (const json::parse_error& e) {
        throw MissingResult(result_path + ": not a result file (" + e.what() + ")");
    }
    if (!r.contains("theta") || !r.contains("se") || !r["theta"].is_number() || !r["se"].is_number()) {
        throw MissingResult(result_path + ": missing theta/se fields");
    }
    return normal_interval(r["theta"].get<double>(), r["se"].get<double>(), level);
}

/// Process exit code for an exception escaping a command.
inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const NumericalError*>(&e)) return 4;
    if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const IoError*>(&e)) return 3;
    return 3;
}

}  // namespace paneldml::cli

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "learners.hpp"
#include "learners/tuning.hpp"
#include "panel_data.hpp"
#include "resampling.hpp"
#include "stats.hpp"
#include "transform.hpp"

namespace paneldml {

enum class ScoreKind { OrthPO, OrthIV };
enum class DmlProcedure { DML1, DML2 };

inline std::string_view to_string(ScoreKind s) { return s == ScoreKind::OrthPO ? "orth-PO" : "orth-IV"; }
inline std::string_view to_string(DmlProcedure p) { return p == DmlProcedure::DML1 ? "dml1" : "dml2"; }

inline ScoreKind parse_score(std::string_view s) {
    if (s == "orth-PO" || s == "orth-po" || s == "PO") return ScoreKind::OrthPO;
    if (s == "orth-IV" || s == "orth-iv" || s == "IV") return ScoreKind::OrthIV;
    throw ConfigError("score: unknown value '" + std::string(s) + "' (expected orth-PO or orth-IV)");
}

inline DmlProcedure parse_procedure(std::string_view s) {
    if (s == "dml1") return DmlProcedure::DML1;
    if (s == "dml2") return DmlProcedure::DML2;
    throw ConfigError("dml_procedure: unknown value '" + std::string(s) + "' (expected dml1 or dml2)");
}

/// Learner per nuisance. A single entry is shared by every split pair;
/// otherwise there is one entry per pair (tuning on folds).
struct NuisanceSpecs {
    std::vector<LearnerSpec> ml_l;
    std::vector<LearnerSpec> ml_m;
    std::vector<LearnerSpec> ml_g;  // IV-type only; empty -> reuse ml_l

    static const LearnerSpec& pick(const std::vector<LearnerSpec>& v, std::size_t pair) {
        return v.size() == 1 ? v.front() : v.at(pair);
    }
    const LearnerSpec& l(std::size_t pair) const { return pick(ml_l, pair); }
    const LearnerSpec& m(std::size_t pair) const { return pick(ml_m, pair); }
    const LearnerSpec& g(std::size_t pair) const { return ml_g.empty() ? l(pair) : pick(ml_g, pair); }
};

/// Out-of-fold nuisance predictions. Prediction vectors span every task row;
/// rows outside the schedule's estimation samples hold NaN.
struct NuisanceFit {
    struct FoldModels {
        FittedLearnerPtr l, m, g;
    };

    Eigen::VectorXd l_hat;
    Eigen::VectorXd m_hat;
    Eigen::VectorXd g_hat;  // empty unless IV-type
    std::vector<std::size_t> rows;  // predicted rows, in schedule order
    std::vector<int> pair_of_row;   // schedule pair of each entry of `rows`
    std::vector<double> preliminary_theta;  // IV-type: per pair
    std::vector<FoldModels> models;

    bool has_g() const { return g_hat.size() > 0; }
};

namespace detail {

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

inline Eigen::VectorXd take(const Eigen::VectorXd& v, const std::vector<std::size_t>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(rows[i])];
    return out;
}

template <class Fn>
auto guarded_fit(std::size_t pair, const char* nuisance, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const LearnerFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw LearnerFailure(pair, nuisance, e.what());
    }
}

// Partialling-out closed form sum(v * ry) / sum(v * v).
inline double partial_out_theta(const Eigen::VectorXd& ry, const Eigen::VectorXd& v) {
    const double denom = v.squaredNorm();
    if (std::abs(denom) < 1e-12) throw DegenerateDesign("residualized treatment has no variation");
    return v.dot(ry) / denom;
}

}  // namespace detail

/// Trains ml_l (target y) and ml_m (target d) on each pair's training rows and
/// predicts its estimation rows. For the IV-type score a preliminary theta is
/// solved on the pair's estimation rows from those residuals and ml_g is
/// trained on y - d * theta.
inline NuisanceFit fit_nuisances(const TransformedTask& task, const std::vector<SplitPair>& schedule,
                                 const NuisanceSpecs& specs, ScoreKind score) {
    const auto n = static_cast<Eigen::Index>(task.n_rows());
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    NuisanceFit nf;
    nf.l_hat = Eigen::VectorXd::Constant(n, nan);
    nf.m_hat = Eigen::VectorXd::Constant(n, nan);
    if (score == ScoreKind::OrthIV) nf.g_hat = Eigen::VectorXd::Constant(n, nan);

    for (std::size_t j = 0; j < schedule.size(); ++j) {
        const auto& pair = schedule[j];
        if (pair.train_rows.empty() || pair.estimate_rows.empty()) {
            throw DataError("split pair " + std::to_string(j + 1) + " has an empty sample");
        }
        const Eigen::MatrixXd x_train = detail::take_rows(task.features, pair.train_rows);
        const Eigen::MatrixXd x_est = detail::take_rows(task.features, pair.estimate_rows);
        const Eigen::VectorXd y_train = detail::take(task.y, pair.train_rows);
        const Eigen::VectorXd d_train = detail::take(task.d, pair.train_rows);

        NuisanceFit::FoldModels fm;
        fm.l = detail::guarded_fit(j, "ml_l", [&] { return fit_learner(specs.l(j), x_train, y_train); });
        fm.m = detail::guarded_fit(j, "ml_m", [&] { return fit_learner(specs.m(j), x_train, d_train); });
        const Eigen::VectorXd l_pred = fm.l->predict(x_est);
        const Eigen::VectorXd m_pred = fm.m->predict(x_est);
        if (!l_pred.allFinite() || !m_pred.allFinite()) {
            throw LearnerFailure(j, "ml_l/ml_m", "non-finite predictions");
        }
        for (std::size_t i = 0; i < pair.estimate_rows.size(); ++i) {
            const auto r = static_cast<Eigen::Index>(pair.estimate_rows[i]);
            nf.l_hat[r] = l_pred[static_cast<Eigen::Index>(i)];
            nf.m_hat[r] = m_pred[static_cast<Eigen::Index>(i)];
            nf.rows.push_back(pair.estimate_rows[i]);
            nf.pair_of_row.push_back(static_cast<int>(j));
        }

        if (score == ScoreKind::OrthIV) {
            const Eigen::VectorXd y_est = detail::take(task.y, pair.estimate_rows);
            const Eigen::VectorXd d_est = detail::take(task.d, pair.estimate_rows);
            const double theta0 = detail::partial_out_theta(y_est - l_pred, d_est - m_pred);
            nf.preliminary_theta.push_back(theta0);
            const Eigen::VectorXd g_target = y_train - theta0 * d_train;
            fm.g = detail::guarded_fit(j, "ml_g", [&] { return fit_learner(specs.g(j), x_train, g_target); });
            const Eigen::VectorXd g_pred = fm.g->predict(x_est);
            if (!g_pred.allFinite()) throw LearnerFailure(j, "ml_g", "non-finite predictions");
            for (std::size_t i = 0; i < pair.estimate_rows.size(); ++i) {
                nf.g_hat[static_cast<Eigen::Index>(pair.estimate_rows[i])] = g_pred[static_cast<Eigen::Index>(i)];
            }
        }
        nf.models.push_back(std::move(fm));
    }
    return nf;
}

/// Per-row pieces of the orthogonal score psi = v_perp * (r_y - v_reg * theta).
struct ScoreComponents {
    std::vector<std::size_t> rows;  // task row of each entry
    std::vector<int> pair;          // schedule pair of each entry
    std::size_t n_pairs = 0;
    Eigen::VectorXd r_y;
    Eigen::VectorXd v_perp;
    Eigen::VectorXd v_reg;

    std::size_t size() const { return rows.size(); }
    Eigen::VectorXd residual(double theta) const { return r_y - theta * v_reg; }
    Eigen::VectorXd psi(double theta) const { return v_perp.cwiseProduct(residual(theta)); }
};

/// PO: v_perp = v_reg = d - m, r_y = y - l.  IV: v_perp = d - m, v_reg = d,
/// r_y = y - g.
inline ScoreComponents build_scores(const TransformedTask& task, const NuisanceFit& nf, ScoreKind score) {
    if (score == ScoreKind::OrthIV && !nf.has_g()) throw ConfigError("IV-type score needs ml_g predictions");
    ScoreComponents sc;
    sc.rows = nf.rows;
    sc.pair = nf.pair_of_row;
    sc.n_pairs = nf.models.size();
    const auto n = static_cast<Eigen::Index>(sc.rows.size());
    sc.r_y.resize(n);
    sc.v_perp.resize(n);
    sc.v_reg.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(sc.rows[static_cast<std::size_t>(i)]);
        const double v = task.d[r] - nf.m_hat[r];
        sc.v_perp[i] = v;
        if (score == ScoreKind::OrthPO) {
            sc.r_y[i] = task.y[r] - nf.l_hat[r];
            sc.v_reg[i] = v;
        } else {
            sc.r_y[i] = task.y[r] - nf.g_hat[r];
            sc.v_reg[i] = task.d[r];
        }
    }
    if (!sc.r_y.allFinite() || !sc.v_perp.allFinite()) throw NumericalError("score components are not finite");
    return sc;
}

struct ThetaSolution {
    double theta = 0.0;
    std::vector<double> fold_thetas;  // DML1 only
};

namespace detail {

inline double solve_moment(const Eigen::VectorXd& v_perp, const Eigen::VectorXd& v_reg, const Eigen::VectorXd& r_y) {
    const double jac = v_perp.dot(v_reg);
    if (!(std::abs(jac) >= 1e-12)) throw DegenerateDesign("score Jacobian vanishes (|sum v_perp * v| < 1e-12)");
    return v_perp.dot(r_y) / jac;
}

}  // namespace detail

/// DML2 solves the pooled moment condition; DML1 solves per pair and averages.
inline ThetaSolution solve_theta(const ScoreComponents& sc, DmlProcedure procedure) {
    ThetaSolution out;
    if (procedure == DmlProcedure::DML2 || sc.n_pairs <= 1) {
        out.theta = detail::solve_moment(sc.v_perp, sc.v_reg, sc.r_y);
        if (procedure == DmlProcedure::DML1) out.fold_thetas = {out.theta};
        return out;
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < sc.n_pairs; ++k) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < sc.size(); ++i) {
            if (sc.pair[i] == static_cast<int>(k)) idx.push_back(i);
        }
        const double t = detail::solve_moment(detail::take(sc.v_perp, idx), detail::take(sc.v_reg, idx),
                                              detail::take(sc.r_y, idx));
        out.fold_thetas.push_back(t);
        sum += t;
    }
    out.theta = sum / static_cast<double>(sc.n_pairs);
    return out;
}

/// Cluster-robust standard error of theta:
///   J = mean(v_perp * v_reg), meat = (1/n) sum_c (sum_{i in c} psi_i)^2,
///   se = sqrt(meat / J^2 / n).
/// `cluster` holds the cluster code of every score entry.
inline double cluster_robust_se(const ScoreComponents& sc, double theta, std::span<const int> cluster) {
    if (cluster.size() != sc.size()) throw DimensionMismatch("cluster ids do not match score rows");
    const double n = static_cast<double>(sc.size());
    const Eigen::VectorXd psi = sc.psi(theta);
    std::unordered_map<int, double> sums;
    for (std::size_t i = 0; i < cluster.size(); ++i) sums[cluster[i]] += psi[static_cast<Eigen::Index>(i)];
    if (sums.size() < 2) throw SingleCluster();

    // Accumulate in ascending cluster order so the result does not depend on hashing.
    std::vector<std::pair<int, double>> ordered(sums.begin(), sums.end());
    std::sort(ordered.begin(), ordered.end());
    double meat = 0.0;
    for (const auto& [c, s] : ordered) meat += s * s;
    meat /= n;
    const double jac = sc.v_perp.dot(sc.v_reg) / n;
    if (!(meat > 0.0)) throw NumericalError("cluster-robust variance is not positive");
    if (!(std::abs(jac) > 0.0)) throw DegenerateDesign("score Jacobian vanishes");
    return std::sqrt(meat / (jac * jac) / n);
}

inline double cluster_robust_se(const ScoreComponents& sc, double theta, const TransformedTask& task) {
    std::vector<int> cl;
    cl.reserve(sc.size());
    for (std::size_t r : sc.rows) cl.push_back(task.cluster[r]);
    return cluster_robust_se(sc, theta, cl);
}

struct Diagnostics {
    double model_rmse = 0.0;
    double rmse_l = 0.0;
    double rmse_m = 0.0;
    std::optional<double> rmse_g;
};

/// RMSEs over the predicted rows. The model RMSE uses the structural residual
/// r_y - v_reg * theta of the active score; rmse_g measures ml_g against the
/// target it was trained on, y - d * preliminary theta.
inline Diagnostics diagnostics(const TransformedTask& task, const NuisanceFit& nf, const ScoreComponents& sc,
                               double theta) {
    Diagnostics out;
    const double n = static_cast<double>(sc.size());
    double sl = 0.0, sm = 0.0, sg = 0.0;
    for (std::size_t i = 0; i < sc.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(sc.rows[i]);
        sl += std::pow(task.y[r] - nf.l_hat[r], 2);
        sm += std::pow(task.d[r] - nf.m_hat[r], 2);
        if (nf.has_g()) {
            const double t0 = nf.preliminary_theta[static_cast<std::size_t>(sc.pair[i])];
            sg += std::pow(task.y[r] - task.d[r] * t0 - nf.g_hat[r], 2);
        }
    }
    out.rmse_l = std::sqrt(sl / n);
    out.rmse_m = std::sqrt(sm / n);
    if (nf.has_g()) out.rmse_g = std::sqrt(sg / n);
    out.model_rmse = std::sqrt(sc.residual(theta).squaredNorm() / n);
    return out;
}

/// Everything that controls one estimation run.
struct DmlOptions {
    ApproachKind approach = ApproachKind::FDExact;
    CovariateTransform transform_x = CovariateTransform::None;
    ScoreKind score = ScoreKind::OrthPO;
    DmlProcedure procedure = DmlProcedure::DML2;
    LearnerSpec ml_l{LearnerKind::Ridge};
    LearnerSpec ml_m{LearnerKind::Ridge};
    std::optional<LearnerSpec> ml_g;
    int n_folds = 5;
    std::uint64_t seed = 1234;
    bool draw_sample_splitting = true;
    bool apply_cross_fitting = true;
    std::optional<ParamGrid> tuning;
};

struct DmlFit {
    double theta = 0.0;
    double se = 0.0;
    double t_stat = 0.0;
    double p_value = 1.0;
    double model_rmse = 0.0;
    double rmse_l = 0.0;
    double rmse_m = 0.0;
    std::optional<double> rmse_g;
    std::vector<double> fold_thetas;
    std::vector<double> preliminary_thetas;
    PanelInfo info;
    std::size_t n_score_rows = 0;
    double moment_sum = 0.0;       // sum psi(theta)
    double moment_scale = 0.0;     // sum |v_perp * v_reg|

    ApproachKind approach = ApproachKind::FDExact;
    CovariateTransform transform_x = CovariateTransform::None;
    ScoreKind score = ScoreKind::OrthPO;
    DmlProcedure procedure = DmlProcedure::DML2;
    int n_folds = 0;
    std::uint64_t seed = 0;
    bool sample_split = true;
    bool cross_fitted = true;
    bool tuned = false;
    std::map<std::string, std::vector<LearnerSpec>> learners;  // as used, per nuisance

    Interval ci(double level = 0.95) const { return normal_interval(theta, se, level); }
};

namespace detail {

// Out-of-fold predictions for the tuning folds.
inline Eigen::VectorXd cv_predictions(const LearnerSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      const std::vector<int>& fold) {
    Eigen::VectorXd out(y.size());
    const int k = *std::max_element(fold.begin(), fold.end()) + 1;
    for (int f = 0; f < k; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? test : train).push_back(i);
        if (test.empty()) continue;
        auto model = fit_learner(spec, take_rows(x, train), take(y, train));
        Eigen::VectorXd pred = model->predict(take_rows(x, test));
        for (std::size_t i = 0; i < test.size(); ++i) out[static_cast<Eigen::Index>(test[i])] = pred[static_cast<Eigen::Index>(i)];
    }
    return out;
}

struct TunedSpecs {
    LearnerSpec l, m;
    std::optional<LearnerSpec> g;
};

// Tunes the nuisances listed in the grid on the given rows of the task.
inline TunedSpecs tune_nuisances(const TransformedTask& task, const std::vector<std::size_t>& rows,
                                 const DmlOptions& opt, std::uint64_t seed) {
    const ParamGrid& grid = *opt.tuning;
    const Eigen::MatrixXd x = take_rows(task.features, rows);
    const Eigen::VectorXd y = take(task.y, rows);
    const Eigen::VectorXd d = take(task.d, rows);

    std::vector<int> folds;
    if (grid.subject_level_cv) {
        std::vector<int> subj;
        for (std::size_t r : rows) subj.push_back(task.subject[r]);
        folds = grouped_cv_folds(subj, grid.cv_folds, seed);
    } else {
        folds = row_cv_folds(rows.size(), grid.cv_folds, seed);
    }
    if (rows.size() < static_cast<std::size_t>(grid.cv_folds)) throw ConfigError("too few rows for tuning.cv_folds");

    // Each nuisance gets its own grid order.
    auto tune_one = [&](const char* name, const LearnerSpec& base, const Eigen::VectorXd& target,
                        std::uint64_t stream) {
        auto it = grid.spaces.find(name);
        if (it == grid.spaces.end() || it->second.empty()) return base;
        const std::uint64_t order_seed = seed ^ (0x9E3779B97F4A7C15ULL * stream);
        return tune_grid(x, target, base, it->second, grid, folds, order_seed).best;
    };

    TunedSpecs out{tune_one("ml_l", opt.ml_l, y, 1), tune_one("ml_m", opt.ml_m, d, 2), opt.ml_g};
    if (opt.score == ScoreKind::OrthIV && grid.spaces.count("ml_g")) {
        const Eigen::VectorXd l_cv = cv_predictions(out.l, x, y, folds);
        const Eigen::VectorXd m_cv = cv_predictions(out.m, x, d, folds);
        const double theta0 = partial_out_theta(y - l_cv, d - m_cv);
        const Eigen::VectorXd g_target = y - theta0 * d;
        out.g = tune_one("ml_g", opt.ml_g.value_or(out.l), g_target, 3);
    }
    return out;
}

}  // namespace detail

/// Runs the full procedure on an already transformed task.
inline DmlFit fit_dml(const TransformedTask& task, const DmlOptions& opt) {
    if (task.n_rows() == 0) throw DataError("transformed task has no rows");

    std::vector<SplitPair> schedule;
    if (opt.draw_sample_splitting) {
        auto fa = draw_block_folds(task.n_subjects, opt.n_folds, opt.seed);
        schedule = cross_fit_schedule(fa, task.subject, opt.apply_cross_fitting);
    } else {
        schedule = full_sample_schedule(task.n_rows());
    }

    NuisanceSpecs specs;
    const bool iv = opt.score == ScoreKind::OrthIV;
    if (opt.tuning) {
        opt.tuning->validate();
        const std::uint64_t tune_seed = opt.seed + 1;
        if (opt.tuning->tune_on_folds) {
            for (std::size_t j = 0; j < schedule.size(); ++j) {
                auto t = detail::tune_nuisances(task, schedule[j].train_rows, opt, tune_seed + j);
                specs.ml_l.push_back(t.l);
                specs.ml_m.push_back(t.m);
                if (iv && t.g) specs.ml_g.push_back(*t.g);
            }
        } else {
            std::vector<std::size_t> all(task.n_rows());
            std::iota(all.begin(), all.end(), std::size_t{0});
            auto t = detail::tune_nuisances(task, all, opt, tune_seed);
            specs.ml_l = {t.l};
            specs.ml_m = {t.m};
            if (iv && t.g) specs.ml_g = {*t.g};
        }
    } else {
        specs.ml_l = {opt.ml_l};
        specs.ml_m = {opt.ml_m};
    }
    if (iv && specs.ml_g.empty() && opt.ml_g) specs.ml_g = {*opt.ml_g};

    NuisanceFit nf = fit_nuisances(task, schedule, specs, opt.score);
    ScoreComponents sc = build_scores(task, nf, opt.score);
    ThetaSolution sol = solve_theta(sc, opt.procedure);
    const double se = cluster_robust_se(sc, sol.theta, task);
    Diagnostics diag = diagnostics(task, nf, sc, sol.theta);

    DmlFit fit;
    fit.theta = sol.theta;
    fit.se = se;
    fit.t_stat = sol.theta / se;
    fit.p_value = two_sided_p_value(fit.t_stat);
    fit.model_rmse = diag.model_rmse;
    fit.rmse_l = diag.rmse_l;
    fit.rmse_m = diag.rmse_m;
    fit.rmse_g = diag.rmse_g;
    fit.fold_thetas = sol.fold_thetas;
    fit.preliminary_thetas = nf.preliminary_theta;
    fit.info = {task.n_rows(), task.n_subjects, task.n_clusters};
    fit.n_score_rows = sc.size();
    fit.moment_sum = sc.psi(sol.theta).sum();
    fit.moment_scale = sc.v_perp.cwiseProduct(sc.v_reg).cwiseAbs().sum();

    fit.approach = task.approach;
    fit.transform_x = task.covariate_transform;
    fit.score = opt.score;
    fit.procedure = opt.procedure;
    fit.n_folds = opt.draw_sample_splitting ? opt.n_folds : 1;
    fit.seed = opt.seed;
    fit.sample_split = opt.draw_sample_splitting;
    fit.cross_fitted = opt.draw_sample_splitting && opt.apply_cross_fitting;
    fit.tuned = opt.tuning.has_value();
    fit.learners["ml_l"] = specs.ml_l;
    fit.learners["ml_m"] = specs.ml_m;
    if (iv) fit.learners["ml_g"] = specs.ml_g.empty() ? specs.ml_l : specs.ml_g;
    return fit;
}

/// Transform, (optionally) tune, split, fit nuisances, solve and infer.
inline DmlFit run_dml(const PanelDataset& data, const DmlOptions& opt) {
    return fit_dml(make_task(data, opt.approach, opt.transform_x), opt);
}

}  // namespace paneldml

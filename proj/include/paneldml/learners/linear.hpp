#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "learner.hpp"

namespace paneldml {

/// intercept + x * coef on the original feature scale.
class LinearModel final : public FittedLearner {
public:
    LinearModel(double intercept, Eigen::VectorXd coef) : intercept_(intercept), coef_(std::move(coef)) {}

    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const override {
        check_width(x);
        return (x * coef_).array() + intercept_;
    }
    std::size_t n_features() const override { return static_cast<std::size_t>(coef_.size()); }

    double intercept() const { return intercept_; }
    const Eigen::VectorXd& coef() const { return coef_; }

private:
    double intercept_;
    Eigen::VectorXd coef_;
};

/// Ridge regression with an unpenalized intercept. penalty = 0 is least
/// squares; rank-deficient designs then get the minimum-norm solution.
inline std::shared_ptr<const LinearModel> fit_ridge(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                                    const Eigen::Ref<const Eigen::VectorXd>& y,
                                                    double penalty) {
    detail::check_training_data(x, y);
    if (!(penalty >= 0.0)) throw ConfigError("ridge penalty must be >= 0");

    const Eigen::RowVectorXd x_mean = x.colwise().mean();
    const double y_mean = y.mean();
    const Eigen::MatrixXd xc = x.rowwise() - x_mean;
    const Eigen::VectorXd yc = y.array() - y_mean;

    Eigen::VectorXd beta;
    if (x.cols() == 0) {
        beta.resize(0);
    } else if (penalty == 0.0) {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(xc);
        beta = cod.solve(yc);
    } else {
        Eigen::MatrixXd gram = xc.transpose() * xc;
        gram.diagonal().array() += penalty;
        beta = gram.ldlt().solve(xc.transpose() * yc);
    }
    if (!beta.allFinite()) throw NumericalError("ridge solve produced non-finite coefficients");
    const double intercept = y_mean - x_mean.dot(beta);
    return std::make_shared<const LinearModel>(intercept, std::move(beta));
}

namespace detail {

/// Columns centered and scaled to unit population variance. Constant
/// columns are flagged and carry zero coefficients.
struct Standardized {
    Eigen::MatrixXd z;
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale;
    std::vector<bool> constant;
    double y_mean = 0.0;
    Eigen::VectorXd yc;

    Standardized(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
        const double n = static_cast<double>(x.rows());
        mean = x.colwise().mean();
        z = x.rowwise() - mean;
        scale.resize(x.cols());
        constant.assign(static_cast<std::size_t>(x.cols()), false);
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double sd = std::sqrt(z.col(j).squaredNorm() / n);
            const double magnitude = std::max(1.0, std::abs(mean[j]));
            if (sd <= 1e-12 * magnitude) {
                constant[static_cast<std::size_t>(j)] = true;
                scale[j] = 1.0;
                z.col(j).setZero();
            } else {
                scale[j] = sd;
                z.col(j) /= sd;
            }
        }
        y_mean = y.mean();
        yc = y.array() - y_mean;
    }

    double lambda_max() const {
        if (z.cols() == 0) return 0.0;
        return (z.transpose() * yc).cwiseAbs().maxCoeff() / static_cast<double>(z.rows());
    }

    std::shared_ptr<const LinearModel> to_model(const Eigen::VectorXd& beta_std) const {
        Eigen::VectorXd coef = beta_std.cwiseQuotient(scale.transpose());
        const double intercept = y_mean - mean.dot(coef);
        return std::make_shared<const LinearModel>(intercept, std::move(coef));
    }
};

inline double soft_threshold(double v, double lambda) {
    if (v > lambda) return v - lambda;
    if (v < -lambda) return v + lambda;
    return 0.0;
}

struct LassoControl {
    double tolerance = 1e-7;
    long max_sweeps = 100000;
};

/// Coordinate descent on (1/2n)|yc - z b|^2 + lambda |b|_1 with unit-variance
/// columns. beta is the warm start and receives the solution; resid must
/// equal yc - z * beta on entry and is kept in sync.
inline void lasso_coordinate_descent(const Standardized& s, double lambda, Eigen::VectorXd& beta,
                                     Eigen::VectorXd& resid, const LassoControl& ctl = {}) {
    const auto p = s.z.cols();
    const double n = static_cast<double>(s.z.rows());
    auto update = [&](Eigen::Index j) {
        if (s.constant[static_cast<std::size_t>(j)]) return 0.0;
        const double old = beta[j];
        const double rho = s.z.col(j).dot(resid) / n + old;
        const double fresh = soft_threshold(rho, lambda);
        const double delta = fresh - old;
        if (delta != 0.0) {
            resid.noalias() -= delta * s.z.col(j);
            beta[j] = fresh;
        }
        return std::abs(delta);
    };

    std::vector<Eigen::Index> active;
    for (long sweep = 0; sweep < ctl.max_sweeps; ++sweep) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) max_delta = std::max(max_delta, update(j));
        if (max_delta < ctl.tolerance) return;

        // Cycle on the active set until it settles, then re-check everything.
        active.clear();
        for (Eigen::Index j = 0; j < p; ++j) {
            if (beta[j] != 0.0) active.push_back(j);
        }
        for (; sweep < ctl.max_sweeps; ++sweep) {
            double inner = 0.0;
            for (Eigen::Index j : active) inner = std::max(inner, update(j));
            if (inner < ctl.tolerance) break;
        }
    }
}

inline std::vector<double> default_lambda_path(double lambda_max, int n_lambda, double min_ratio) {
    std::vector<double> path;
    if (lambda_max <= 0.0) return {0.0};
    if (n_lambda == 1) return {lambda_max};
    const double step = std::log(min_ratio) / (n_lambda - 1);
    for (int k = 0; k < n_lambda; ++k) path.push_back(lambda_max * std::exp(step * k));
    return path;
}

/// Fits the whole (descending) path with warm starts. Returns standardized
/// coefficients per lambda.
inline std::vector<Eigen::VectorXd> lasso_path(const Standardized& s, const std::vector<double>& lambdas,
                                               const LassoControl& ctl = {}) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(s.z.cols());
    Eigen::VectorXd resid = s.yc;
    std::vector<Eigen::VectorXd> out;
    out.reserve(lambdas.size());
    for (double l : lambdas) {
        lasso_coordinate_descent(s, l, beta, resid, ctl);
        out.push_back(beta);
    }
    return out;
}

}  // namespace detail

/// Lasso at a single penalty. Columns are standardized internally, so the
/// penalty acts on the standardized scale.
inline std::shared_ptr<const LinearModel> fit_lasso(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                                    const Eigen::Ref<const Eigen::VectorXd>& y, double lambda) {
    detail::check_training_data(x, y);
    if (!(lambda >= 0.0)) throw ConfigError("lasso lambda must be >= 0");
    detail::Standardized s(x, y);
    auto path = detail::lasso_path(s, {lambda});
    return s.to_model(path.front());
}

/// Lasso with the penalty picked by k-fold CV mean squared error.
class LassoCvModel final : public FittedLearner {
public:
    LassoCvModel(std::shared_ptr<const LinearModel> model, std::vector<double> lambdas, std::vector<double> cv_mse,
                 double chosen)
        : model_(std::move(model)), lambdas_(std::move(lambdas)), cv_mse_(std::move(cv_mse)), chosen_(chosen) {}

    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const override { return model_->predict(x); }
    std::size_t n_features() const override { return model_->n_features(); }

    double chosen_lambda() const { return chosen_; }
    const std::vector<double>& lambdas() const { return lambdas_; }
    const std::vector<double>& cv_mse() const { return cv_mse_; }
    const LinearModel& linear() const { return *model_; }

private:
    std::shared_ptr<const LinearModel> model_;
    std::vector<double> lambdas_;
    std::vector<double> cv_mse_;
    double chosen_;
};

/// Rows are cut into cv_folds contiguous blocks. The lambda path (explicit
/// grid, or when none is given n_lambda log-spaced points below lambda_max) is fitted on every
/// training split; ties in CV error go to the larger lambda.
inline std::shared_ptr<const LassoCvModel> fit_lasso_cv(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                                        const Eigen::Ref<const Eigen::VectorXd>& y,
                                                        std::optional<std::vector<double>> grid, int cv_folds,
                                                        int n_lambda = 50, double lambda_min_ratio = 1e-3) {
    detail::check_training_data(x, y);
    if (grid && grid->empty()) throw EmptyGrid("lasso lambda grid is empty");
    if (cv_folds < 2) throw ConfigError("lasso cv_folds must be >= 2");
    const auto n = x.rows();
    if (n < cv_folds) throw DimensionMismatch("fewer rows than lasso CV folds");

    detail::Standardized full(x, y);
    std::vector<double> lambda_grid =
        grid ? std::move(*grid) : detail::default_lambda_path(full.lambda_max(), n_lambda, lambda_min_ratio);
    for (double l : lambda_grid) {
        if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("lambda grid values must be finite and >= 0");
    }
    std::sort(lambda_grid.begin(), lambda_grid.end(), std::greater<>());

    std::vector<double> cv_sse(lambda_grid.size(), 0.0);
    for (int k = 0; k < cv_folds; ++k) {
        const Eigen::Index lo = n * k / cv_folds;
        const Eigen::Index hi = n * (k + 1) / cv_folds;
        const Eigen::Index n_train = n - (hi - lo);
        Eigen::MatrixXd x_train(n_train, x.cols());
        Eigen::VectorXd y_train(n_train);
        x_train << x.topRows(lo), x.bottomRows(n - hi);
        y_train << y.head(lo), y.tail(n - hi);

        detail::Standardized s(x_train, y_train);
        auto path = detail::lasso_path(s, lambda_grid);
        for (std::size_t l = 0; l < lambda_grid.size(); ++l) {
            auto model = s.to_model(path[l]);
            Eigen::VectorXd err = model->predict(x.middleRows(lo, hi - lo)) - y.segment(lo, hi - lo);
            cv_sse[l] += err.squaredNorm();
        }
    }

    std::vector<double> cv_mse(cv_sse.size());
    std::size_t best = 0;
    for (std::size_t l = 0; l < cv_sse.size(); ++l) {
        cv_mse[l] = cv_sse[l] / static_cast<double>(n);
        if (cv_mse[l] < cv_mse[best]) best = l;
    }

    std::vector<double> to_best(lambda_grid.begin(), lambda_grid.begin() + static_cast<long>(best) + 1);
    auto path = detail::lasso_path(full, to_best);
    return std::make_shared<const LassoCvModel>(full.to_model(path.back()), std::move(lambda_grid), std::move(cv_mse),
                                                to_best.back());
}

}  // namespace paneldml

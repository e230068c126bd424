#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include <paneldml/learners.hpp>

using namespace paneldml;

namespace {

struct Draw {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

Draw linear_draw(int n, int p, std::uint64_t seed, double noise = 0.5) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Draw d;
    d.x = Eigen::MatrixXd::NullaryExpr(n, p, [&] { return z(rng); });
    for (int j = 0; j < p; ++j) d.x.col(j) = d.x.col(j) * (1.0 + j) + Eigen::VectorXd::Constant(n, 0.3 * j);
    Eigen::VectorXd beta(p);
    for (int j = 0; j < p; ++j) beta[j] = (j % 3 == 0) ? 2.0 - 0.1 * j : (j % 3 == 1 ? -1.0 : 0.0);
    d.y = (d.x * beta).array() + 1.5;
    for (int i = 0; i < n; ++i) d.y[i] += noise * z(rng);
    return d;
}

// Columns centred and divided by their population sd.
Eigen::MatrixXd standardize(const Eigen::MatrixXd& x, Eigen::RowVectorXd& sd) {
    Eigen::MatrixXd z = x.rowwise() - x.colwise().mean();
    sd = (z.colwise().squaredNorm() / static_cast<double>(x.rows())).cwiseSqrt();
    for (Eigen::Index j = 0; j < z.cols(); ++j) z.col(j) /= sd[j];
    return z;
}

double soft(double v, double l) { return v > l ? v - l : (v < -l ? v + l : 0.0); }

}  // namespace

TEST(Ridge, ExactLine) {
    Eigen::MatrixXd x(3, 1);
    x << 1, 2, 3;
    Eigen::VectorXd y(3);
    y << 2, 4, 6;
    auto m = fit_ridge(x, y, 0.0);
    EXPECT_NEAR(m->coef()[0], 2.0, 1e-12);
    EXPECT_NEAR(m->intercept(), 0.0, 1e-12);
}

TEST(Ridge, LargePenaltyShrinksToMean) {
    auto d = linear_draw(50, 3, 1);
    auto m = fit_ridge(d.x, d.y, 1e14);
    EXPECT_LT(m->coef().cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_NEAR(m->intercept(), d.y.mean(), 1e-6);
}

TEST(Ridge, CollinearMatchesPseudoInverse) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::MatrixXd x(40, 2);
    for (int i = 0; i < 40; ++i) {
        x(i, 0) = z(rng);
        x(i, 1) = 2.0 * x(i, 0);
    }
    Eigen::VectorXd y = 3.0 * x.col(0) + Eigen::VectorXd::NullaryExpr(40, [&] { return 0.1 * z(rng); });
    auto m = fit_ridge(x, y, 0.0);
    ASSERT_TRUE(m->coef().allFinite());

    const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
    const Eigen::VectorXd yc = y.array() - y.mean();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd inv = svd.singularValues();
    for (Eigen::Index k = 0; k < inv.size(); ++k) inv[k] = inv[k] > 1e-10 * inv[0] ? 1.0 / inv[k] : 0.0;
    const Eigen::VectorXd oracle = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * yc;
    EXPECT_NEAR(m->coef()[0], oracle[0], 1e-8);
    EXPECT_NEAR(m->coef()[1], oracle[1], 1e-8);
    // minimum norm: the coefficient vector is parallel to (1, 2)
    EXPECT_NEAR(m->coef()[1], 2.0 * m->coef()[0], 1e-8);
}

TEST(Ridge, ZeroPenaltySolvesNormalEquations) {
    auto d = linear_draw(200, 5, 9);
    auto m = fit_ridge(d.x, d.y, 0.0);
    Eigen::MatrixXd a(d.x.rows(), d.x.cols() + 1);
    a << Eigen::VectorXd::Ones(d.x.rows()), d.x;
    const Eigen::VectorXd b = (a.transpose() * a).llt().solve(a.transpose() * d.y);
    EXPECT_NEAR(m->intercept(), b[0], 1e-8 * std::max(1.0, std::abs(b[0])));
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(m->coef()[j], b[j + 1], 1e-8 * std::max(1.0, std::abs(b[j + 1])));
}

TEST(Ridge, PenaltyMatchesAugmentedLeastSquares) {
    auto d = linear_draw(60, 4, 3);
    const double lambda = 7.5;
    auto m = fit_ridge(d.x, d.y, lambda);
    const Eigen::Index n = d.x.rows();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 4, 5);
    a.topRows(n) << Eigen::VectorXd::Ones(n), d.x;
    a.bottomRightCorner(4, 4) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(4, 4);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 4);
    rhs.head(n) = d.y;
    const Eigen::VectorXd b = a.colPivHouseholderQr().solve(rhs);
    EXPECT_NEAR(m->intercept(), b[0], 1e-9);
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(m->coef()[j], b[j + 1], 1e-9);
}

TEST(Ridge, RejectsBadInput) {
    Eigen::MatrixXd x(3, 1);
    x << 1, 2, 3;
    EXPECT_THROW(fit_ridge(x, Eigen::VectorXd::Ones(2), 0.0), DimensionMismatch);
    x(1, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(fit_ridge(x, Eigen::VectorXd::Ones(3), 0.0), NonFiniteInput);
    auto m = fit_ridge(Eigen::MatrixXd::Ones(3, 1), Eigen::VectorXd::Ones(3), 0.0);
    EXPECT_THROW(m->predict(Eigen::MatrixXd::Ones(2, 2)), DimensionMismatch);
}

TEST(Lasso, ZeroPenaltyIsLeastSquares) {
    auto d = linear_draw(300, 6, 4);
    auto ols = fit_ridge(d.x, d.y, 0.0);
    auto lasso = fit_lasso(d.x, d.y, 0.0);
    EXPECT_NEAR(lasso->intercept(), ols->intercept(), 1e-6);
    for (int j = 0; j < 6; ++j) EXPECT_NEAR(lasso->coef()[j], ols->coef()[j], 1e-6);

    auto cv = fit_lasso_cv(d.x, d.y, std::vector<double>{0.0}, 5);
    EXPECT_EQ(cv->chosen_lambda(), 0.0);
    for (int j = 0; j < 6; ++j) EXPECT_NEAR(cv->linear().coef()[j], ols->coef()[j], 1e-6);
}

TEST(Lasso, LambdaMaxDeactivatesEverySlope) {
    auto d = linear_draw(120, 5, 12);
    Eigen::RowVectorXd sd;
    const Eigen::MatrixXd z = standardize(d.x, sd);
    const Eigen::VectorXd yc = d.y.array() - d.y.mean();
    const double lambda_max = (z.transpose() * yc).cwiseAbs().maxCoeff() / static_cast<double>(d.x.rows());
    auto at = fit_lasso(d.x, d.y, lambda_max * (1.0 + 1e-9));
    EXPECT_EQ(at->coef().cwiseAbs().maxCoeff(), 0.0);
    EXPECT_NEAR(at->intercept(), d.y.mean(), 1e-12);
    auto below = fit_lasso(d.x, d.y, 0.99 * lambda_max);
    EXPECT_GT(below->coef().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Lasso, SingleColumnSoftThreshold) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(80, 1, [&] { return 3.0 + 2.0 * z(rng); });
    Eigen::VectorXd y = 0.7 * x.col(0) + Eigen::VectorXd::NullaryExpr(80, [&] { return z(rng); });
    Eigen::RowVectorXd sd;
    const Eigen::MatrixXd zs = standardize(x, sd);
    const Eigen::VectorXd yc = y.array() - y.mean();
    const double rho = zs.col(0).dot(yc) / 80.0;
    for (double lambda : {0.0, 0.1, 0.5, 1.0, rho * 0.999, rho * 1.5}) {
        auto m = fit_lasso(x, y, lambda);
        EXPECT_NEAR(m->coef()[0] * sd[0], soft(rho, lambda), 1e-5) << "lambda " << lambda;
    }
}

TEST(Lasso, KarushKuhnTuckerConditions) {
    auto d = linear_draw(150, 8, 33, 1.0);
    Eigen::RowVectorXd sd;
    const Eigen::MatrixXd z = standardize(d.x, sd);
    const Eigen::VectorXd yc = d.y.array() - d.y.mean();
    const double n = static_cast<double>(d.x.rows());
    const double lambda_max = (z.transpose() * yc).cwiseAbs().maxCoeff() / n;
    for (double frac : {0.5, 0.1, 0.02}) {
        const double lambda = frac * lambda_max;
        auto m = fit_lasso(d.x, d.y, lambda);
        const Eigen::VectorXd b = m->coef().cwiseProduct(sd.transpose());
        const Eigen::VectorXd grad = z.transpose() * (yc - z * b) / n;
        int active = 0;
        for (int j = 0; j < 8; ++j) {
            if (b[j] != 0.0) {
                ++active;
                EXPECT_NEAR(grad[j], lambda * (b[j] > 0 ? 1.0 : -1.0), 1e-5);
            } else {
                EXPECT_LE(std::abs(grad[j]), lambda + 1e-5);
            }
        }
        EXPECT_GT(active, 0);
    }
}

TEST(Lasso, CrossValidationTiesGoToLargerPenalty) {
    auto d = linear_draw(100, 3, 8);
    auto cv = fit_lasso_cv(d.x, d.y, std::vector<double>{1e6, 2e6}, 4);
    EXPECT_EQ(cv->cv_mse()[0], cv->cv_mse()[1]);
    EXPECT_EQ(cv->chosen_lambda(), 2e6);
}

TEST(Lasso, CrossValidationPrefersSmallPenaltyOnCleanSignal) {
    auto d = linear_draw(200, 4, 6, 0.1);
    auto cv = fit_lasso_cv(d.x, d.y, std::nullopt, 5);
    EXPECT_EQ(cv->lambdas().size(), 50u);
    EXPECT_LT(cv->chosen_lambda(), cv->lambdas().front() * 0.05);
    const Eigen::VectorXd err = cv->predict(d.x) - d.y;
    EXPECT_LT(std::sqrt(err.squaredNorm() / 200.0), 0.2);
}

TEST(Lasso, Errors) {
    auto d = linear_draw(30, 2, 1);
    EXPECT_THROW(fit_lasso_cv(d.x, d.y, std::vector<double>{}, 5), EmptyGrid);
    LearnerSpec spec(LearnerKind::LassoCV);
    EXPECT_THROW(spec.set_lambda_grid({}), EmptyGrid);
    d.y[3] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(fit_lasso_cv(d.x, d.y, std::nullopt, 5), NonFiniteInput);
}

TEST(LearnerSpec, BoundsAndDefaults) {
    LearnerSpec b(LearnerKind::GradientBoosting);
    EXPECT_EQ(b.get_int("n_rounds"), 100);
    EXPECT_DOUBLE_EQ(b.get("learning_rate"), 0.3);
    EXPECT_THROW(b.set("learning_rate", 0.0), ConfigError);
    EXPECT_THROW(b.set("max_depth", 0), ConfigError);
    EXPECT_THROW(b.set("max_depth", 2.5), ConfigError);
    EXPECT_THROW(b.set("n_rounds", 0), ConfigError);
    EXPECT_THROW(b.set("depth", 3), ConfigError);
    EXPECT_THROW(LearnerSpec(LearnerKind::Ridge).set("penalty", -1), ConfigError);
    EXPECT_EQ(parse_learner_kind("xgboost"), LearnerKind::GradientBoosting);
    EXPECT_EQ(parse_learner_kind("lasso_cv"), LearnerKind::LassoCV);
    EXPECT_THROW(parse_learner_kind("nnet"), ConfigError);
    b.set("max_depth", 3);
    EXPECT_EQ(b.describe(), "boosting(l2_penalty=1, learning_rate=0.3, max_depth=3, min_leaf=1, n_rounds=100)");
}

TEST(LearnerSpec, DispatchFitsDeterministically) {
    auto d = linear_draw(80, 3, 2);
    for (auto kind : {LearnerKind::Ridge, LearnerKind::LassoCV, LearnerKind::RegressionTree,
                      LearnerKind::GradientBoosting}) {
        LearnerSpec spec(kind);
        auto a = fit_learner(spec, d.x, d.y)->predict(d.x);
        auto b = fit_learner(spec, d.x, d.y)->predict(d.x);
        EXPECT_EQ(a, b);
        EXPECT_TRUE(a.allFinite());
    }
}

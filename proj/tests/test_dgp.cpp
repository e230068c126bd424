#include <gtest/gtest.h>

#include <cmath>

#include <paneldml/dgp.hpp>

using namespace paneldml;

namespace {

double mean(const Eigen::VectorXd& v) { return v.mean(); }
double var(const Eigen::VectorXd& v) { return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1); }
double corr(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::ArrayXd da = a.array() - a.mean();
    const Eigen::ArrayXd db = b.array() - b.mean();
    return (da * db).sum() / std::sqrt(da.square().sum() * db.square().sum());
}

}  // namespace

TEST(Dgp, NuisanceFunctions) {
    EXPECT_DOUBLE_EQ(dgp_m0(2, 3), 0.25 * 2 + 0.5 * 6);
    EXPECT_DOUBLE_EQ(dgp_m0(-2, 3), -3.0);
    EXPECT_DOUBLE_EQ(dgp_g0(2, -1), -1.0);
    EXPECT_DOUBLE_EQ(dgp_g0(1, 2), 1.5);
}

TEST(Dgp, FullCorrelationGivesAlphaEqualA) {
    DgpParams p;
    p.n_obs = 500;
    p.t_per = 2;
    p.dim_x = 3;
    p.rho = 1.0;
    DgpDraws dr;
    make_plpr_data(p, &dr);
    EXPECT_EQ(dr.alpha, dr.a);
}

TEST(Dgp, NoCorrelationDecouplesAlpha) {
    DgpParams p;
    p.n_obs = 10000;
    p.t_per = 2;
    p.dim_x = 3;
    p.rho = 0.0;
    DgpDraws dr;
    make_plpr_data(p, &dr);
    EXPECT_LT(std::abs(corr(dr.alpha, dr.a)), 0.03);
}

TEST(Dgp, SubjectEffectMoments) {
    for (double rho : {0.0, 0.5, 0.8}) {
        DgpParams p;
        p.n_obs = 10000;
        p.t_per = 2;
        p.dim_x = 3;
        p.rho = rho;
        p.seed = 77;
        DgpDraws dr;
        make_plpr_data(p, &dr);
        const double target = rho * rho * 3.0 + (1 - rho * rho);
        EXPECT_NEAR(var(dr.alpha), target, 0.1 * target) << "rho " << rho;
        EXPECT_NEAR(mean(dr.alpha), 3.0 * rho, 0.05);
        EXPECT_NEAR(mean(dr.a), 3.0, 0.05);
        EXPECT_NEAR(var(dr.a), 3.0, 0.15);
        EXPECT_NEAR(var(dr.gamma), 5.0, 0.25);
    }
}

TEST(Dgp, ResidualMoments) {
    DgpParams p;
    p.n_obs = 10000;
    p.t_per = 10;
    p.dim_x = 3;
    DgpDraws dr;
    auto data = make_plpr_data(p, &dr);
    const auto n = static_cast<Eigen::Index>(data.n_obs());
    Eigen::VectorXd u(n), v(n), e(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto s = static_cast<Eigen::Index>(data.subject_of_row()[static_cast<std::size_t>(r)]);
        u[r] = data.y()[r] - data.d()[r] * p.theta - dr.g0[r] - dr.alpha[s];
        v[r] = data.d()[r] - dr.m0[r] - dr.gamma[s];
        e[r] = data.x()(r, 1) - dr.a[s];
        EXPECT_EQ(dr.m0[r], dgp_m0(data.x()(r, 0), data.x()(r, 2)));
        EXPECT_EQ(dr.g0[r], dgp_g0(data.x()(r, 0), data.x()(r, 2)));
    }
    // 1e5 draws: se of the mean is about 0.003
    EXPECT_NEAR(mean(u), 0.0, 0.015);
    EXPECT_NEAR(std::sqrt(var(u)), 1.0, 0.02);
    EXPECT_NEAR(mean(v), 0.0, 0.015);
    EXPECT_NEAR(std::sqrt(var(v)), 1.0, 0.02);
    EXPECT_NEAR(var(e), 5.0, 0.1);
}

TEST(Dgp, LayoutAndDeterminism) {
    DgpParams p;
    p.n_obs = 30;
    p.t_per = 4;
    p.dim_x = 5;
    p.seed = 9;
    auto a = make_plpr_data(p);
    auto b = make_plpr_data(p);
    EXPECT_EQ(a.y(), b.y());
    EXPECT_EQ(a.d(), b.d());
    EXPECT_EQ(a.x(), b.x());
    p.seed = 10;
    EXPECT_NE(make_plpr_data(p).y(), a.y());
    ASSERT_EQ(a.n_obs(), 120u);
    EXPECT_EQ(a.x_names().back(), "X5");
    for (std::size_t s = 0; s < 30; ++s) {
        EXPECT_EQ(a.subjects()[s].id, std::to_string(s + 1));
        for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(a.time_ids()[s * 4 + t], static_cast<long long>(t + 1));
    }
}

TEST(Dgp, ValidatesParameters) {
    DgpParams p;
    p.dim_x = 2;
    EXPECT_THROW(make_plpr_data(p), ConfigError);
    p = DgpParams{};
    p.rho = 1.5;
    EXPECT_THROW(make_plpr_data(p), ConfigError);
    p = DgpParams{};
    p.t_per = 1;
    EXPECT_THROW(make_plpr_data(p), ConfigError);
}

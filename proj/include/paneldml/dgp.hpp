#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "errors.hpp"
#include "panel_data.hpp"

namespace paneldml {

/// Parameters of the partially linear panel data generator.
struct DgpParams {
    int n_obs = 1000;  // subjects N
    int t_per = 10;    // periods T
    int dim_x = 20;    // covariates p
    double theta = 0.5;
    double rho = 0.8;
    std::uint64_t seed = 1234;

    void validate() const {
        if (n_obs < 1) throw ConfigError("n_obs must be >= 1");
        if (t_per < 2) throw ConfigError("t_per must be >= 2");
        if (dim_x < 3) throw ConfigError("dim_x must be >= 3");
        if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in [0, 1]");
        if (!std::isfinite(theta)) throw ConfigError("theta must be finite");
    }
};

/// Draws used to build a simulated panel, kept for moment checks.
struct DgpDraws {
    Eigen::VectorXd a;      // A_i
    Eigen::VectorXd alpha;  // alpha_i
    Eigen::VectorXd gamma;  // gamma_i
    Eigen::VectorXd g0;     // g0(X_it) per row
    Eigen::VectorXd m0;     // m0(X_it) per row
};

inline double dgp_m0(double x1, double x3) { return 0.25 * x1 * (x1 > 0.0 ? 1.0 : 0.0) + 0.5 * x1 * x3; }
inline double dgp_g0(double x1, double x3) { return 0.5 * x1 * x3 + 0.25 * x3 * (x3 > 0.0 ? 1.0 : 0.0); }

/// Y = D theta + g0(X) + alpha_i + U,  D = m0(X) + gamma_i + V, with
/// U, V ~ N(0,1), A_i ~ N(3, var 3), B_i ~ N(0,1), alpha_i = rho A_i +
/// sqrt(1 - rho^2) B_i, gamma_i ~ N(0, var 5) and X_itj = A_i + N(0, var 5).
/// Rows come out ordered by (id, time) with ids 1..N and times 1..T.
inline PanelDataset make_plpr_data(const DgpParams& params, DgpDraws* draws = nullptr) {
    params.validate();
    const int n = params.n_obs;
    const int t = params.t_per;
    const int p = params.dim_x;
    const auto rows = static_cast<Eigen::Index>(n) * t;

    std::mt19937_64 rng(params.seed);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    const double sd3 = std::sqrt(3.0);
    const double sd5 = std::sqrt(5.0);
    const double rho_c = std::sqrt(1.0 - params.rho * params.rho);

    RawPanel raw;
    raw.x.resize(rows, p);
    raw.panel_id.reserve(static_cast<std::size_t>(rows));
    DgpDraws local;
    DgpDraws& dr = draws ? *draws : local;
    dr.a.resize(n);
    dr.alpha.resize(n);
    dr.gamma.resize(n);
    dr.g0.resize(rows);
    dr.m0.resize(rows);

    Eigen::Index r = 0;
    for (int i = 0; i < n; ++i) {
        const double a = 3.0 + sd3 * std_normal(rng);
        const double b = std_normal(rng);
        const double alpha = params.rho * a + rho_c * b;
        const double gamma = sd5 * std_normal(rng);
        dr.a[i] = a;
        dr.alpha[i] = alpha;
        dr.gamma[i] = gamma;
        for (int s = 0; s < t; ++s, ++r) {
            for (int j = 0; j < p; ++j) raw.x(r, j) = a + sd5 * std_normal(rng);
            const double x1 = raw.x(r, 0);
            const double x3 = raw.x(r, 2);
            const double m0 = dgp_m0(x1, x3);
            const double g0 = dgp_g0(x1, x3);
            const double d = m0 + gamma + std_normal(rng);
            const double y = d * params.theta + g0 + alpha + std_normal(rng);
            dr.m0[r] = m0;
            dr.g0[r] = g0;
            raw.panel_id.push_back(std::to_string(i + 1));
            raw.time_id.push_back(s + 1);
            raw.y.push_back(y);
            raw.d.push_back(d);
        }
    }
    return PanelDataset::build(std::move(raw));
}

}  // namespace paneldml

#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "panel_data.hpp"

namespace paneldml {

/// How unobserved subject heterogeneity is handled.
enum class ApproachKind { FDExact, WGApprox, CRE, Pooled };

/// Pre-processing applied to the predictor set after the approach transform.
enum class CovariateTransform { None, Poly, MinMax };

inline std::string_view to_string(ApproachKind k) {
    switch (k) {
        case ApproachKind::FDExact: return "fd-exact";
        case ApproachKind::WGApprox: return "wg-approx";
        case ApproachKind::CRE: return "cre";
        case ApproachKind::Pooled: return "pooled";
    }
    return "?";
}

inline std::string_view to_string(CovariateTransform k) {
    switch (k) {
        case CovariateTransform::None: return "no";
        case CovariateTransform::Poly: return "poly";
        case CovariateTransform::MinMax: return "minmax";
    }
    return "?";
}

inline ApproachKind parse_approach(std::string_view s) {
    if (s == "fd-exact") return ApproachKind::FDExact;
    if (s == "wg-approx") return ApproachKind::WGApprox;
    if (s == "cre") return ApproachKind::CRE;
    if (s == "pooled") return ApproachKind::Pooled;
    throw ConfigError("approach: unknown value '" + std::string(s) +
                      "' (expected fd-exact, wg-approx, cre or pooled)");
}

inline CovariateTransform parse_covariate_transform(std::string_view s) {
    if (s == "no" || s == "none") return CovariateTransform::None;
    if (s == "poly") return CovariateTransform::Poly;
    if (s == "minmax") return CovariateTransform::MinMax;
    throw ConfigError("transformX: unknown value '" + std::string(s) + "' (expected no, poly or minmax)");
}

/// Outcome, treatment and predictors as the nuisance learners see them.
struct TransformedTask {
    ApproachKind approach = ApproachKind::FDExact;
    CovariateTransform covariate_transform = CovariateTransform::None;

    Eigen::VectorXd y;
    Eigen::VectorXd d;
    Eigen::MatrixXd features;
    std::vector<std::string> feature_names;

    std::vector<std::size_t> row_map;  // retained row -> row of the source PanelDataset
    std::vector<int> subject;          // subject index per retained row
    std::vector<int> cluster;          // cluster code per retained row
    std::size_t n_subjects = 0;
    std::size_t n_clusters = 0;

    std::size_t n_rows() const { return static_cast<std::size_t>(y.size()); }
    std::size_t n_features() const { return static_cast<std::size_t>(features.cols()); }
};

/// Applies the panel approach: WG demeans per subject, FD differences
/// consecutive observed rows and stacks (X_t, X_t-1), CRE appends subject
/// means of X and D, Pooled passes data through.
inline TransformedTask apply_approach(const PanelDataset& data, ApproachKind kind) {
    TransformedTask t;
    t.approach = kind;
    t.n_subjects = data.n_subjects();
    t.n_clusters = data.n_clusters();

    const auto& x = data.x();
    const Eigen::Index p = x.cols();
    const std::size_t n = data.n_obs();

    auto copy_ids = [&](std::size_t src) {
        t.row_map.push_back(src);
        t.subject.push_back(data.subject_of_row()[src]);
        t.cluster.push_back(data.cluster_of_row()[src]);
    };

    switch (kind) {
        case ApproachKind::Pooled: {
            t.y = data.y();
            t.d = data.d();
            t.features = x;
            t.feature_names = data.x_names();
            for (std::size_t r = 0; r < n; ++r) copy_ids(r);
            break;
        }
        case ApproachKind::WGApprox: {
            t.y.resize(n);
            t.d.resize(n);
            t.features.resize(n, p);
            for (const auto& s : data.subjects()) {
                const auto b = static_cast<Eigen::Index>(s.begin);
                const auto len = static_cast<Eigen::Index>(s.size());
                t.y.segment(b, len) = data.y().segment(b, len).array() - data.y().segment(b, len).mean();
                t.d.segment(b, len) = data.d().segment(b, len).array() - data.d().segment(b, len).mean();
                auto block = x.middleRows(b, len);
                t.features.middleRows(b, len) = block.rowwise() - block.colwise().mean();
            }
            t.feature_names = data.x_names();
            for (std::size_t r = 0; r < n; ++r) copy_ids(r);
            break;
        }
        case ApproachKind::FDExact: {
            const std::size_t m = n - data.n_subjects();
            t.y.resize(static_cast<Eigen::Index>(m));
            t.d.resize(static_cast<Eigen::Index>(m));
            t.features.resize(static_cast<Eigen::Index>(m), 2 * p);
            Eigen::Index out = 0;
            for (const auto& s : data.subjects()) {
                for (std::size_t r = s.begin + 1; r < s.end; ++r, ++out) {
                    const auto cur = static_cast<Eigen::Index>(r);
                    t.y[out] = data.y()[cur] - data.y()[cur - 1];
                    t.d[out] = data.d()[cur] - data.d()[cur - 1];
                    t.features.row(out).head(p) = x.row(cur);
                    t.features.row(out).tail(p) = x.row(cur - 1);
                    copy_ids(r);
                }
            }
            t.feature_names = data.x_names();
            for (const auto& name : data.x_names()) t.feature_names.push_back(name + "_lag");
            break;
        }
        case ApproachKind::CRE: {
            t.y = data.y();
            t.d = data.d();
            t.features.resize(static_cast<Eigen::Index>(n), 2 * p + 1);
            for (const auto& s : data.subjects()) {
                const auto b = static_cast<Eigen::Index>(s.begin);
                const auto len = static_cast<Eigen::Index>(s.size());
                t.features.block(b, 0, len, p) = x.middleRows(b, len);
                t.features.block(b, p, len, p).rowwise() = x.middleRows(b, len).colwise().mean();
                t.features.col(2 * p).segment(b, len).setConstant(data.d().segment(b, len).mean());
            }
            t.feature_names = data.x_names();
            for (const auto& name : data.x_names()) t.feature_names.push_back("m_" + name);
            t.feature_names.push_back("m_" + data.d_name());
            for (std::size_t r = 0; r < n; ++r) copy_ids(r);
            break;
        }
    }
    return t;
}

/// Number of monomials of degree 1..3 in q variables.
constexpr std::size_t poly_column_count(std::size_t q) {
    return q + q * (q + 1) / 2 + q * (q + 1) * (q + 2) / 6;
}

namespace detail {

inline Eigen::MatrixXd polynomial_features(const Eigen::MatrixXd& f, const std::vector<std::string>& names,
                                           std::vector<std::string>& out_names) {
    const Eigen::Index q = f.cols();
    Eigen::MatrixXd out(f.rows(), static_cast<Eigen::Index>(poly_column_count(static_cast<std::size_t>(q))));
    out_names.clear();
    Eigen::Index c = 0;
    for (Eigen::Index j = 0; j < q; ++j, ++c) {
        out.col(c) = f.col(j);
        out_names.push_back(names[j]);
    }
    for (Eigen::Index j = 0; j < q; ++j) {
        for (Eigen::Index k = j; k < q; ++k, ++c) {
            out.col(c) = f.col(j).cwiseProduct(f.col(k));
            out_names.push_back(names[j] + "*" + names[k]);
        }
    }
    for (Eigen::Index j = 0; j < q; ++j) {
        for (Eigen::Index k = j; k < q; ++k) {
            for (Eigen::Index l = k; l < q; ++l, ++c) {
                out.col(c) = f.col(j).cwiseProduct(f.col(k)).cwiseProduct(f.col(l));
                out_names.push_back(names[j] + "*" + names[k] + "*" + names[l]);
            }
        }
    }
    return out;
}

}  // namespace detail

namespace detail {

inline void minmax_columns(Eigen::Ref<Eigen::MatrixXd> f) {
    for (Eigen::Index j = 0; j < f.cols(); ++j) {
        auto col = f.col(j);
        const double lo = col.minCoeff();
        const double hi = col.maxCoeff();
        if (hi > lo) {
            col = (col.array() - lo) / (hi - lo);
        } else {
            col.setZero();
        }
    }
}

}  // namespace detail

/// Expands or rescales every predictor column of a task jointly. Poly emits
/// each monomial of degree 1 to 3 ordered by degree, then by index tuple.
/// MinMax maps each column onto [0, 1]; constant columns become 0.
inline TransformedTask apply_covariate_transform(TransformedTask task, CovariateTransform kind) {
    task.covariate_transform = kind;
    switch (kind) {
        case CovariateTransform::None:
            break;
        case CovariateTransform::Poly: {
            std::vector<std::string> names;
            task.features = detail::polynomial_features(task.features, task.feature_names, names);
            task.feature_names = std::move(names);
            break;
        }
        case CovariateTransform::MinMax:
            detail::minmax_columns(task.features);
            break;
    }
    return task;
}

/// Builds the learner task. The covariate transform acts on the raw X of
/// every observation, and the approach is then applied to the transformed
/// covariates: Pooled T(X); WG Q(T(X)); FD (T(X)_t, T(X)_t-1); CRE
/// (T(X), subject means of T(X), mean of D). Under MinMax the CRE treatment
/// mean is rescaled as well; under Poly it enters as is.
inline TransformedTask make_task(const PanelDataset& data, ApproachKind approach,
                                 CovariateTransform transform_x = CovariateTransform::None) {
    if (transform_x == CovariateTransform::None) return apply_approach(data, approach);
    TransformedTask raw;
    raw.features = data.x();
    raw.feature_names = data.x_names();
    raw = apply_covariate_transform(std::move(raw), transform_x);
    TransformedTask t = apply_approach(data.with_covariates(std::move(raw.features), std::move(raw.feature_names)),
                                       approach);
    if (approach == ApproachKind::CRE && transform_x == CovariateTransform::MinMax) {
        detail::minmax_columns(t.features.rightCols(1));
    }
    t.covariate_transform = transform_x;
    return t;
}

}  // namespace paneldml

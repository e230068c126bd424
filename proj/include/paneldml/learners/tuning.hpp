#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "../learners.hpp"

namespace paneldml {

/// One tunable hyperparameter: either an explicit candidate list or a
/// [lower, upper] range expanded to `resolution` equally spaced points.
struct ParamAxis {
    std::string name;
    double lower = 0.0;
    double upper = 0.0;
    std::optional<std::vector<double>> values;  // explicit candidates, else the range

    static ParamAxis range(std::string name, double lower, double upper) {
        return {std::move(name), lower, upper, std::nullopt};
    }
    static ParamAxis list(std::string name, std::vector<double> values) {
        return {std::move(name), 0.0, 0.0, std::move(values)};
    }
};

/// Order in which grid points are scored. Shuffled draws a seeded
/// permutation of the full grid, so a budget smaller than the grid samples
/// every axis; Lexicographic varies the first axis slowest.
enum class GridOrder { Shuffled, Lexicographic };

/// Search spaces keyed by nuisance name ("ml_l", "ml_m", "ml_g") plus the
/// shared tuning settings.
struct ParamGrid {
    std::map<std::string, std::vector<ParamAxis>> spaces;
    int resolution = 10;
    int n_evals = 0;  // 0 evaluates the whole grid
    int cv_folds = 5;
    bool tune_on_folds = false;
    bool subject_level_cv = false;
    GridOrder order = GridOrder::Shuffled;

    void validate() const {
        if (resolution < 1) throw ConfigError("tuning.resolution must be >= 1");
        if (n_evals < 0) throw ConfigError("tuning.n_evals must be >= 0");
        if (cv_folds < 2) throw ConfigError("tuning.cv_folds must be >= 2");
        for (const auto& [nuisance, axes] : spaces) {
            for (const auto& a : axes) {
                if (a.values && a.values->empty()) throw EmptyGrid("tuning." + nuisance + "." + a.name + ": no values");
                if (!a.values && !(a.upper >= a.lower)) {
                    throw ConfigError("tuning." + nuisance + "." + a.name + ": upper bound below lower bound");
                }
            }
        }
    }
};

/// Candidate values of one axis. Integer hyperparameters are rounded to the
/// nearest integer and deduplicated.
inline std::vector<double> expand_axis(const ParamAxis& axis, int resolution, bool integer) {
    std::vector<double> out;
    if (axis.values) {
        out = *axis.values;
    } else {
        if (resolution == 1 || axis.upper == axis.lower) {
            out.push_back(axis.lower);
        } else {
            const double step = (axis.upper - axis.lower) / (resolution - 1);
            for (int i = 0; i < resolution; ++i) {
                out.push_back(i + 1 == resolution ? axis.upper : axis.lower + step * i);
            }
        }
    }
    if (integer) {
        for (double& v : out) v = std::round(v);
        out.erase(std::unique(out.begin(), out.end()), out.end());
    }
    if (out.empty()) throw EmptyGrid("no candidate values for '" + axis.name + "'");
    return out;
}

/// Cartesian product of the axes applied on top of base, first axis varying
/// slowest.
inline std::vector<LearnerSpec> enumerate_configs(const LearnerSpec& base, const std::vector<ParamAxis>& axes,
                                                  int resolution) {
    std::vector<std::vector<double>> values;
    for (const auto& a : axes) {
        bool integer = false;
        for (const auto& d : declared_params(base.kind())) {
            if (d.name == a.name) integer = d.integer;
        }
        if (!base.has(a.name)) {
            throw ConfigError(std::string(to_string(base.kind())) + " has no hyperparameter '" + a.name + "'");
        }
        values.push_back(expand_axis(a, resolution, integer));
    }
    std::vector<LearnerSpec> out;
    std::vector<std::size_t> idx(axes.size(), 0);
    while (true) {
        LearnerSpec s = base;
        for (std::size_t a = 0; a < axes.size(); ++a) s.set(axes[a].name, values[a][idx[a]]);
        out.push_back(std::move(s));
        std::size_t a = axes.size();
        while (a > 0) {
            --a;
            if (++idx[a] < values[a].size()) break;
            idx[a] = 0;
            if (a == 0) return out;
        }
        if (axes.empty()) return out;
    }
}

/// Row-level CV folds: a seeded shuffle of rows dealt round-robin.
inline std::vector<int> row_cv_folds(std::size_t n, int k, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> fold(n);
    for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    return fold;
}

/// CV folds that keep every group (subject) whole.
inline std::vector<int> grouped_cv_folds(std::span<const int> group_of_row, int k, std::uint64_t seed) {
    std::vector<int> groups(group_of_row.begin(), group_of_row.end());
    std::sort(groups.begin(), groups.end());
    groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
    std::mt19937_64 rng(seed);
    std::shuffle(groups.begin(), groups.end(), rng);
    std::map<int, int> fold_of_group;
    for (std::size_t i = 0; i < groups.size(); ++i) fold_of_group[groups[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    std::vector<int> fold;
    fold.reserve(group_of_row.size());
    for (int g : group_of_row) fold.push_back(fold_of_group[g]);
    return fold;
}

/// k-fold CV mean squared error of one configuration.
inline double cv_mse(const LearnerSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x,
                     const Eigen::Ref<const Eigen::VectorXd>& y, std::span<const int> fold_of_row) {
    const int k = fold_of_row.empty() ? 0 : *std::max_element(fold_of_row.begin(), fold_of_row.end()) + 1;
    double sse = 0.0;
    for (int f = 0; f < k; ++f) {
        std::vector<Eigen::Index> train, test;
        for (std::size_t i = 0; i < fold_of_row.size(); ++i) {
            (fold_of_row[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
        }
        if (test.empty() || train.empty()) continue;
        Eigen::MatrixXd x_train = x(train, Eigen::all);
        Eigen::VectorXd y_train = y(train);
        auto model = fit_learner(spec, x_train, y_train);
        Eigen::MatrixXd x_test = x(test, Eigen::all);
        sse += (model->predict(x_test) - y(test)).squaredNorm();
    }
    return sse / static_cast<double>(y.size());
}

struct TuneResult {
    LearnerSpec best;
    double best_mse = std::numeric_limits<double>::infinity();
    std::vector<LearnerSpec> evaluated;
    std::vector<double> mse;
};

/// Grid search: configurations are scored by CV MSE in the order set by
/// settings.order (permuted with order_seed when shuffled) and the search
/// stops after n_evals evaluations. Ties keep the earliest scored.
inline TuneResult tune_grid(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                            const LearnerSpec& base, const std::vector<ParamAxis>& axes, const ParamGrid& settings,
                            std::span<const int> fold_of_row, std::uint64_t order_seed = 0) {
    settings.validate();
    if (fold_of_row.size() != static_cast<std::size_t>(y.size())) {
        throw DimensionMismatch("tuning fold map does not match row count");
    }
    auto configs = enumerate_configs(base, axes, settings.resolution);
    if (settings.order == GridOrder::Shuffled) {
        std::mt19937_64 rng(order_seed);
        std::shuffle(configs.begin(), configs.end(), rng);
    }
    if (settings.n_evals > 0 && configs.size() > static_cast<std::size_t>(settings.n_evals)) {
        configs.resize(static_cast<std::size_t>(settings.n_evals));
    }
    TuneResult out;
    out.best = configs.front();
    for (auto& c : configs) {
        const double m = cv_mse(c, x, y, fold_of_row);
        if (m < out.best_mse) {
            out.best_mse = m;
            out.best = c;
        }
        out.evaluated.push_back(std::move(c));
        out.mse.push_back(m);
    }
    return out;
}

}  // namespace paneldml

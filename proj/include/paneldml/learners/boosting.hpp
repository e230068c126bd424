#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "tree.hpp"

namespace paneldml {

struct BoostingParams {
    int n_rounds = 100;
    double learning_rate = 0.3;
    int max_depth = 6;
    double l2_penalty = 1.0;
    int min_leaf = 1;
};

class BoostedTreesModel final : public FittedLearner {
public:
    BoostedTreesModel(double base, std::vector<RegressionTree> trees, std::vector<double> train_mse, std::size_t q)
        : base_(base), trees_(std::move(trees)), train_mse_(std::move(train_mse)), q_(q) {}

    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const override {
        check_width(x);
        Eigen::VectorXd out = Eigen::VectorXd::Constant(x.rows(), base_);
        for (const auto& t : trees_) {
            for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] += t.predict_row(x, i);
        }
        return out;
    }
    std::size_t n_features() const override { return q_; }

    double base_score() const { return base_; }
    const std::vector<RegressionTree>& trees() const { return trees_; }
    /// Training MSE after 0, 1, ..., n_rounds rounds.
    const std::vector<double>& train_mse() const { return train_mse_; }

private:
    double base_;
    std::vector<RegressionTree> trees_;
    std::vector<double> train_mse_;
    std::size_t q_;
};

/// Squared-error gradient boosting. Starts from mean(y); every round grows a
/// depth-limited tree on the current residuals whose leaves hold
/// learning_rate * sum(residual) / (count + l2_penalty).
inline std::shared_ptr<const BoostedTreesModel> fit_boosting(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                                             const Eigen::Ref<const Eigen::VectorXd>& y,
                                                             const BoostingParams& params) {
    detail::check_training_data(x, y);
    if (params.n_rounds < 0) throw ConfigError("boosting n_rounds must be >= 0");
    if (!(params.learning_rate >= 0.0 && params.learning_rate <= 1.0)) {
        throw ConfigError("boosting learning_rate must lie in [0, 1]");
    }
    if (!(params.l2_penalty >= 0.0)) throw ConfigError("boosting l2_penalty must be >= 0");
    if (params.min_leaf < 1) throw ConfigError("boosting min_leaf must be >= 1");

    const double base = y.mean();
    Eigen::VectorXd resid = y.array() - base;
    const double n = static_cast<double>(y.size());

    detail::SortedColumns sorted(x);
    const detail::TreeGrowth growth{params.max_depth, params.min_leaf, params.l2_penalty, params.learning_rate};

    std::vector<RegressionTree> trees;
    trees.reserve(static_cast<std::size_t>(params.n_rounds));
    std::vector<double> mse{resid.squaredNorm() / n};
    std::vector<int> leaf_of;
    for (int round = 0; round < params.n_rounds; ++round) {
        RegressionTree tree = detail::grow_tree(x, sorted, resid, growth, leaf_of);
        const auto& nodes = tree.nodes();
        for (Eigen::Index i = 0; i < resid.size(); ++i) {
            resid[i] -= nodes[static_cast<std::size_t>(leaf_of[static_cast<std::size_t>(i)])].value;
        }
        mse.push_back(resid.squaredNorm() / n);
        trees.push_back(std::move(tree));
    }
    return std::make_shared<const BoostedTreesModel>(base, std::move(trees), std::move(mse),
                                                     static_cast<std::size_t>(x.cols()));
}

}  // namespace paneldml

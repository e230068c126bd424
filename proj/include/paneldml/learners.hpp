#pragma once

#include "learners/boosting.hpp"
#include "learners/learner.hpp"
#include "learners/linear.hpp"
#include "learners/tree.hpp"

#include <optional>
#include <vector>

namespace paneldml {

/// Fits the learner described by spec.
inline FittedLearnerPtr fit_learner(const LearnerSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                    const Eigen::Ref<const Eigen::VectorXd>& y) {
    switch (spec.kind()) {
        case LearnerKind::Ridge:
            return fit_ridge(x, y, spec.get("penalty"));
        case LearnerKind::LassoCV: {
            std::optional<std::vector<double>> grid;
            if (!spec.lambda_grid().empty()) grid = spec.lambda_grid();
            return fit_lasso_cv(x, y, std::move(grid), spec.get_int("cv_folds"), spec.get_int("n_lambda"),
                                spec.get("lambda_min_ratio"));
        }
        case LearnerKind::RegressionTree:
            return fit_tree(x, y, spec.get_int("max_depth"), spec.get_int("min_leaf"));
        case LearnerKind::GradientBoosting:
            return fit_boosting(x, y,
                                {spec.get_int("n_rounds"), spec.get("learning_rate"), spec.get_int("max_depth"),
                                 spec.get("l2_penalty"), spec.get_int("min_leaf")});
    }
    throw ConfigError("unknown learner kind");
}

}  // namespace paneldml

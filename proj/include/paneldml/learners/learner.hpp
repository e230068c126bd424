#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "../errors.hpp"

namespace paneldml {

/// Immutable fitted regression model.
class FittedLearner {
public:
    virtual ~FittedLearner() = default;

    virtual Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const = 0;
    virtual std::size_t n_features() const = 0;

protected:
    void check_width(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
        if (static_cast<std::size_t>(x.cols()) != n_features()) {
            throw DimensionMismatch("model trained on " + std::to_string(n_features()) +
                                    " features, got " + std::to_string(x.cols()));
        }
    }
};

using FittedLearnerPtr = std::shared_ptr<const FittedLearner>;

enum class LearnerKind { Ridge, LassoCV, RegressionTree, GradientBoosting };

inline std::string_view to_string(LearnerKind k) {
    switch (k) {
        case LearnerKind::Ridge: return "ridge";
        case LearnerKind::LassoCV: return "lasso_cv";
        case LearnerKind::RegressionTree: return "tree";
        case LearnerKind::GradientBoosting: return "boosting";
    }
    return "?";
}

inline LearnerKind parse_learner_kind(std::string_view s) {
    if (s == "ridge") return LearnerKind::Ridge;
    if (s == "lasso_cv" || s == "lasso") return LearnerKind::LassoCV;
    if (s == "tree") return LearnerKind::RegressionTree;
    if (s == "boosting" || s == "xgboost") return LearnerKind::GradientBoosting;
    throw ConfigError("learner: unknown kind '" + std::string(s) +
                      "' (expected ridge, lasso_cv, tree or boosting)");
}

/// A hyperparameter a learner accepts, with its admissible range.
struct ParamDecl {
    std::string name;
    double lower;
    double upper;
    bool integer;
    double default_value;
    bool lower_open = false;
};

inline const std::vector<ParamDecl>& declared_params(LearnerKind kind) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    static const std::vector<ParamDecl> ridge{{"penalty", 0.0, inf, false, 0.0}};
    static const std::vector<ParamDecl> lasso{
        {"cv_folds", 2, 100, true, 5},
        {"n_lambda", 1, 1000, true, 50},
        {"lambda_min_ratio", 0.0, 1.0, false, 1e-3, true},
    };
    static const std::vector<ParamDecl> tree{
        {"max_depth", 1, 30, true, 5},
        {"min_leaf", 1, inf, true, 5},
    };
    static const std::vector<ParamDecl> boosting{
        {"n_rounds", 1, 100000, true, 100},
        {"learning_rate", 0.0, 1.0, false, 0.3, true},
        {"max_depth", 1, 30, true, 6},
        {"l2_penalty", 0.0, inf, false, 1.0},
        {"min_leaf", 1, inf, true, 1},
    };
    switch (kind) {
        case LearnerKind::Ridge: return ridge;
        case LearnerKind::LassoCV: return lasso;
        case LearnerKind::RegressionTree: return tree;
        case LearnerKind::GradientBoosting: return boosting;
    }
    return ridge;
}

/// Learner kind plus hyperparameter values. Unset hyperparameters take the
/// declared defaults.
class LearnerSpec {
public:
    LearnerSpec() = default;
    explicit LearnerSpec(LearnerKind kind) : kind_(kind) {}
    LearnerSpec(LearnerKind kind, std::map<std::string, double> params) : kind_(kind) {
        for (const auto& [k, v] : params) set(k, v);
    }

    LearnerKind kind() const { return kind_; }

    LearnerSpec& set(const std::string& name, double value) {
        const ParamDecl& decl = find(name);
        bool below = decl.lower_open ? !(value > decl.lower) : !(value >= decl.lower);
        if (!std::isfinite(value) || below || value > decl.upper) {
            std::ostringstream msg;
            msg << to_string(kind_) << "." << name << " = " << value << " is outside "
                << (decl.lower_open ? "(" : "[") << decl.lower << ", " << decl.upper << "]";
            throw ConfigError(msg.str());
        }
        if (decl.integer && value != std::round(value)) {
            throw ConfigError(std::string(to_string(kind_)) + "." + name + " must be an integer");
        }
        params_[name] = value;
        return *this;
    }

    double get(const std::string& name) const {
        auto it = params_.find(name);
        return it != params_.end() ? it->second : find(name).default_value;
    }
    int get_int(const std::string& name) const { return static_cast<int>(std::lround(get(name))); }

    bool has(const std::string& name) const {
        for (const auto& d : declared_params(kind_)) {
            if (d.name == name) return true;
        }
        return false;
    }

    /// Explicit penalty path for LassoCV; empty means an automatic path.
    const std::vector<double>& lambda_grid() const { return lambda_grid_; }
    LearnerSpec& set_lambda_grid(std::vector<double> grid) {
        if (grid.empty()) throw EmptyGrid("lambda grid is empty");
        for (double l : grid) {
            if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("lambda grid values must be finite and >= 0");
        }
        lambda_grid_ = std::move(grid);
        return *this;
    }

    /// All hyperparameters with defaults filled in.
    std::map<std::string, double> resolved() const {
        std::map<std::string, double> out;
        for (const auto& d : declared_params(kind_)) out[d.name] = get(d.name);
        return out;
    }

    std::string describe() const {
        std::ostringstream out;
        out << to_string(kind_) << "(";
        bool first = true;
        for (const auto& [k, v] : resolved()) {
            out << (first ? "" : ", ") << k << "=" << v;
            first = false;
        }
        out << ")";
        return out.str();
    }

    bool operator==(const LearnerSpec& o) const {
        return kind_ == o.kind_ && resolved() == o.resolved() && lambda_grid_ == o.lambda_grid_;
    }

private:
    const ParamDecl& find(const std::string& name) const {
        for (const auto& d : declared_params(kind_)) {
            if (d.name == name) return d;
        }
        throw ConfigError(std::string(to_string(kind_)) + " has no hyperparameter '" + name + "'");
    }

    LearnerKind kind_ = LearnerKind::Ridge;
    std::map<std::string, double> params_;
    std::vector<double> lambda_grid_;
};

namespace detail {

inline void check_training_data(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                const Eigen::Ref<const Eigen::VectorXd>& y) {
    if (x.rows() != y.size()) {
        throw DimensionMismatch("feature rows (" + std::to_string(x.rows()) + ") != targets (" +
                                std::to_string(y.size()) + ")");
    }
    if (y.size() < 1) throw DimensionMismatch("cannot fit on zero rows");
    if (!x.allFinite() || !y.allFinite()) throw NonFiniteInput("training data contains non-finite values");
}

}  // namespace detail

}  // namespace paneldml

#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "learner.hpp"

namespace paneldml {

/// Binary regression tree. Rows with x[feature] <= threshold go left.
class RegressionTree {
public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;
    };

    RegressionTree() = default;
    explicit RegressionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

    double predict_row(const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::Index row) const {
        int i = 0;
        while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
            const Node& n = nodes_[static_cast<std::size_t>(i)];
            i = x(row, n.feature) <= n.threshold ? n.left : n.right;
        }
        return nodes_[static_cast<std::size_t>(i)].value;
    }

    const std::vector<Node>& nodes() const { return nodes_; }
    std::size_t n_leaves() const {
        return static_cast<std::size_t>(
            std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.feature < 0; }));
    }
    int depth() const { return depth_from(0); }

private:
    int depth_from(int i) const {
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.feature < 0) return 0;
        return 1 + std::max(depth_from(n.left), depth_from(n.right));
    }

    std::vector<Node> nodes_;
};

namespace detail {

/// Row indices of every column in ascending value order. Computed once per
/// training matrix and reused by every tree grown on it.
struct SortedColumns {
    std::vector<std::vector<int>> order;

    explicit SortedColumns(const Eigen::Ref<const Eigen::MatrixXd>& x) : order(static_cast<std::size_t>(x.cols())) {
        const int n = static_cast<int>(x.rows());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            auto& o = order[static_cast<std::size_t>(j)];
            o.resize(static_cast<std::size_t>(n));
            std::iota(o.begin(), o.end(), 0);
            auto col = x.col(j);
            std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return col[a] < col[b]; });
        }
    }
};

struct TreeGrowth {
    int max_depth = 5;
    int min_leaf = 1;
    double l2 = 0.0;          // leaf value = sum / (count + l2)
    double leaf_scale = 1.0;  // shrinkage applied to leaf values
};

/// Level-wise exact greedy growth. Candidate thresholds are midpoints between
/// consecutive distinct values; a split is kept only when it strictly improves
/// sum G^2/(n + l2) (the squared-error reduction when l2 = 0). Ties keep the
/// lower feature index, then the lower threshold. leaf_of receives the leaf
/// node index of every training row.
inline RegressionTree grow_tree(const Eigen::Ref<const Eigen::MatrixXd>& x, const SortedColumns& sorted,
                                const Eigen::Ref<const Eigen::VectorXd>& target, const TreeGrowth& g,
                                std::vector<int>& leaf_of) {
    using Node = RegressionTree::Node;
    const int n = static_cast<int>(x.rows());
    const int p = static_cast<int>(x.cols());

    struct Open {
        int node;
        double sum;
        double sumsq;
        int count;
    };
    struct Best {
        double gain = 0.0;
        int feature = -1;
        double threshold = 0.0;
    };
    struct Scan {
        double left_sum = 0.0;
        int left_count = 0;
        double last = 0.0;
    };

    std::vector<Node> nodes(1);
    std::vector<int> open_of(static_cast<std::size_t>(n), 0);  // index into `open`, -1 once the row sits in a leaf
    leaf_of.assign(static_cast<std::size_t>(n), 0);

    double total = 0.0;
    double total_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        total += target[i];
        total_sq += target[i] * target[i];
    }
    std::vector<Open> open{{0, total, total_sq, n}};

    auto score = [&](double sum, int count) { return sum * sum / (count + g.l2); };
    auto leaf_value = [&](double sum, int count) { return g.leaf_scale * sum / (count + g.l2); };

    for (int depth = 0; !open.empty(); ++depth) {
        std::vector<Best> best(open.size());
        if (depth < g.max_depth) {
            std::vector<Scan> scan(open.size());
            for (int j = 0; j < p; ++j) {
                std::fill(scan.begin(), scan.end(), Scan{});
                auto col = x.col(j);
                for (int row : sorted.order[static_cast<std::size_t>(j)]) {
                    const int o = open_of[static_cast<std::size_t>(row)];
                    if (o < 0) continue;
                    Scan& s = scan[static_cast<std::size_t>(o)];
                    const Open& node = open[static_cast<std::size_t>(o)];
                    const double v = col[row];
                    if (s.left_count >= g.min_leaf && v > s.last && node.count - s.left_count >= g.min_leaf) {
                        const double gain = score(s.left_sum, s.left_count) +
                                            score(node.sum - s.left_sum, node.count - s.left_count) -
                                            score(node.sum, node.count);
                        Best& b = best[static_cast<std::size_t>(o)];
                        if (gain > b.gain && gain > 1e-12 * node.sumsq) {
                            double mid = s.last + 0.5 * (v - s.last);
                            if (!(mid < v)) mid = s.last;
                            b = {gain, j, mid};
                        }
                    }
                    s.left_sum += target[row];
                    s.left_count += 1;
                    s.last = v;
                }
            }
        }

        std::vector<Open> next;
        std::vector<int> left_open(open.size(), -1);
        for (std::size_t o = 0; o < open.size(); ++o) {
            const auto id = static_cast<std::size_t>(open[o].node);
            if (best[o].feature < 0) {
                nodes[id].value = leaf_value(open[o].sum, open[o].count);
                continue;
            }
            const int left = static_cast<int>(nodes.size());
            nodes[id].feature = best[o].feature;
            nodes[id].threshold = best[o].threshold;
            nodes[id].left = left;
            nodes[id].right = left + 1;
            nodes.emplace_back();
            nodes.emplace_back();
            left_open[o] = static_cast<int>(next.size());
            next.push_back({left, 0.0, 0.0, 0});
            next.push_back({left + 1, 0.0, 0.0, 0});
        }

        for (int row = 0; row < n; ++row) {
            const int o = open_of[static_cast<std::size_t>(row)];
            if (o < 0) continue;
            const int lo = left_open[static_cast<std::size_t>(o)];
            if (lo < 0) {
                leaf_of[static_cast<std::size_t>(row)] = open[static_cast<std::size_t>(o)].node;
                open_of[static_cast<std::size_t>(row)] = -1;
                continue;
            }
            const Best& b = best[static_cast<std::size_t>(o)];
            const int child = x(row, b.feature) <= b.threshold ? lo : lo + 1;
            Open& c = next[static_cast<std::size_t>(child)];
            c.sum += target[row];
            c.sumsq += target[row] * target[row];
            c.count += 1;
            open_of[static_cast<std::size_t>(row)] = child;
        }
        open = std::move(next);
    }
    return RegressionTree(std::move(nodes));
}

}  // namespace detail

class TreeModel final : public FittedLearner {
public:
    TreeModel(RegressionTree tree, std::size_t q) : tree_(std::move(tree)), q_(q) {}

    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const override {
        check_width(x);
        Eigen::VectorXd out(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = tree_.predict_row(x, i);
        return out;
    }
    std::size_t n_features() const override { return q_; }
    const RegressionTree& tree() const { return tree_; }

private:
    RegressionTree tree_;
    std::size_t q_;
};

/// CART regression tree: greedy squared-error splits, leaves predict the mean.
inline std::shared_ptr<const TreeModel> fit_tree(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                                 const Eigen::Ref<const Eigen::VectorXd>& y, int max_depth,
                                                 int min_leaf) {
    detail::check_training_data(x, y);
    if (min_leaf < 1) throw ConfigError("tree min_leaf must be >= 1");
    if (max_depth < 0) throw ConfigError("tree max_depth must be >= 0");
    detail::SortedColumns sorted(x);
    std::vector<int> leaf_of;
    auto tree = detail::grow_tree(x, sorted, y, {max_depth, min_leaf, 0.0, 1.0}, leaf_of);
    return std::make_shared<const TreeModel>(std::move(tree), static_cast<std::size_t>(x.cols()));
}

}  // namespace paneldml

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "errors.hpp"
#include "panel_data.hpp"

namespace paneldml {

/// Block-k-fold assignment: every subject, with its whole time series, sits
/// in exactly one fold.
struct FoldAssignment {
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<int> fold_of_subject;

    std::size_t n_subjects() const { return fold_of_subject.size(); }

    std::vector<std::size_t> fold_sizes() const {
        std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
        for (int f : fold_of_subject) ++sizes[static_cast<std::size_t>(f)];
        return sizes;
    }

    /// Fold of every row, given the subject index of each row.
    std::vector<int> row_folds(std::span<const int> subject_of_row) const {
        std::vector<int> out;
        out.reserve(subject_of_row.size());
        for (int s : subject_of_row) out.push_back(fold_of_subject.at(static_cast<std::size_t>(s)));
        return out;
    }
    std::vector<int> row_folds(const PanelDataset& data) const { return row_folds(data.subject_of_row()); }
};

/// Seeded uniform permutation of subjects dealt round-robin into k folds.
inline FoldAssignment draw_block_folds(std::size_t n_subjects, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("n_folds must be >= 2");
    if (static_cast<std::size_t>(k) > n_subjects) throw TooManyFolds(k, static_cast<long>(n_subjects));
    std::vector<std::size_t> perm(n_subjects);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    FoldAssignment fa;
    fa.k = k;
    fa.seed = seed;
    fa.fold_of_subject.resize(n_subjects);
    for (std::size_t i = 0; i < n_subjects; ++i) {
        fa.fold_of_subject[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    }
    return fa;
}

inline FoldAssignment draw_block_folds(const PanelDataset& data, int k, std::uint64_t seed) {
    return draw_block_folds(data.n_subjects(), k, seed);
}

/// Rows used to train the nuisance learners and rows they predict.
struct SplitPair {
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> estimate_rows;
};

/// One pair per fold, fold j being the estimation sample. Without
/// cross-fitting only the first fold's pair is produced.
inline std::vector<SplitPair> cross_fit_schedule(const FoldAssignment& fa, std::span<const int> subject_of_row,
                                                 bool apply_cross_fitting = true) {
    const auto folds = fa.row_folds(subject_of_row);
    const int pairs = apply_cross_fitting ? fa.k : 1;
    std::vector<SplitPair> out(static_cast<std::size_t>(pairs));
    for (std::size_t r = 0; r < folds.size(); ++r) {
        for (int j = 0; j < pairs; ++j) {
            auto& pair = out[static_cast<std::size_t>(j)];
            (folds[r] == j ? pair.estimate_rows : pair.train_rows).push_back(r);
        }
    }
    return out;
}

inline std::vector<SplitPair> cross_fit_schedule(const FoldAssignment& fa, const PanelDataset& data,
                                                 bool apply_cross_fitting = true) {
    return cross_fit_schedule(fa, data.subject_of_row(), apply_cross_fitting);
}

/// No sample splitting: nuisances are trained on and predict every row.
inline std::vector<SplitPair> full_sample_schedule(std::size_t n_rows) {
    SplitPair p;
    p.train_rows.resize(n_rows);
    std::iota(p.train_rows.begin(), p.train_rows.end(), std::size_t{0});
    p.estimate_rows = p.train_rows;
    return {std::move(p)};
}

}  // namespace paneldml

#include <gtest/gtest.h>

#include <random>
#include <set>

#include <paneldml/resampling.hpp>

using namespace paneldml;

namespace {

// Subject index per row for subjects with the given lengths, rows grouped
// by subject.
std::vector<int> rows_of(const std::vector<int>& lengths) {
    std::vector<int> out;
    for (std::size_t s = 0; s < lengths.size(); ++s) out.insert(out.end(), static_cast<std::size_t>(lengths[s]), static_cast<int>(s));
    return out;
}

}  // namespace

TEST(Resampling, FoldsAreBalancedAndSeeded) {
    auto a = draw_block_folds(103, 5, 1234);
    auto sizes = a.fold_sizes();
    EXPECT_EQ(sizes, (std::vector<std::size_t>{21, 21, 21, 20, 20}));
    EXPECT_EQ(a.fold_of_subject, draw_block_folds(103, 5, 1234).fold_of_subject);
    EXPECT_NE(a.fold_of_subject, draw_block_folds(103, 5, 1235).fold_of_subject);
}

TEST(Resampling, ScheduleRotatesRoles) {
    auto fa = draw_block_folds(10, 5, 3);
    const auto subj = rows_of(std::vector<int>(10, 3));
    auto sched = cross_fit_schedule(fa, subj);
    ASSERT_EQ(sched.size(), 5u);
    std::vector<int> seen(subj.size(), 0);
    for (const auto& p : sched) {
        EXPECT_EQ(p.train_rows.size() + p.estimate_rows.size(), subj.size());
        for (auto r : p.estimate_rows) ++seen[r];
    }
    for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(Resampling, WithoutCrossFittingOnePair) {
    auto fa = draw_block_folds(12, 3, 8);
    const auto subj = rows_of(std::vector<int>(12, 2));
    auto sched = cross_fit_schedule(fa, subj, false);
    ASSERT_EQ(sched.size(), 1u);
    for (auto r : sched[0].estimate_rows) EXPECT_EQ(fa.fold_of_subject[static_cast<std::size_t>(subj[r])], 0);
    EXPECT_EQ(sched[0].estimate_rows.size(), 8u);

    auto full = full_sample_schedule(7);
    ASSERT_EQ(full.size(), 1u);
    EXPECT_EQ(full[0].train_rows, full[0].estimate_rows);
    EXPECT_EQ(full[0].train_rows.size(), 7u);
}

TEST(Resampling, Errors) {
    EXPECT_THROW(draw_block_folds(4, 5, 1), TooManyFolds);
    EXPECT_THROW(draw_block_folds(4, 1, 1), ConfigError);
    EXPECT_NO_THROW(draw_block_folds(5, 5, 1));
}

TEST(Resampling, PartitionAndLeakageFuzz) {
    std::mt19937_64 rng(20240611);
    for (int c = 0; c < 1000; ++c) {
        const int n_subjects = std::uniform_int_distribution<int>(2, 60)(rng);
        const int k = std::uniform_int_distribution<int>(2, std::min(n_subjects, 10))(rng);
        std::vector<int> lengths(static_cast<std::size_t>(n_subjects));
        for (int& l : lengths) l = std::uniform_int_distribution<int>(2, 8)(rng);
        const auto subj = rows_of(lengths);
        const std::uint64_t seed = rng();
        const auto fa = draw_block_folds(static_cast<std::size_t>(n_subjects), k, seed);

        // every subject in exactly one fold, folds non-empty and within one of each other
        auto sizes = fa.fold_sizes();
        ASSERT_EQ(sizes.size(), static_cast<std::size_t>(k));
        EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1u);
        EXPECT_GT(*std::min_element(sizes.begin(), sizes.end()), 0u);

        const auto sched = cross_fit_schedule(fa, subj);
        ASSERT_EQ(sched.size(), static_cast<std::size_t>(k));
        std::vector<int> estimated(subj.size(), 0);
        for (std::size_t j = 0; j < sched.size(); ++j) {
            const auto& p = sched[j];
            std::set<int> train_subjects, est_subjects;
            for (auto r : p.train_rows) train_subjects.insert(subj[r]);
            for (auto r : p.estimate_rows) {
                est_subjects.insert(subj[r]);
                ++estimated[r];
            }
            // no subject on both sides, and subjects are never split
            for (int s : est_subjects) ASSERT_EQ(train_subjects.count(s), 0u) << "case " << c;
            std::size_t rows = 0;
            for (int s : est_subjects) rows += static_cast<std::size_t>(lengths[static_cast<std::size_t>(s)]);
            EXPECT_EQ(rows, p.estimate_rows.size());
            EXPECT_EQ(p.train_rows.size() + p.estimate_rows.size(), subj.size());
            EXPECT_TRUE(std::is_sorted(p.train_rows.begin(), p.train_rows.end()));
        }
        for (int e : estimated) ASSERT_EQ(e, 1) << "case " << c;
    }
}

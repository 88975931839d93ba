#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pgdag/metrics.hpp"

using namespace pgdag;

namespace {

AdjacencyMatrix from_edges(std::size_t d, std::initializer_list<Edge> edges) {
    AdjacencyMatrix a(d);
    for (auto [i, j] : edges) a.set(i, j, true);
    return a;
}

AdjacencyMatrix random_digraph(std::size_t d, double density, Rng& rng) {
    AdjacencyMatrix a(d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            if (i != j && uniform01(rng) < density) a.set(i, j, true);
    return a;
}

}  // namespace

TEST(Confusion, Examples) {
    const auto truth = from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
    auto c = confusion(truth, truth);
    EXPECT_EQ(c.fp, 0u);
    EXPECT_EQ(c.fn, 0u);
    EXPECT_EQ(c.tp + c.fp + c.tn + c.fn, 12u);

    c = confusion(from_edges(4, {{1, 0}, {1, 2}, {2, 3}}), truth);
    EXPECT_EQ(c.fp, 1u);
    EXPECT_EQ(c.fn, 1u);
    EXPECT_EQ(c.reversals, 1u);

    c = confusion(AdjacencyMatrix(4), truth);
    EXPECT_EQ(c.fn, 3u);
    EXPECT_EQ(c.tp, 0u);
}

TEST(Shd, Examples) {
    const auto truth = from_edges(3, {{0, 1}, {1, 2}});
    EXPECT_EQ(shd(truth, truth), 0u);
    EXPECT_EQ(shd(from_edges(3, {{1, 0}, {1, 2}}), truth), 1u);
    EXPECT_EQ(shd(AdjacencyMatrix(3), truth), 2u);
    EXPECT_EQ(shd(from_edges(3, {{0, 1}, {1, 0}, {1, 2}}), truth), 1u);
}

TEST(Shd, MatchesEditCountOracle) {
    Rng rng(55);
    for (int t = 0; t < 200; ++t) {
        const auto pred = random_digraph(5, uniform01(rng), rng);
        const auto truth = random_digraph(5, uniform01(rng), rng);
        const long want = oracle::shd_edit_count(pred, truth);
        EXPECT_EQ(static_cast<long>(shd(pred, truth)), want) << "case " << t;
        EXPECT_EQ(static_cast<long>(shd(truth, pred)), oracle::shd_edit_count(truth, pred));
        EXPECT_EQ(shd(pred, truth), shd(truth, pred));
        EXPECT_LE(shd(pred, truth), 20u);
    }
}

TEST(TpNnz, Examples) {
    const auto truth = from_edges(3, {{0, 1}});
    EXPECT_DOUBLE_EQ(tp_nnz(from_edges(3, {{0, 1}, {1, 2}}), truth), 0.5);
    EXPECT_DOUBLE_EQ(tp_nnz(truth, truth), 1.0);
    EXPECT_DOUBLE_EQ(tp_nnz(AdjacencyMatrix(3), truth), 0.0);
}

TEST(Rp, Examples) {
    const std::vector<double> cohort{0.64, 0.3, 0.48};
    EXPECT_NEAR(*rp(0.48, cohort), 0.25, 1e-12);
    EXPECT_DOUBLE_EQ(*rp(0.64, cohort), 0.0);
    EXPECT_DOUBLE_EQ(*rp(0.0, cohort), 1.0);
    const std::vector<double> zeros{0.0, 0.0};
    EXPECT_FALSE(rp(0.0, zeros).has_value());
}

TEST(Report, Examples) {
    const auto truth = from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
    const auto same = report(truth, truth);
    EXPECT_EQ(same.tpr, 1.0);
    EXPECT_EQ(same.fdr, 0.0);
    EXPECT_EQ(same.fpr, 0.0);
    EXPECT_EQ(same.shd, 0u);
    EXPECT_EQ(same.tp_nnz, 1.0);
    EXPECT_FALSE(same.rp.has_value());

    const auto empty = report(AdjacencyMatrix(4), truth);
    EXPECT_EQ(empty.tpr, 0.0);
    EXPECT_EQ(empty.fpr, 0.0);
    EXPECT_EQ(empty.fdr, 0.0);
    EXPECT_EQ(empty.nnz, 0u);
}

TEST(Report, MatchesCountingOracle) {
    Rng rng(77);
    for (int t = 0; t < 200; ++t) {
        const std::size_t d = 2 + t % 9;
        const auto pred = random_digraph(d, uniform01(rng), rng);
        const auto truth = random_digraph(d, uniform01(rng), rng);
        const auto c = oracle::count(pred, truth);
        const std::vector<double> cohort{0.2 + uniform01(rng) * 0.8};
        const auto r = report(pred, truth, std::span<const double>(cohort));
        auto ratio = [](long a, long b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
        EXPECT_EQ(r.tpr, ratio(c.tp, c.tp + c.fn));
        EXPECT_EQ(r.fdr, ratio(c.fp, c.tp + c.fp));
        EXPECT_EQ(r.fpr, ratio(c.fp, c.fp + c.tn));
        EXPECT_EQ(r.tp_nnz, ratio(c.tp, c.nnz));
        EXPECT_EQ(static_cast<long>(r.nnz), c.nnz);
        EXPECT_EQ(static_cast<long>(r.shd), oracle::shd_edit_count(pred, truth));
        EXPECT_EQ(r.d, d);
        ASSERT_TRUE(r.rp.has_value());
        EXPECT_DOUBLE_EQ(*r.rp, (cohort[0] - r.tp_nnz) / cohort[0]);
        if (r.nnz > 0) {
            EXPECT_NEAR(r.tp_nnz, 1.0 - r.fdr, 1e-15);
        }
        for (double v : {r.tpr, r.fdr, r.fpr, r.tp_nnz}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        const auto cc = confusion(pred, truth);
        EXPECT_LE(cc.reversals, cc.fp);
    }
}

TEST(Align, ReordersByNameAndRejectsMismatch) {
    AdjacencyMatrix truth(3, {"a", "b", "c"});
    truth.set(0, 1, true);  // a -> b
    AdjacencyMatrix pred(3, {"c", "b", "a"});
    pred.set(2, 1, true);  // a -> b
    EXPECT_EQ(shd(pred, truth), 0u);
    AdjacencyMatrix other(3, {"a", "b", "z"});
    EXPECT_THROW(confusion(other, truth), AlignmentError);
    EXPECT_THROW(confusion(AdjacencyMatrix(2), truth), AlignmentError);
}

#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "lapklr/eval.hpp"
#include "lapklr/random.hpp"
#include "oracles.hpp"

using namespace lapklr;

TEST(AveragePrecision, PerfectRanking) {
    EXPECT_EQ(average_precision_11pt({{0.9, 0.8, 0.1, 0.0}, {1, 1, 0, 0}}), 1.0);
}

TEST(AveragePrecision, HandComputedThreeItems) {
    const double ap = average_precision_11pt({{3.0, 2.0, 1.0}, {1, 0, 1}});
    EXPECT_NEAR(ap, 28.0 / 33.0, 1e-15);
}

TEST(AveragePrecision, SingleRelevantSample) {
    EXPECT_EQ(average_precision_11pt({{-4.2}, {1}}), 1.0);
}

TEST(AveragePrecision, TiesKeepInputOrder) {
    // equal scores: the earlier sample ranks first
    EXPECT_NEAR(average_precision_11pt({{1.0, 1.0}, {0, 1}}), 0.5, 1e-15);
    EXPECT_EQ(average_precision_11pt({{1.0, 1.0}, {1, 0}}), 1.0);
}

TEST(AveragePrecision, Errors) {
    try {
        average_precision_11pt({{1.0, 0.5}, {0, 0}});
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_STREQ(e.what(), "AP undefined for class with no positives");
    }
    EXPECT_THROW(average_precision_11pt({{1.0}, {1, 0}}), DataError);
    EXPECT_THROW(average_precision_11pt({{1.0}, {2}}), DataError);
}

TEST(AveragePrecision, MatchesBruteForceOnRandomRankings) {
    Rng rng(1);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t m = 1 + rng.below(40);
        RankedPredictions p;
        for (std::size_t i = 0; i < m; ++i) {
            // coarse scores so ties are common
            p.scores.push_back(static_cast<double>(rng.below(6)));
            p.relevance.push_back(static_cast<int>(rng.below(2)));
        }
        p.relevance[rng.below(m)] = 1;
        EXPECT_NEAR(average_precision_11pt(p), oracle::average_precision(p.scores, p.relevance), 1e-12);
    }
}

TEST(AveragePrecision, InvariantUnderMonotoneTransforms) {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 2 + rng.below(30);
        RankedPredictions p;
        for (std::size_t i = 0; i < m; ++i) {
            p.scores.push_back(rng.normal());
            p.relevance.push_back(static_cast<int>(rng.below(2)));
        }
        p.relevance[0] = 1;
        RankedPredictions q = p;
        for (double& s : q.scores) s = std::exp(3.0 * s) + 7.0;
        EXPECT_EQ(average_precision_11pt(p), average_precision_11pt(q));
    }
}

TEST(AveragePrecision, PositiveWheneverAnyRelevant) {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 1 + rng.below(50);
        RankedPredictions p;
        for (std::size_t i = 0; i < m; ++i) {
            p.scores.push_back(rng.normal());
            p.relevance.push_back(0);
        }
        p.relevance[rng.below(m)] = 1;
        const double ap = average_precision_11pt(p);
        EXPECT_GT(ap, 0.0);
        EXPECT_LE(ap, 1.0);
        EXPECT_GE(ap, 1.0 / (11.0 * static_cast<double>(m)));
    }
}

TEST(MeanAp, Examples) {
    const std::vector<double> one = {1.0}, two = {1.0, 0.0};
    EXPECT_EQ(mean_ap(one), 1.0);
    EXPECT_EQ(mean_ap(two), 0.5);
    EXPECT_THROW(mean_ap(std::vector<double>{}), DataError);
}

TEST(MeanAp, MatchesIndependentSum) {
    Rng rng(4);
    std::vector<double> aps;
    for (int i = 0; i < 38; ++i) aps.push_back(rng.uniform());
    const long double expected = std::accumulate(aps.begin(), aps.end(), 0.0L) / 38.0L;
    EXPECT_NEAR(mean_ap(aps), static_cast<double>(expected), 1e-15);
}

TEST(Evaluate, SkipsClassesWithoutPositives) {
    const auto r = evaluate({{"a", {{2, 1, 0}, {1, 0, 0}}}, {"none", {{2, 1, 0}, {0, 0, 0}}}, {"b", {{2, 1, 0}, {0, 0, 1}}}});
    ASSERT_EQ(r.per_class_ap.size(), 2u);
    ASSERT_EQ(r.skipped_classes.size(), 1u);
    EXPECT_EQ(r.skipped_classes[0].first, "none");
    EXPECT_DOUBLE_EQ(r.map_value, (r.per_class_ap[0].second + r.per_class_ap[1].second) / 2.0);
}

TEST(Evaluate, ReportFormats) {
    const auto r = evaluate({{"a", {{1, 0}, {1, 0}}}, {"b", {{1, 0}, {0, 1}}}});
    std::ostringstream kv;
    write_report_kv(kv, r);
    EXPECT_EQ(kv.str(), "a 1\nb 0.5\nmAP 0.75\n");
    std::ostringstream table;
    write_report_table(table, r);
    EXPECT_EQ(table.str(), "class  AP\na      1\nb      0.5\nmAP    0.75\n");
}

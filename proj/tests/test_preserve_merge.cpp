// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include <cmath>

#include "support.hpp"
#include "uhrbat/oracle.hpp"
#include "uhrbat/preserve_merge.hpp"

using namespace uhrbat;

namespace {

// Two regions over five tokens: region 0 holds scores {0.9, 0.1}, region 1
// holds {0.5, 0.4, 0.3}. Region means are 0.5 and 0.4.
struct WorkedExample {
    FeatureMatrix features = FeatureMatrix::zeros(5, 2);
    ScoreVector scores = {0.9, 0.1, 0.5, 0.4, 0.3};
    RegionPartition partition{5, 2, {0, 0, 1, 1, 1}};

    WorkedExample() {
        for (std::size_t i = 0; i < 5; ++i) {
            features.at(i, 0) = static_cast<double>(i);
            features.at(i, 1) = 10.0 + static_cast<double>(i);
        }
    }
};

}  // namespace

TEST_SUITE_BEGIN("preserve_merge");

TEST_CASE("region means") {
    const RegionPartition p{3, 2, {0, 0, 1}};
    CHECK(region_mean_importance({1, 3, 5}, p) == std::vector<double>{2, 5});

    const RegionPartition uniform{4, 3, {0, 1, 2, 1}};
    CHECK(region_mean_importance({7, 7, 7, 7}, uniform) == std::vector<double>{7, 7, 7});

    CHECK_THROWS_AS(region_mean_importance({1, 2}, p), DimensionError);
}

TEST_CASE("region means match an independent group-by") {
    testing::Rng rng(301);
    const std::size_t n = 100;
    const ScoreVector scores = testing::random_scores(n, rng);
    const RegionPartition p = testing::random_partition(n, 7, rng);
    const std::vector<double> means = region_mean_importance(scores, p);
    for (std::size_t m = 0; m < p.n_regions; ++m) {
        double sum = 0;
        std::size_t count = 0;
        for (std::size_t i = n; i-- > 0;) {  // reverse accumulation
            if (static_cast<std::size_t>(p.labels[i]) == m) {
                sum += scores[i];
                ++count;
            }
        }
        REQUIRE(count > 0);
        CHECK(means[m] == doctest::Approx(sum / static_cast<double>(count)).epsilon(1e-12));
    }
}

TEST_CASE("keep sets take scores at or above the region mean") {
    const RegionPartition p{3, 1, {0, 0, 0}};
    const auto stats = split_keep_merge({1, 2, 3}, p);
    REQUIRE(stats.size() == 1);
    CHECK(stats[0].mean_score == 2.0);
    CHECK(stats[0].keep == std::vector<std::size_t>{2, 1});  // descending score
    CHECK(stats[0].merge == std::vector<std::size_t>{0});
    CHECK(!stats[0].merged_feature.has_value());
}

TEST_CASE("all-equal scores keep every token") {
    const RegionPartition p{3, 1, {0, 0, 0}};
    const auto stats = split_keep_merge({5, 5, 5}, p);
    CHECK(stats[0].keep == std::vector<std::size_t>{0, 1, 2});  // ties by index
    CHECK(stats[0].merge.empty());
}

TEST_CASE("singleton regions keep their only token") {
    const RegionPartition p{1, 1, {0}};
    const auto stats = split_keep_merge({7}, p);
    CHECK(stats[0].keep == std::vector<std::size_t>{0});
    CHECK(stats[0].merge.empty());
}

TEST_CASE("keep sets are never empty") {
    testing::Rng rng(307);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = rng.integer(1, 128);
        const ScoreVector scores = testing::random_scores(n, rng);
        const RegionPartition p = testing::random_partition(n, 16, rng);
        for (const RegionStats& rs : split_keep_merge(scores, p)) {
            CHECK(!rs.keep.empty());
            CHECK(rs.keep.size() + rs.merge.size() >= 1);
        }
    }
    // adversarial: identical scores whose mean can round up
    const double v = 0.1 + 0.2;  // not exactly representable as 0.3
    const RegionPartition p{3, 1, {0, 0, 0}};
    for (const RegionStats& rs : split_keep_merge({v, v, v}, p)) {
        CHECK(!rs.keep.empty());
    }
}

TEST_CASE("merging averages the cited rows") {
    FeatureMatrix f = FeatureMatrix::zeros(2, 2);
    f.data = {1, 2, 3, 4};
    const std::size_t both[2] = {0, 1};
    CHECK(merge_tokens(f, both) == std::vector<double>{2, 3});

    FeatureMatrix single = FeatureMatrix::zeros(1, 2);
    single.data = {9, 9};
    const std::size_t one[1] = {0};
    CHECK(merge_tokens(single, one) == std::vector<double>{9, 9});

    CHECK_THROWS_AS(merge_tokens(f, {}), DataError);
}

TEST_CASE("merged tokens preserve the first moment") {
    testing::Rng rng(311);
    const FeatureMatrix f = testing::random_features(50, 6, rng);
    std::vector<std::size_t> idx(50);
    for (std::size_t i = 0; i < 50; ++i) {
        idx[i] = i;
    }
    const std::vector<double> merged = merge_tokens(f, idx);
    for (std::size_t c = 0; c < 6; ++c) {
        double sum = 0;
        for (std::size_t i = 50; i-- > 0;) {
            sum += f.at(i, c);
        }
        const double reconstructed = 50.0 * merged[c];
        CHECK(std::abs(sum - reconstructed) <= 1e-9 * std::max(1.0, std::abs(sum)));
    }
}

TEST_CASE("serialization follows the worked example") {
    const WorkedExample ex;
    const CompressedSequence seq =
        serialize_candidates(ex.features, ex.scores, ex.partition);
    REQUIRE(seq.tokens.size() == 5);
    CHECK(seq.tokens[0].kind == TokenKind::Kept);
    CHECK(seq.tokens[0].source_indices == std::vector<std::size_t>{0});  // score 0.9
    CHECK(seq.tokens[1].kind == TokenKind::Merged);
    CHECK(seq.tokens[1].source_indices == std::vector<std::size_t>{1});  // region 0 remainder
    CHECK(seq.tokens[2].kind == TokenKind::Kept);
    CHECK(seq.tokens[2].source_indices == std::vector<std::size_t>{2});  // score 0.5
    CHECK(seq.tokens[3].kind == TokenKind::Kept);
    CHECK(seq.tokens[3].source_indices == std::vector<std::size_t>{3});  // score 0.4
    CHECK(seq.tokens[4].kind == TokenKind::Merged);
    CHECK(seq.tokens[4].source_indices == std::vector<std::size_t>{4});  // region 1 remainder
    CHECK(seq.tokens[1].feature == std::vector<double>{1, 11});
    CHECK(seq.tokens[1].score == 0.5);  // region mean
    CHECK(seq.tokens[4].feature == std::vector<double>{4, 14});
}

TEST_CASE("one region of equal scores serializes in index order") {
    FeatureMatrix f = FeatureMatrix::zeros(4, 1);
    f.data = {5, 6, 7, 8};
    const RegionPartition p{4, 1, {0, 0, 0, 0}};
    const CompressedSequence seq = serialize_candidates(f, {2, 2, 2, 2}, p);
    REQUIRE(seq.tokens.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(seq.tokens[i].kind == TokenKind::Kept);
        CHECK(seq.tokens[i].source_indices == std::vector<std::size_t>{i});
    }
}

TEST_CASE("singleton regions reduce to a global descending sort") {
    testing::Rng rng(313);
    const std::size_t n = 24;
    const FeatureMatrix f = testing::random_features(n, 2, rng);
    const ScoreVector scores = testing::random_scores(n, rng);
    RegionPartition p;
    p.n_tokens = n;
    p.n_regions = n;
    p.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        p.labels[i] = static_cast<std::int32_t>(i);
    }
    const CompressedSequence seq = serialize_candidates(f, scores, p);
    REQUIRE(seq.tokens.size() == n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        CHECK(seq.tokens[i].score >= seq.tokens[i + 1].score);
        CHECK(seq.tokens[i].kind == TokenKind::Kept);
    }
}

TEST_CASE("budget truncation is a plain prefix") {
    const WorkedExample ex;
    const CompressedSequence cand = serialize_candidates(ex.features, ex.scores, ex.partition);
    const CompressedSequence cut = enforce_budget(cand, 3);
    REQUIRE(cut.tokens.size() == 3);
    CHECK(cut.budget_used == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(!testing::structural_difference(
                   CompressedSequence{{cand.tokens[i]}, 1},
                   CompressedSequence{{cut.tokens[i]}, 1})
                   .has_value());
    }
    const CompressedSequence all = enforce_budget(cand, 10);
    CHECK(all.tokens.size() == 5);
    CHECK_THROWS_AS(enforce_budget(cand, 0), ConfigError);
}

TEST_CASE("compress_scale equals truncated serialization") {
    const WorkedExample ex;
    const CompressedSequence direct =
        compress_scale(ex.features, ex.scores, ex.partition, 3);
    REQUIRE(direct.tokens.size() == 3);
    CHECK(direct.tokens[0].source_indices == std::vector<std::size_t>{0});
    CHECK(direct.tokens[1].kind == TokenKind::Merged);
    CHECK(direct.tokens[2].source_indices == std::vector<std::size_t>{2});

    testing::Rng rng(317);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = rng.integer(1, 64);
        const FeatureMatrix f = testing::random_features(n, rng.integer(1, 5), rng);
        const ScoreVector scores = testing::random_scores(n, rng);
        const RegionPartition p = testing::random_partition(n, 8, rng);
        const std::size_t budget = rng.integer(p.n_regions, n + p.n_regions);
        const CompressedSequence fast = compress_scale(f, scores, p, budget);
        const CompressedSequence slow =
            enforce_budget(serialize_candidates(f, scores, p), budget);
        const auto diff = testing::structural_difference(fast, slow);
        if (diff) {
            FAIL(*diff);
        }
    }
}

TEST_CASE("compress_scale at full budget matches the uncapped candidates") {
    const WorkedExample ex;
    const CompressedSequence cand = serialize_candidates(ex.features, ex.scores, ex.partition);
    const CompressedSequence full =
        compress_scale(ex.features, ex.scores, ex.partition, 100, CompressOptions{false});
    CHECK(!testing::structural_difference(cand, full).has_value());
}

TEST_CASE("degenerate all-equal single region passes tokens through") {
    FeatureMatrix f = FeatureMatrix::zeros(3, 2);
    f.data = {1, 2, 3, 4, 5, 6};
    const RegionPartition p{3, 1, {0, 0, 0}};
    const CompressedSequence seq = compress_scale(f, {4, 4, 4}, p, 3);
    REQUIRE(seq.tokens.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(seq.tokens[i].feature == std::vector<double>(f.row(i).begin(), f.row(i).end()));
        CHECK(seq.tokens[i].kind == TokenKind::Kept);
    }
}

TEST_CASE("strict budgets reject caps below the region count") {
    const WorkedExample ex;
    CHECK_THROWS_AS(compress_scale(ex.features, ex.scores, ex.partition, 1), BudgetError);
    const CompressedSequence truncated =
        compress_scale(ex.features, ex.scores, ex.partition, 1, CompressOptions{false});
    CHECK(truncated.tokens.size() == 1);
    CHECK(truncated.tokens[0].source_indices == std::vector<std::size_t>{0});
}

TEST_CASE("compression agrees with the oracle on random instances") {
    testing::Rng rng(331);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = rng.integer(1, 96);
        const FeatureMatrix f = testing::random_features(n, rng.integer(1, 6), rng);
        const ScoreVector scores = testing::random_scores(n, rng);
        const RegionPartition p = testing::random_partition(n, 12, rng);
        const std::size_t budget = rng.integer(1, n + p.n_regions);
        const CompressedSequence mine =
            compress_scale(f, scores, p, budget, CompressOptions{false});
        const CompressedSequence ref = oracle::oracle_compress(f, scores, p, budget);
        const auto diff = testing::structural_difference(mine, ref);
        if (diff) {
            const auto dir = testing::dump_instance(f, scores, p, budget, "unit");
            FAIL(*diff, " (instance dumped to ", dir.string(), ")");
        }
    }
}

TEST_CASE("budget safety and candidate accounting") {
    testing::Rng rng(337);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = rng.integer(1, 80);
        const FeatureMatrix f = testing::random_features(n, 2, rng);
        const ScoreVector scores = testing::random_scores(n, rng);
        const RegionPartition p = testing::random_partition(n, 10, rng);
        const CompressedSequence cand = serialize_candidates(f, scores, p);

        // |E_cand| = sum over regions of |K_m| + [merge non-empty]
        const auto stats = split_keep_merge(scores, p);
        std::size_t expected = 0;
        for (const RegionStats& rs : stats) {
            expected += rs.keep.size() + (rs.merge.empty() ? 0 : 1);
        }
        CHECK(cand.tokens.size() == expected);

        const std::size_t budget = rng.integer(1, n + 4);
        const CompressedSequence out =
            compress_scale(f, scores, p, budget, CompressOptions{false});
        CHECK(out.tokens.size() <= budget);
        CHECK(out.tokens.size() == std::min(budget, cand.tokens.size()));
        CHECK(out.budget_used == out.tokens.size());
    }
}

TEST_CASE("output order is sound on random instances") {
    testing::Rng rng(347);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = rng.integer(1, 80);
        const FeatureMatrix f = testing::random_features(n, 2, rng);
        const ScoreVector scores = testing::random_scores(n, rng);
        const RegionPartition p = testing::random_partition(n, 10, rng);
        const std::size_t budget = rng.integer(1, n + 4);
        const CompressedSequence out =
            compress_scale(f, scores, p, budget, CompressOptions{false});
        const auto violation =
            testing::order_violation(out, region_mean_importance(scores, p));
        if (violation) {
            FAIL(*violation);
        }
    }
}

TEST_CASE("increasing affine score maps leave the output structure unchanged") {
    testing::Rng rng(349);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = rng.integer(1, 64);
        const FeatureMatrix f = testing::random_features(n, 3, rng);
        const ScoreVector scores = testing::random_integer_scores(n, rng);
        const RegionPartition p = testing::random_partition(n, 8, rng);
        const std::size_t budget = rng.integer(1, n + 4);
        const CompressedSequence base =
            compress_scale(f, scores, p, budget, CompressOptions{false});

        for (const auto& [alpha, beta] : {std::pair{2.0, 3.0}, std::pair{3.0, 1.0}}) {
            ScoreVector mapped(n);
            for (std::size_t i = 0; i < n; ++i) {
                mapped[i] = alpha * scores[i] + beta;
            }
            const CompressedSequence got =
                compress_scale(f, mapped, p, budget, CompressOptions{false});
            REQUIRE(got.tokens.size() == base.tokens.size());
            for (std::size_t i = 0; i < got.tokens.size(); ++i) {
                CHECK(got.tokens[i].kind == base.tokens[i].kind);
                CHECK(got.tokens[i].region == base.tokens[i].region);
                CHECK(got.tokens[i].source_indices == base.tokens[i].source_indices);
            }
        }
    }
}

TEST_SUITE_END();

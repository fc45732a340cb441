// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "uhrbat/types.hpp"

namespace uhrbat {

/// Per-region keep/merge split. `keep` is never empty: a region's maximum
/// score is always >= the region mean.
struct RegionStats {
    std::int32_t region = 0;
    double mean_score = 0.0;
    std::vector<std::size_t> keep;    // score descending, ties by ascending index
    std::vector<std::size_t> merge;   // ascending index
    std::optional<std::vector<double>> merged_feature;
};

/// Mean importance per region, indexed by region id.
std::vector<double> region_mean_importance(const ScoreVector& scores,
                                           const RegionPartition& partition);

/// Splits every region into {i : a_i >= mu_m} and the remainder. Merged
/// features are not filled in here.
std::vector<RegionStats> split_keep_merge(const ScoreVector& scores,
                                          const RegionPartition& partition);

/// Mean of the cited feature rows, accumulated in the order given.
std::vector<double> merge_tokens(const FeatureMatrix& features,
                                 std::span<const std::size_t> merge_indices);

/// Uncapped candidate sequence: regions by descending mean importance (ties
/// by ascending region id), kept tokens by descending score inside each
/// region, one merged representative appended to each group that has a
/// non-empty merge set.
CompressedSequence serialize_candidates(const FeatureMatrix& features, const ScoreVector& scores,
                                        const RegionPartition& partition);

/// First min(budget, |candidates|) records in candidate order.
CompressedSequence enforce_budget(const CompressedSequence& candidates, std::size_t budget);

struct CompressOptions {
    /// Reject budgets below the region count (the minimum-capacity rule).
    /// When false, the sequence is truncated unconditionally.
    bool strict_budget = true;
};

/// Full per-scale compression: split, merge, serialize, truncate. Equal to
/// enforce_budget(serialize_candidates(...), budget) but only materializes
/// records that survive the budget.
CompressedSequence compress_scale(const FeatureMatrix& features, const ScoreVector& scores,
                                  const RegionPartition& partition, std::size_t budget,
                                  const CompressOptions& opts = {});

}  // namespace uhrbat

// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "uhrbat/partition.hpp"
#include "uhrbat/preserve_merge.hpp"
#include "uhrbat/types.hpp"

namespace uhrbat {

/// One configured scale. Scale 1 is the anchor (lowest resolution); grids
/// grow strictly with the scale id.
struct ScaleSpec {
    int scale_id = 1;
    std::size_t resolution = 0;  // pixels per side
    TokenGrid grid;
    std::size_t budget = 0;
};

/// Square grid for a resolution and patch size (resolution must divide).
TokenGrid grid_for_resolution(std::size_t resolution, std::size_t patch_size, int scale_id = 1);

/// Learned tables consumed as data: a base positional embedding defined on
/// the pretraining grid, and one additive embedding row per scale.
struct EmbeddingTables {
    TokenGrid base_grid;
    FeatureMatrix base_pe;            // base_grid.size() x d
    FeatureMatrix scale_embeddings;   // n_scales x d, row s-1 for scale s

    static EmbeddingTables zeros(std::size_t base_rows, std::size_t base_cols, std::size_t dim,
                                 std::size_t n_scales);
    void validate() const;
};

/// Channel-wise bilinear resample of the base positional embedding onto the
/// target grid, with the same half-pixel resize mapping used for scores.
FeatureMatrix interpolate_position_embedding(const EmbeddingTables& tables,
                                             const TokenGrid& target_grid, int threads = 1);

/// h_i = e_i + p_i + q^(s), with p interpolated from the base table and q the
/// scale row for grid.scale_id.
FeatureMatrix embed_tokens(const FeatureMatrix& features, const EmbeddingTables& tables,
                           const TokenGrid& grid, int threads = 1);

enum class BudgetPolicy { Preset, Proportional };

/// Per-scale budgets under the global cap. Preset returns each scale's
/// configured budget verbatim; proportional splits the cap in proportion to
/// token counts, floored at the region counts, remainder to the largest
/// scale. Throws BudgetError when the floors alone exceed the cap.
std::vector<std::size_t> allocate_budgets(std::size_t global_budget,
                                          const std::vector<ScaleSpec>& scales,
                                          const std::vector<std::size_t>& region_counts,
                                          BudgetPolicy policy);

/// Per-scale input: features on their grid, plus pixel labels when the
/// partition method needs them.
struct ScaleView {
    TokenGrid grid;
    FeatureMatrix features;
    std::optional<PixelLabelMap> labels;
};

struct ScaleOutput {
    int scale_id = 1;
    CompressedSequence sequence;
    RegionPartition partition;
    ScoreVector aligned_scores;
};

/// Region partitions for each view per the config (k-means on the raw scale
/// features, or majority vote over the supplied pixel labels).
std::vector<RegionPartition> partition_scales(const std::vector<ScaleView>& views,
                                              const PartitionConfig& cfg, int threads = 1);

/// Full multi-view pipeline: embed each scale, align anchor importance onto
/// it, compress against its budget. Views must be ordered anchor-first with
/// strictly growing grids; outputs come back in the same order. Errors are
/// annotated with the offending scale id.
std::vector<ScaleOutput> compress_multiscale(const std::vector<ScaleView>& views,
                                             const AttentionMap& anchor_attention,
                                             const EmbeddingTables& tables,
                                             const std::vector<RegionPartition>& partitions,
                                             const std::vector<std::size_t>& budgets,
                                             const CompressOptions& opts = {}, int threads = 1);

/// Convenience overload that computes the partitions from the config first.
std::vector<ScaleOutput> compress_multiscale(const std::vector<ScaleView>& views,
                                             const AttentionMap& anchor_attention,
                                             const EmbeddingTables& tables,
                                             const PartitionConfig& partition_cfg,
                                             const std::vector<std::size_t>& budgets,
                                             const CompressOptions& opts = {}, int threads = 1);

}  // namespace uhrbat

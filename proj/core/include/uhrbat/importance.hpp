// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <span>

#include "uhrbat/types.hpp"

namespace uhrbat {

/// Deterministic mapping from target-grid cells onto continuous source-grid
/// coordinates (half-pixel centers, so same-size mapping is the identity).
struct ResizeMapping {
    std::size_t src_rows = 0;
    std::size_t src_cols = 0;
    std::size_t dst_rows = 0;
    std::size_t dst_cols = 0;

    void validate() const;
};

struct CellIndex {
    std::size_t u = 0;
    std::size_t v = 0;
};

/// Mean text-to-vision attention per visual token: a_i = (1/M) sum_j A[j,i].
ScoreVector aggregate_text_attention(const AttentionMap& attn);

/// Bilinear sample of a grid map at continuous (x, y); x runs along columns,
/// y along rows. Neighbor indices are clamped to the grid, so the result is
/// always a convex combination of in-range values, and integer in-range
/// coordinates return the stored value exactly.
double bilinear_sample(const GridScores& grid, double x, double y);

/// Source-grid coordinate of target cell (u, v):
///   x = (v + 0.5) * src_cols / dst_cols - 0.5
///   y = (u + 0.5) * src_rows / dst_rows - 0.5
std::array<double, 2> resize_map(const ResizeMapping& mapping, std::size_t u, std::size_t v);

/// Aligned score of a token covering `cells` on the target grid: the mean of
/// bilinear samples at the mapped cell centers. Patch tokens cover one cell.
double aligned_cell_average(const GridScores& anchor, const ResizeMapping& mapping,
                            std::span<const CellIndex> cells);

/// Transfers anchor-scale scores onto the target grid (one cell per token).
/// When target equals the anchor grid the output equals the input exactly.
ScoreVector align_importance(const ScoreVector& anchor_scores, const TokenGrid& anchor_grid,
                             const TokenGrid& target_grid, int threads = 1);

}  // namespace uhrbat

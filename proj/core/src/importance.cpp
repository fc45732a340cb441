// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#include "uhrbat/importance.hpp"

#include <cmath>

#include "uhrbat/parallel.hpp"

namespace uhrbat {

void ResizeMapping::validate() const {
    if (src_rows == 0 || src_cols == 0 || dst_rows == 0 || dst_cols == 0) {
        throw DimensionError("ResizeMapping: all grid extents must be >= 1");
    }
}

ScoreVector aggregate_text_attention(const AttentionMap& attn) {
    if (attn.n_text == 0) {
        throw DataError("aggregate_text_attention: empty query (no text rows)");
    }
    if (attn.n_vision == 0) {
        throw DimensionError("aggregate_text_attention: no vision columns");
    }
    attn.validate();
    ScoreVector scores(attn.n_vision, 0.0);
    const double* row = attn.weights.data();
    for (std::size_t j = 0; j < attn.n_text; ++j, row += attn.n_vision) {
        for (std::size_t i = 0; i < attn.n_vision; ++i) {
            scores[i] += row[i];
        }
    }
    const double m = static_cast<double>(attn.n_text);
    for (double& s : scores) {
        s /= m;
    }
    return scores;
}

namespace {

// Clamp a floating neighbor index into [0, n) without ever casting an
// out-of-range double to an integer type.
std::size_t clamp_neighbor(double v, std::size_t n) {
    if (!(v > 0.0)) {
        return 0;
    }
    if (v >= static_cast<double>(n - 1)) {
        return n - 1;
    }
    return static_cast<std::size_t>(v);
}

}  // namespace

double bilinear_sample(const GridScores& grid, double x, double y) {
    if (grid.rows == 0 || grid.cols == 0) {
        throw DimensionError("bilinear_sample: grid must be at least 1x1");
    }
    if (!std::isfinite(x) || !std::isfinite(y)) {
        throw DataError("bilinear_sample: non-finite coordinates");
    }
    const double x0f = std::floor(x);
    const double y0f = std::floor(y);
    // x runs along columns, y along rows
    const std::size_t cx0 = clamp_neighbor(x0f, grid.cols);
    const std::size_t cx1 = clamp_neighbor(x0f + 1.0, grid.cols);
    const std::size_t cy0 = clamp_neighbor(y0f, grid.rows);
    const std::size_t cy1 = clamp_neighbor(y0f + 1.0, grid.rows);
    const double wx1 = x - x0f;  // weight of the x1 side
    const double wx0 = 1.0 - wx1;
    const double wy1 = y - y0f;
    const double wy0 = 1.0 - wy1;
    const double q00 = grid.at(cy0, cx0);
    const double q10 = grid.at(cy0, cx1);
    const double q01 = grid.at(cy1, cx0);
    const double q11 = grid.at(cy1, cx1);
    return q00 * wx0 * wy0 + q10 * wx1 * wy0 + q01 * wx0 * wy1 + q11 * wx1 * wy1;
}

std::array<double, 2> resize_map(const ResizeMapping& mapping, std::size_t u, std::size_t v) {
    mapping.validate();
    if (u >= mapping.dst_rows || v >= mapping.dst_cols) {
        throw BoundsError("resize_map: cell (" + std::to_string(u) + ", " + std::to_string(v) +
                          ") outside " + std::to_string(mapping.dst_rows) + "x" +
                          std::to_string(mapping.dst_cols));
    }
    const double x = (static_cast<double>(v) + 0.5) * static_cast<double>(mapping.src_cols) /
                         static_cast<double>(mapping.dst_cols) -
                     0.5;
    const double y = (static_cast<double>(u) + 0.5) * static_cast<double>(mapping.src_rows) /
                         static_cast<double>(mapping.dst_rows) -
                     0.5;
    return {x, y};
}

double aligned_cell_average(const GridScores& anchor, const ResizeMapping& mapping,
                            std::span<const CellIndex> cells) {
    if (cells.empty()) {
        throw DataError("aligned_cell_average: token covers no cells");
    }
    double sum = 0.0;
    for (const CellIndex& cell : cells) {
        const auto [x, y] = resize_map(mapping, cell.u, cell.v);
        sum += bilinear_sample(anchor, x, y);
    }
    return sum / static_cast<double>(cells.size());
}

ScoreVector align_importance(const ScoreVector& anchor_scores, const TokenGrid& anchor_grid,
                             const TokenGrid& target_grid, int threads) {
    const GridScores anchor = reshape_scores_to_grid(anchor_scores, anchor_grid);
    const ResizeMapping mapping{anchor_grid.rows, anchor_grid.cols, target_grid.rows,
                                target_grid.cols};
    mapping.validate();
    ScoreVector out(target_grid.size());
    parallel_for(out.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const CellIndex cell{i / target_grid.cols, i % target_grid.cols};
            out[i] = aligned_cell_average(anchor, mapping, {&cell, 1});
        }
    });
    return out;
}

}  // namespace uhrbat

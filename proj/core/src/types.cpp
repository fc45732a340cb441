// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#include "uhrbat/types.hpp"

#include <cmath>

namespace uhrbat {

std::vector<std::array<double, 2>> token_coordinates(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) {
        throw DimensionError("token_coordinates: grid must be at least 1x1");
    }
    std::vector<std::array<double, 2>> coords;
    coords.reserve(rows * cols);
    for (std::size_t u = 0; u < rows; ++u) {
        for (std::size_t v = 0; v < cols; ++v) {
            const double x = (static_cast<double>(v) + 0.5) / static_cast<double>(cols);
            const double y = (static_cast<double>(u) + 0.5) / static_cast<double>(rows);
            coords.push_back({x, y});
        }
    }
    return coords;
}

TokenGrid TokenGrid::regular(std::size_t rows, std::size_t cols, int scale_id) {
    if (scale_id < 1) {
        throw ConfigError("TokenGrid: scale_id must be >= 1");
    }
    TokenGrid grid;
    grid.rows = rows;
    grid.cols = cols;
    grid.scale_id = scale_id;
    grid.coords = token_coordinates(rows, cols);
    return grid;
}

FeatureMatrix FeatureMatrix::zeros(std::size_t n_tokens, std::size_t dim) {
    FeatureMatrix m;
    m.n_tokens = n_tokens;
    m.dim = dim;
    m.data.assign(n_tokens * dim, 0.0);
    return m;
}

void FeatureMatrix::validate() const {
    if (data.size() != n_tokens * dim) {
        throw DimensionError("FeatureMatrix: data size does not match n_tokens x dim");
    }
    for (double v : data) {
        if (!std::isfinite(v)) {
            throw DataError("FeatureMatrix: non-finite entry");
        }
    }
}

void AttentionMap::validate() const {
    if (weights.size() != n_text * n_vision) {
        throw DimensionError("AttentionMap: weights size does not match n_text x n_vision");
    }
    for (double w : weights) {
        if (!std::isfinite(w)) {
            throw DataError("AttentionMap: non-finite weight");
        }
        if (w < 0.0) {
            throw DataError("AttentionMap: negative weight");
        }
    }
}

GridScores reshape_scores_to_grid(const ScoreVector& scores, const TokenGrid& grid) {
    if (scores.size() != grid.size()) {
        throw DimensionError("reshape_scores_to_grid: scores length " +
                             std::to_string(scores.size()) + " does not match grid " +
                             std::to_string(grid.rows) + "x" + std::to_string(grid.cols));
    }
    return GridScores{grid.rows, grid.cols, scores};
}

void BudgetSpec::validate() const {
    std::size_t total = 0;
    for (std::size_t b : per_scale) {
        if (b == 0) {
            throw ConfigError("BudgetSpec: every per-scale budget must be >= 1");
        }
        total += b;
    }
    if (total > global_budget) {
        throw BudgetError("BudgetSpec: per-scale budgets sum to " + std::to_string(total) +
                          ", above the global cap " + std::to_string(global_budget));
    }
}

}  // namespace uhrbat

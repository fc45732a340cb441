// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#include "uhrbat/oracle.hpp"

#include <cmath>
#include <limits>

namespace uhrbat::oracle {

ScoreVector oracle_column_mean(const AttentionMap& attn) {
    if (attn.n_text == 0) {
        throw DataError("oracle_column_mean: empty query");
    }
    attn.validate();
    ScoreVector out(attn.n_vision, 0.0);
    for (std::size_t i = 0; i < attn.n_vision; ++i) {
        double sum = 0.0;
        for (std::size_t j = attn.n_text; j-- > 0;) {  // reverse row order on purpose
            sum += attn.at(j, i);
        }
        out[i] = sum / static_cast<double>(attn.n_text);
    }
    return out;
}

namespace {

double grid_lookup(const GridScores& grid, double xi, double yi) {
    // clamp each integer neighbor into the grid before the lookup
    long col = xi < 0.0 ? 0 : static_cast<long>(xi);
    long row = yi < 0.0 ? 0 : static_cast<long>(yi);
    if (col > static_cast<long>(grid.cols) - 1) {
        col = static_cast<long>(grid.cols) - 1;
    }
    if (row > static_cast<long>(grid.rows) - 1) {
        row = static_cast<long>(grid.rows) - 1;
    }
    return grid.at(static_cast<std::size_t>(row), static_cast<std::size_t>(col));
}

}  // namespace

double oracle_bilinear(const GridScores& grid, double x, double y) {
    if (grid.rows == 0 || grid.cols == 0) {
        throw DimensionError("oracle_bilinear: empty grid");
    }
    if (!std::isfinite(x) || !std::isfinite(y)) {
        throw DataError("oracle_bilinear: non-finite coordinates");
    }
    const double x0 = std::floor(x);
    const double x1 = x0 + 1.0;
    const double y0 = std::floor(y);
    const double y1 = y0 + 1.0;
    const double q00 = grid_lookup(grid, x0, y0);
    const double q10 = grid_lookup(grid, x1, y0);
    const double q01 = grid_lookup(grid, x0, y1);
    const double q11 = grid_lookup(grid, x1, y1);
    return q00 * (x1 - x) * (y1 - y) + q10 * (x - x0) * (y1 - y) + q01 * (x1 - x) * (y - y0) +
           q11 * (x - x0) * (y - y0);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        const double diff = a[c] - b[c];
        acc += diff * diff;
    }
    return acc;
}

std::vector<std::int32_t> oracle_nearest_center(const FeatureMatrix& embeddings,
                                                const FeatureMatrix& centers) {
    std::vector<std::int32_t> labels(embeddings.n_tokens, 0);
    for (std::size_t i = 0; i < embeddings.n_tokens; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < centers.n_tokens; ++r) {
            const double dist = squared_distance(embeddings.row(i), centers.row(r));
            if (dist < best) {
                best = dist;
                labels[i] = static_cast<std::int32_t>(r);
            }
        }
    }
    return labels;
}

namespace {

struct OracleRegion {
    std::vector<std::size_t> members;  // ascending token index
    double mean = 0.0;
    std::vector<std::size_t> keep;
    std::vector<std::size_t> merge;
    std::vector<double> merged;
};

// selection sort, descending score, smallest token index wins ties
void sort_by_score_desc(std::vector<std::size_t>& ids, const ScoreVector& scores) {
    for (std::size_t a = 0; a + 1 < ids.size(); ++a) {
        std::size_t best = a;
        for (std::size_t b = a + 1; b < ids.size(); ++b) {
            if (scores[ids[b]] > scores[ids[best]] ||
                (scores[ids[b]] == scores[ids[best]] && ids[b] < ids[best])) {
                best = b;
            }
        }
        std::swap(ids[a], ids[best]);
    }
}

}  // namespace

CompressedSequence oracle_compress(const FeatureMatrix& features, const ScoreVector& scores,
                                   const RegionPartition& partition, std::size_t budget) {
    if (budget == 0) {
        throw ConfigError("oracle_compress: budget must be >= 1");
    }
    const std::size_t r_count = partition.n_regions;
    std::vector<OracleRegion> regions(r_count);
    for (std::size_t i = 0; i < partition.n_tokens; ++i) {
        regions[static_cast<std::size_t>(partition.labels[i])].members.push_back(i);
    }

    for (auto& region : regions) {
        double sum = 0.0;
        for (std::size_t i : region.members) {
            sum += scores[i];
        }
        region.mean = sum / static_cast<double>(region.members.size());
        for (std::size_t i : region.members) {
            if (scores[i] >= region.mean) {
                region.keep.push_back(i);
            } else {
                region.merge.push_back(i);
            }
        }
        if (region.keep.empty()) {
            // same rounding guard as the production path: promote the best
            // merge member so the keep set is never empty
            std::size_t arg = region.merge.front();
            std::size_t arg_pos = 0;
            for (std::size_t p = 0; p < region.merge.size(); ++p) {
                if (scores[region.merge[p]] > scores[arg]) {
                    arg = region.merge[p];
                    arg_pos = p;
                }
            }
            region.merge.erase(region.merge.begin() + static_cast<std::ptrdiff_t>(arg_pos));
            region.keep.push_back(arg);
        }
        sort_by_score_desc(region.keep, scores);
        if (!region.merge.empty()) {
            region.merged.assign(features.dim, 0.0);
            for (std::size_t i : region.merge) {
                for (std::size_t c = 0; c < features.dim; ++c) {
                    region.merged[c] += features.at(i, c);
                }
            }
            for (double& v : region.merged) {
                v /= static_cast<double>(region.merge.size());
            }
        }
    }

    // region priority: descending mean, smallest region id wins ties
    std::vector<std::size_t> pi(r_count);
    for (std::size_t m = 0; m < r_count; ++m) {
        pi[m] = m;
    }
    for (std::size_t a = 0; a + 1 < pi.size(); ++a) {
        std::size_t best = a;
        for (std::size_t b = a + 1; b < pi.size(); ++b) {
            if (regions[pi[b]].mean > regions[pi[best]].mean ||
                (regions[pi[b]].mean == regions[pi[best]].mean && pi[b] < pi[best])) {
                best = b;
            }
        }
        std::swap(pi[a], pi[best]);
    }

    CompressedSequence out;
    for (std::size_t m : pi) {
        const OracleRegion& region = regions[m];
        for (std::size_t i : region.keep) {
            if (out.tokens.size() >= budget) {
                break;
            }
            TokenRecord rec;
            rec.feature.assign(features.row(i).begin(), features.row(i).end());
            rec.kind = TokenKind::Kept;
            rec.region = static_cast<std::int32_t>(m);
            rec.source_indices = {i};
            rec.score = scores[i];
            out.tokens.push_back(rec);
        }
        if (out.tokens.size() >= budget) {
            break;
        }
        if (!region.merge.empty()) {
            TokenRecord rec;
            rec.feature = region.merged;
            rec.kind = TokenKind::Merged;
            rec.region = static_cast<std::int32_t>(m);
            rec.source_indices = region.merge;
            rec.score = region.mean;
            out.tokens.push_back(rec);
        }
    }
    out.budget_used = out.tokens.size();
    return out;
}

}  // namespace uhrbat::oracle

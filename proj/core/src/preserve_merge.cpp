// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#include "uhrbat/preserve_merge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uhrbat/partition.hpp"

namespace uhrbat {

namespace {

void require_valid_inputs(const ScoreVector& scores, const RegionPartition& partition) {
    if (const auto violation = validate_partition(partition)) {
        throw DataError("invalid partition: " + violation->message);
    }
    if (scores.size() != partition.n_tokens) {
        throw DimensionError("scores length " + std::to_string(scores.size()) +
                             " does not match partition tokens " +
                             std::to_string(partition.n_tokens));
    }
    for (double s : scores) {
        if (!std::isfinite(s)) {
            throw DataError("scores: non-finite entry");
        }
    }
}

}  // namespace

std::vector<double> region_mean_importance(const ScoreVector& scores,
                                           const RegionPartition& partition) {
    if (scores.size() != partition.n_tokens) {
        throw DimensionError("region_mean_importance: scores length does not match partition");
    }
    std::vector<double> sums(partition.n_regions, 0.0);
    std::vector<std::size_t> counts(partition.n_regions, 0);
    for (std::size_t i = 0; i < partition.n_tokens; ++i) {
        const auto m = static_cast<std::size_t>(partition.labels[i]);
        sums[m] += scores[i];
        ++counts[m];
    }
    std::vector<double> means(partition.n_regions);
    for (std::size_t m = 0; m < partition.n_regions; ++m) {
        if (counts[m] == 0) {
            throw Error("region_mean_importance: internal: region " + std::to_string(m) +
                        " is empty");
        }
        means[m] = sums[m] / static_cast<double>(counts[m]);
    }
    return means;
}

std::vector<RegionStats> split_keep_merge(const ScoreVector& scores,
                                          const RegionPartition& partition) {
    const std::vector<double> means = region_mean_importance(scores, partition);

    std::vector<RegionStats> stats(partition.n_regions);
    for (std::size_t m = 0; m < partition.n_regions; ++m) {
        stats[m].region = static_cast<std::int32_t>(m);
        stats[m].mean_score = means[m];
    }
    for (std::size_t i = 0; i < partition.n_tokens; ++i) {
        const auto m = static_cast<std::size_t>(partition.labels[i]);
        if (scores[i] >= means[m]) {
            stats[m].keep.push_back(i);
        } else {
            stats[m].merge.push_back(i);
        }
    }
    for (auto& rs : stats) {
        if (rs.keep.empty()) {
            // Cannot happen in exact arithmetic (the max is never below the
            // mean); guards against a rounded-up mean on near-constant scores.
            std::size_t arg = rs.merge.front();
            for (std::size_t i : rs.merge) {
                if (scores[i] > scores[arg]) {
                    arg = i;
                }
            }
            rs.merge.erase(std::find(rs.merge.begin(), rs.merge.end(), arg));
            rs.keep.push_back(arg);
        }
        // descending score; stable keeps ties in ascending index order
        std::stable_sort(rs.keep.begin(), rs.keep.end(),
                         [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    }
    return stats;
}

std::vector<double> merge_tokens(const FeatureMatrix& features,
                                 std::span<const std::size_t> merge_indices) {
    if (merge_indices.empty()) {
        throw DataError("merge_tokens: empty index list");
    }
    std::vector<double> merged(features.dim, 0.0);
    for (std::size_t i : merge_indices) {
        if (i >= features.n_tokens) {
            throw BoundsError("merge_tokens: index " + std::to_string(i) + " out of range");
        }
        const auto row = features.row(i);
        for (std::size_t c = 0; c < features.dim; ++c) {
            merged[c] += row[c];
        }
    }
    for (double& v : merged) {
        v /= static_cast<double>(merge_indices.size());
    }
    return merged;
}

namespace {

std::vector<std::size_t> region_priority_order(const std::vector<RegionStats>& stats) {
    std::vector<std::size_t> order(stats.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (stats[a].mean_score != stats[b].mean_score) {
            return stats[a].mean_score > stats[b].mean_score;
        }
        return a < b;  // mean ties by ascending region index
    });
    return order;
}

TokenRecord kept_record(const FeatureMatrix& features, const ScoreVector& scores,
                        std::size_t token, std::int32_t region) {
    TokenRecord rec;
    const auto row = features.row(token);
    rec.feature.assign(row.begin(), row.end());
    rec.kind = TokenKind::Kept;
    rec.region = region;
    rec.source_indices = {token};
    rec.score = scores[token];
    return rec;
}

TokenRecord merged_record(const RegionStats& rs, std::vector<double> feature) {
    TokenRecord rec;
    rec.feature = std::move(feature);
    rec.kind = TokenKind::Merged;
    rec.region = rs.region;
    rec.source_indices = rs.merge;
    rec.score = rs.mean_score;
    return rec;
}

}  // namespace

CompressedSequence serialize_candidates(const FeatureMatrix& features, const ScoreVector& scores,
                                        const RegionPartition& partition) {
    if (features.n_tokens != partition.n_tokens) {
        throw DimensionError("serialize_candidates: feature rows do not match partition");
    }
    require_valid_inputs(scores, partition);

    std::vector<RegionStats> stats = split_keep_merge(scores, partition);
    for (auto& rs : stats) {
        if (!rs.merge.empty()) {
            rs.merged_feature = merge_tokens(features, rs.merge);
        }
    }

    CompressedSequence seq;
    for (std::size_t m : region_priority_order(stats)) {
        const RegionStats& rs = stats[m];
        for (std::size_t i : rs.keep) {
            seq.tokens.push_back(kept_record(features, scores, i, rs.region));
        }
        if (rs.merged_feature) {
            seq.tokens.push_back(merged_record(rs, *rs.merged_feature));
        }
    }
    seq.budget_used = seq.tokens.size();
    return seq;
}

CompressedSequence enforce_budget(const CompressedSequence& candidates, std::size_t budget) {
    if (budget == 0) {
        throw ConfigError("enforce_budget: budget must be >= 1");
    }
    CompressedSequence out;
    const std::size_t take = std::min(budget, candidates.tokens.size());
    out.tokens.assign(candidates.tokens.begin(),
                      candidates.tokens.begin() + static_cast<std::ptrdiff_t>(take));
    out.budget_used = take;
    return out;
}

CompressedSequence compress_scale(const FeatureMatrix& features, const ScoreVector& scores,
                                  const RegionPartition& partition, std::size_t budget,
                                  const CompressOptions& opts) {
    if (budget == 0) {
        throw ConfigError("compress_scale: budget must be >= 1");
    }
    if (features.n_tokens != partition.n_tokens) {
        throw DimensionError("compress_scale: feature rows do not match partition");
    }
    require_valid_inputs(scores, partition);
    if (budget < partition.n_regions && opts.strict_budget) {
        throw BudgetError("compress_scale: budget " + std::to_string(budget) +
                          " is below the region count " + std::to_string(partition.n_regions) +
                          " (minimum-capacity rule); rerun without strict budgets to truncate");
    }

    std::vector<RegionStats> stats = split_keep_merge(scores, partition);
    const std::vector<std::size_t> order = region_priority_order(stats);

    // Materialize only the records that survive the budget; identical to
    // enforce_budget(serialize_candidates(...), budget).
    CompressedSequence out;
    out.tokens.reserve(budget);
    for (std::size_t m : order) {
        if (out.tokens.size() == budget) {
            break;
        }
        const RegionStats& rs = stats[m];
        for (std::size_t i : rs.keep) {
            if (out.tokens.size() == budget) {
                break;
            }
            out.tokens.push_back(kept_record(features, scores, i, rs.region));
        }
        if (out.tokens.size() < budget && !rs.merge.empty()) {
            out.tokens.push_back(merged_record(rs, merge_tokens(features, rs.merge)));
        }
    }
    out.budget_used = out.tokens.size();
    return out;
}

}  // namespace uhrbat

// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#include "uhrbat/multiscale.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "uhrbat/importance.hpp"
#include "uhrbat/parallel.hpp"

namespace uhrbat {

TokenGrid grid_for_resolution(std::size_t resolution, std::size_t patch_size, int scale_id) {
    if (patch_size == 0) {
        throw ConfigError("grid_for_resolution: patch_size must be >= 1");
    }
    if (resolution == 0 || resolution % patch_size != 0) {
        throw ConfigError("grid_for_resolution: resolution " + std::to_string(resolution) +
                          " is not a positive multiple of patch size " +
                          std::to_string(patch_size));
    }
    const std::size_t side = resolution / patch_size;
    return TokenGrid::regular(side, side, scale_id);
}

EmbeddingTables EmbeddingTables::zeros(std::size_t base_rows, std::size_t base_cols,
                                       std::size_t dim, std::size_t n_scales) {
    EmbeddingTables t;
    t.base_grid = TokenGrid::regular(base_rows, base_cols);
    t.base_pe = FeatureMatrix::zeros(base_rows * base_cols, dim);
    t.scale_embeddings = FeatureMatrix::zeros(n_scales, dim);
    return t;
}

void EmbeddingTables::validate() const {
    base_pe.validate();
    scale_embeddings.validate();
    if (base_pe.n_tokens != base_grid.size()) {
        throw DimensionError("EmbeddingTables: base_pe rows do not match the base grid");
    }
    if (base_pe.dim != scale_embeddings.dim) {
        throw DimensionError("EmbeddingTables: base_pe and scale_embeddings dims differ");
    }
}

FeatureMatrix interpolate_position_embedding(const EmbeddingTables& tables,
                                             const TokenGrid& target_grid, int threads) {
    tables.validate();
    const std::size_t d = tables.base_pe.dim;
    const std::size_t base_rows = tables.base_grid.rows;
    const std::size_t base_cols = tables.base_grid.cols;
    const ResizeMapping mapping{base_rows, base_cols, target_grid.rows, target_grid.cols};
    mapping.validate();

    FeatureMatrix out = FeatureMatrix::zeros(target_grid.size(), d);
    parallel_for(target_grid.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const std::size_t u = i / target_grid.cols;
            const std::size_t v = i % target_grid.cols;
            const auto [x, y] = resize_map(mapping, u, v);
            // same corner weights for every channel
            const double x0f = std::floor(x);
            const double y0f = std::floor(y);
            const auto clamp = [](double val, std::size_t n) -> std::size_t {
                if (!(val > 0.0)) {
                    return 0;
                }
                if (val >= static_cast<double>(n - 1)) {
                    return n - 1;
                }
                return static_cast<std::size_t>(val);
            };
            const std::size_t cx0 = clamp(x0f, base_cols);
            const std::size_t cx1 = clamp(x0f + 1.0, base_cols);
            const std::size_t cy0 = clamp(y0f, base_rows);
            const std::size_t cy1 = clamp(y0f + 1.0, base_rows);
            const double wx1 = x - x0f;
            const double wx0 = 1.0 - wx1;
            const double wy1 = y - y0f;
            const double wy0 = 1.0 - wy1;
            const double* p00 = tables.base_pe.row(cy0 * base_cols + cx0).data();
            const double* p10 = tables.base_pe.row(cy0 * base_cols + cx1).data();
            const double* p01 = tables.base_pe.row(cy1 * base_cols + cx0).data();
            const double* p11 = tables.base_pe.row(cy1 * base_cols + cx1).data();
            double* dst = out.row(i).data();
            for (std::size_t c = 0; c < d; ++c) {
                dst[c] = p00[c] * wx0 * wy0 + p10[c] * wx1 * wy0 + p01[c] * wx0 * wy1 +
                         p11[c] * wx1 * wy1;
            }
        }
    });
    return out;
}

FeatureMatrix embed_tokens(const FeatureMatrix& features, const EmbeddingTables& tables,
                           const TokenGrid& grid, int threads) {
    tables.validate();
    if (features.n_tokens != grid.size()) {
        throw DimensionError("embed_tokens: feature rows do not match the grid");
    }
    if (features.dim != tables.base_pe.dim) {
        throw DimensionError("embed_tokens: feature dim " + std::to_string(features.dim) +
                             " does not match table dim " + std::to_string(tables.base_pe.dim));
    }
    if (grid.scale_id < 1 ||
        static_cast<std::size_t>(grid.scale_id) > tables.scale_embeddings.n_tokens) {
        throw DimensionError("embed_tokens: no scale embedding row for scale " +
                             std::to_string(grid.scale_id));
    }
    const FeatureMatrix pos = interpolate_position_embedding(tables, grid, threads);
    const auto scale_row = tables.scale_embeddings.row(static_cast<std::size_t>(grid.scale_id - 1));

    FeatureMatrix out = FeatureMatrix::zeros(features.n_tokens, features.dim);
    parallel_for(features.n_tokens, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const double* e = features.row(i).data();
            const double* p = pos.row(i).data();
            double* h = out.row(i).data();
            for (std::size_t c = 0; c < features.dim; ++c) {
                h[c] = e[c] + p[c] + scale_row[c];
            }
        }
    });
    return out;
}

std::vector<std::size_t> allocate_budgets(std::size_t global_budget,
                                          const std::vector<ScaleSpec>& scales,
                                          const std::vector<std::size_t>& region_counts,
                                          BudgetPolicy policy) {
    if (scales.empty()) {
        throw ConfigError("allocate_budgets: no scales");
    }
    if (region_counts.size() != scales.size()) {
        throw DimensionError("allocate_budgets: one region count per scale required");
    }
    std::size_t floor_total = 0;
    for (std::size_t r : region_counts) {
        if (r == 0) {
            throw ConfigError("allocate_budgets: region counts must be >= 1");
        }
        floor_total += r;
    }
    if (floor_total > global_budget) {
        throw BudgetError("allocate_budgets: region floors sum to " +
                          std::to_string(floor_total) + ", above the global budget " +
                          std::to_string(global_budget));
    }

    std::vector<std::size_t> budgets(scales.size());
    if (policy == BudgetPolicy::Preset) {
        for (std::size_t s = 0; s < scales.size(); ++s) {
            budgets[s] = scales[s].budget;
        }
    } else {
        std::size_t total_tokens = 0;
        for (const auto& spec : scales) {
            total_tokens += spec.grid.size();
        }
        if (total_tokens == 0) {
            throw ConfigError("allocate_budgets: scales hold no tokens");
        }
        std::size_t largest = 0;
        for (std::size_t s = 0; s < scales.size(); ++s) {
            const double share = static_cast<double>(global_budget) *
                                 static_cast<double>(scales[s].grid.size()) /
                                 static_cast<double>(total_tokens);
            budgets[s] = std::max<std::size_t>(static_cast<std::size_t>(share), region_counts[s]);
            if (scales[s].grid.size() > scales[largest].grid.size()) {
                largest = s;
            }
        }
        std::size_t used = 0;
        for (std::size_t b : budgets) {
            used += b;
        }
        // region floors can push the sum above the cap; shave the scale with
        // the most slack until feasible
        while (used > global_budget) {
            std::size_t victim = scales.size();
            std::size_t best_slack = 0;
            for (std::size_t s = 0; s < scales.size(); ++s) {
                const std::size_t slack = budgets[s] - region_counts[s];
                if (slack > best_slack) {
                    best_slack = slack;
                    victim = s;
                }
            }
            if (victim == scales.size()) {
                break;  // everything at its floor; floor_total <= cap guarantees used <= cap
            }
            const std::size_t cut = std::min(best_slack, used - global_budget);
            budgets[victim] -= cut;
            used -= cut;
        }
        if (used < global_budget) {
            budgets[largest] += global_budget - used;  // remainder to the largest scale
        }
    }

    BudgetSpec spec;
    spec.global_budget = global_budget;
    spec.per_scale = budgets;
    spec.validate();
    return budgets;
}

namespace {

template <typename Fn>
auto with_scale_context(int scale_id, Fn&& fn) -> decltype(fn()) {
    const std::string prefix = "scale " + std::to_string(scale_id) + ": ";
    try {
        return fn();
    } catch (const DimensionError& e) {
        throw DimensionError(prefix + e.what());
    } catch (const DataError& e) {
        throw DataError(prefix + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.what());
    } catch (const BoundsError& e) {
        throw BoundsError(prefix + e.what());
    } catch (const BudgetError& e) {
        throw BudgetError(prefix + e.what());
    } catch (const IoError& e) {
        throw IoError(prefix + e.what());
    } catch (const Error& e) {
        throw Error(prefix + e.what());
    }
}

void check_view_layout(const std::vector<ScaleView>& views) {
    if (views.empty()) {
        throw ConfigError("multiscale: at least one view required");
    }
    if (views.front().grid.scale_id != 1) {
        throw ConfigError("multiscale: the first view must be the anchor (scale 1)");
    }
    for (std::size_t s = 0; s < views.size(); ++s) {
        if (views[s].features.n_tokens != views[s].grid.size()) {
            throw DimensionError("multiscale: view " + std::to_string(s) +
                                 " features do not match its grid");
        }
        if (s > 0) {
            if (views[s].grid.scale_id <= views[s - 1].grid.scale_id) {
                throw ConfigError("multiscale: scale ids must be strictly ascending");
            }
            if (views[s].grid.size() <= views[s - 1].grid.size()) {
                throw ConfigError("multiscale: grids must grow strictly with the scale");
            }
        }
    }
}

}  // namespace

std::vector<RegionPartition> partition_scales(const std::vector<ScaleView>& views,
                                              const PartitionConfig& cfg, int threads) {
    check_view_layout(views);
    std::vector<RegionPartition> partitions(views.size());
    std::vector<std::function<void()>> tasks;
    tasks.reserve(views.size());
    for (std::size_t s = 0; s < views.size(); ++s) {
        tasks.push_back([&, s] {
            with_scale_context(views[s].grid.scale_id, [&] {
                if (cfg.method == PartitionMethod::KMeans) {
                    const FeatureMatrix emb =
                        build_cluster_embeddings(views[s].features, views[s].grid, cfg);
                    partitions[s] = kmeans_partition(emb, cfg).partition;
                } else {
                    if (!views[s].labels) {
                        throw ConfigError("external-label partition requested without labels");
                    }
                    partitions[s] = labels_to_partition(*views[s].labels, views[s].grid);
                }
                return 0;
            });
        });
    }
    parallel_invoke(tasks, threads);
    return partitions;
}

std::vector<ScaleOutput> compress_multiscale(const std::vector<ScaleView>& views,
                                             const AttentionMap& anchor_attention,
                                             const EmbeddingTables& tables,
                                             const std::vector<RegionPartition>& partitions,
                                             const std::vector<std::size_t>& budgets,
                                             const CompressOptions& opts, int threads) {
    check_view_layout(views);
    if (partitions.size() != views.size()) {
        throw DimensionError("multiscale: one partition per view required");
    }
    if (budgets.size() != views.size()) {
        throw DimensionError("multiscale: one budget per view required");
    }
    if (anchor_attention.n_vision != views.front().grid.size()) {
        throw DimensionError("multiscale: attention covers " +
                             std::to_string(anchor_attention.n_vision) +
                             " tokens but the anchor grid has " +
                             std::to_string(views.front().grid.size()));
    }
    const ScoreVector anchor_scores = aggregate_text_attention(anchor_attention);

    std::vector<ScaleOutput> outputs(views.size());
    std::vector<std::function<void()>> tasks;
    tasks.reserve(views.size());
    for (std::size_t s = 0; s < views.size(); ++s) {
        tasks.push_back([&, s] {
            with_scale_context(views[s].grid.scale_id, [&] {
                const FeatureMatrix embedded =
                    embed_tokens(views[s].features, tables, views[s].grid);
                ScoreVector aligned =
                    align_importance(anchor_scores, views.front().grid, views[s].grid);
                ScaleOutput& out = outputs[s];
                out.scale_id = views[s].grid.scale_id;
                out.sequence = compress_scale(embedded, aligned, partitions[s], budgets[s], opts);
                out.partition = partitions[s];
                out.aligned_scores = std::move(aligned);
                return 0;
            });
        });
    }
    parallel_invoke(tasks, threads);
    return outputs;
}

std::vector<ScaleOutput> compress_multiscale(const std::vector<ScaleView>& views,
                                             const AttentionMap& anchor_attention,
                                             const EmbeddingTables& tables,
                                             const PartitionConfig& partition_cfg,
                                             const std::vector<std::size_t>& budgets,
                                             const CompressOptions& opts, int threads) {
    const auto partitions = partition_scales(views, partition_cfg, threads);
    return compress_multiscale(views, anchor_attention, tables, partitions, budgets, opts,
                               threads);
}

}  // namespace uhrbat

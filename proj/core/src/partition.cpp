// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#include "uhrbat/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <unordered_map>

#include "uhrbat/parallel.hpp"

namespace uhrbat {

void PartitionConfig::validate() const {
    if (k == 0) {
        throw ConfigError("PartitionConfig: k must be >= 1");
    }
    if (lambda_f < 0.0 || lambda_xy < 0.0) {
        throw ConfigError("PartitionConfig: lambda weights must be >= 0");
    }
    if (max_iters == 0) {
        throw ConfigError("PartitionConfig: max_iters must be >= 1");
    }
    if (!(tol >= 0.0)) {
        throw ConfigError("PartitionConfig: tol must be >= 0");
    }
}

FeatureMatrix build_cluster_embeddings(const FeatureMatrix& features, const TokenGrid& grid,
                                       const PartitionConfig& cfg) {
    cfg.validate();
    features.validate();
    if (features.n_tokens != grid.size()) {
        throw DimensionError("build_cluster_embeddings: feature rows " +
                             std::to_string(features.n_tokens) + " do not match grid " +
                             std::to_string(grid.rows) + "x" + std::to_string(grid.cols));
    }
    const std::size_t d = features.dim;
    FeatureMatrix out = FeatureMatrix::zeros(features.n_tokens, d + 2);
    for (std::size_t i = 0; i < features.n_tokens; ++i) {
        const auto f = features.row(i);
        double norm_sq = 0.0;
        for (double v : f) {
            norm_sq += v * v;
        }
        const double norm = std::sqrt(norm_sq);
        auto u = out.row(i);
        if (norm > 0.0) {
            for (std::size_t c = 0; c < d; ++c) {
                u[c] = f[c] / norm * cfg.lambda_f;
            }
        }
        // zero feature rows keep a zero feature block
        u[d] = cfg.lambda_xy * grid.coords[i][0];
        u[d + 1] = cfg.lambda_xy * grid.coords[i][1];
    }
    return out;
}

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
        const double diff = a[c] - b[c];
        acc += diff * diff;
    }
    return acc;
}

// Uniform double in [0, 1) from the top 53 bits; keeps seeding behavior
// independent of the standard library's distribution implementations.
double unit_draw(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<std::size_t> kmeanspp_seeds(const FeatureMatrix& emb, std::size_t k,
                                        std::uint64_t seed) {
    const std::size_t n = emb.n_tokens;
    const std::size_t d = emb.dim;
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> chosen;
    chosen.reserve(k);
    std::vector<bool> is_center(n, false);

    std::size_t first = static_cast<std::size_t>(unit_draw(rng) * static_cast<double>(n));
    first = std::min(first, n - 1);
    chosen.push_back(first);
    is_center[first] = true;

    std::vector<double> best(n);
    for (std::size_t i = 0; i < n; ++i) {
        best[i] = sq_dist(emb.row(i).data(), emb.row(first).data(), d);
    }
    while (chosen.size() < k) {
        double total = 0.0;
        for (double b : best) {
            total += b;
        }
        std::size_t pick = n;
        if (total > 0.0) {
            const double r = unit_draw(rng) * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                cum += best[i];
                if (cum > r && !is_center[i]) {
                    pick = i;
                    break;
                }
            }
        }
        if (pick == n) {
            // all mass on existing centers (duplicate points): take the
            // smallest index not yet chosen
            for (std::size_t i = 0; i < n; ++i) {
                if (!is_center[i]) {
                    pick = i;
                    break;
                }
            }
        }
        chosen.push_back(pick);
        is_center[pick] = true;
        for (std::size_t i = 0; i < n; ++i) {
            best[i] = std::min(best[i], sq_dist(emb.row(i).data(), emb.row(pick).data(), d));
        }
    }
    return chosen;
}

}  // namespace

KMeansResult kmeans_partition(const FeatureMatrix& emb, const PartitionConfig& cfg, int threads) {
    cfg.validate();
    emb.validate();
    const std::size_t n = emb.n_tokens;
    const std::size_t d = emb.dim;
    const std::size_t k = cfg.k;
    if (k > n) {
        throw ConfigError("kmeans_partition: k=" + std::to_string(k) + " exceeds n=" +
                          std::to_string(n));
    }

    FeatureMatrix centers = FeatureMatrix::zeros(k, d);
    {
        const auto seeds = kmeanspp_seeds(emb, k, cfg.seed);
        for (std::size_t r = 0; r < k; ++r) {
            std::copy_n(emb.row(seeds[r]).data(), d, centers.row(r).data());
        }
    }

    std::vector<std::int32_t> labels(n, 0);
    std::vector<double> dist_best(n, 0.0);
    std::vector<double> trace;
    trace.reserve(std::min<std::size_t>(cfg.max_iters, 64));
    double j_prev = std::numeric_limits<double>::infinity();

    for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
        // assignment: element-independent, so deterministic under any chunking
        parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const double* p = emb.row(i).data();
                double best = std::numeric_limits<double>::infinity();
                std::int32_t best_r = 0;
                for (std::size_t r = 0; r < k; ++r) {
                    const double dist = sq_dist(p, centers.row(r).data(), d);
                    if (dist < best) {  // ties keep the smallest center index
                        best = dist;
                        best_r = static_cast<std::int32_t>(r);
                    }
                }
                labels[i] = best_r;
                dist_best[i] = best;
            }
        });
        double j = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            j += dist_best[i];
        }
        trace.push_back(j);

        const bool converged = j == 0.0 || (iter > 0 && (j_prev - j) < cfg.tol * j_prev);
        if (converged || iter + 1 == cfg.max_iters) {
            break;
        }
        j_prev = j;

        // centroid update, accumulated strictly in token order
        std::vector<double> sums(k * d, 0.0);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<std::size_t>(labels[i]);
            const double* p = emb.row(i).data();
            double* s = sums.data() + r * d;
            for (std::size_t c = 0; c < d; ++c) {
                s[c] += p[c];
            }
            ++counts[r];
        }
        for (std::size_t r = 0; r < k; ++r) {
            if (counts[r] == 0) {
                continue;
            }
            double* ctr = centers.row(r).data();
            const double* s = sums.data() + r * d;
            const double inv = 1.0 / static_cast<double>(counts[r]);
            for (std::size_t c = 0; c < d; ++c) {
                ctr[c] = s[c] * inv;
            }
        }
        // re-seed empty clusters from the farthest point of a multi-member
        // cluster (distances from the assignment step)
        for (std::size_t r = 0; r < k; ++r) {
            if (counts[r] != 0) {
                continue;
            }
            std::size_t far = n;
            double far_dist = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[static_cast<std::size_t>(labels[i])] < 2) {
                    continue;
                }
                if (dist_best[i] > far_dist) {
                    far_dist = dist_best[i];
                    far = i;
                }
            }
            if (far == n) {
                continue;  // nothing to steal; the cluster stays empty
            }
            --counts[static_cast<std::size_t>(labels[far])];
            labels[far] = static_cast<std::int32_t>(r);
            counts[r] = 1;
            dist_best[far] = 0.0;
            std::copy_n(emb.row(far).data(), d, centers.row(r).data());
        }
    }

    // densify labels by first occurrence
    std::vector<std::int32_t> dense_of(k, -1);
    std::vector<std::size_t> dense_src;
    dense_src.reserve(k);
    RegionPartition part;
    part.n_tokens = n;
    part.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<std::size_t>(labels[i]);
        if (dense_of[r] < 0) {
            dense_of[r] = static_cast<std::int32_t>(dense_src.size());
            dense_src.push_back(r);
        }
        part.labels[i] = dense_of[r];
    }
    part.n_regions = dense_src.size();

    KMeansResult result;
    result.partition = std::move(part);
    result.centers = FeatureMatrix::zeros(dense_src.size(), d);
    for (std::size_t m = 0; m < dense_src.size(); ++m) {
        std::copy_n(centers.row(dense_src[m]).data(), d, result.centers.row(m).data());
    }
    result.objective_trace = std::move(trace);
    return result;
}

RegionPartition labels_to_partition(const PixelLabelMap& map, const TokenGrid& grid) {
    if (map.patch_size == 0) {
        throw ConfigError("labels_to_partition: patch_size must be >= 1");
    }
    if (map.height % map.patch_size != 0 || map.width % map.patch_size != 0) {
        throw DimensionError("labels_to_partition: image extent is not a multiple of patch_size");
    }
    if (map.labels.size() != map.height * map.width) {
        throw DimensionError("labels_to_partition: label count does not match height x width");
    }
    if (grid.rows != map.height / map.patch_size || grid.cols != map.width / map.patch_size) {
        throw DimensionError("labels_to_partition: grid does not match the patched image");
    }

    const std::size_t n = grid.size();
    std::vector<std::int32_t> winners(n);
    for (std::size_t u = 0; u < grid.rows; ++u) {
        for (std::size_t v = 0; v < grid.cols; ++v) {
            std::map<std::int32_t, std::size_t> histogram;  // keys ascending
            for (std::size_t py = u * map.patch_size; py < (u + 1) * map.patch_size; ++py) {
                for (std::size_t px = v * map.patch_size; px < (v + 1) * map.patch_size; ++px) {
                    std::int32_t label = map.labels[py * map.width + px];
                    if (label < 0) {
                        label = -1;  // collapse every unlabeled value
                    }
                    ++histogram[label];
                }
            }
            std::int32_t winner = -1;
            std::size_t best = 0;
            for (const auto& [label, count] : histogram) {
                if (count > best) {  // ties resolve to the smallest label id
                    best = count;
                    winner = label;
                }
            }
            winners[u * grid.cols + v] = winner;
        }
    }

    RegionPartition part;
    part.n_tokens = n;
    part.labels.resize(n);
    std::unordered_map<std::int32_t, std::int32_t> dense;
    std::int32_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (winners[i] < 0) {
            part.labels[i] = next++;  // background tokens become singletons
            continue;
        }
        auto [it, inserted] = dense.try_emplace(winners[i], next);
        if (inserted) {
            ++next;
        }
        part.labels[i] = it->second;
    }
    part.n_regions = static_cast<std::size_t>(next);
    return part;
}

std::optional<PartitionViolation> validate_partition(const RegionPartition& partition) {
    if (partition.labels.size() != partition.n_tokens) {
        return PartitionViolation{PartitionViolation::Kind::SizeMismatch,
                                  "labels length " + std::to_string(partition.labels.size()) +
                                      " does not match n_tokens " +
                                      std::to_string(partition.n_tokens)};
    }
    if (partition.n_tokens == 0) {
        if (partition.n_regions != 0) {
            return PartitionViolation{PartitionViolation::Kind::EmptyRegion,
                                      "regions declared over zero tokens"};
        }
        return std::nullopt;
    }
    std::vector<std::size_t> counts(partition.n_regions, 0);
    for (std::size_t i = 0; i < partition.labels.size(); ++i) {
        const std::int32_t label = partition.labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= partition.n_regions) {
            return PartitionViolation{PartitionViolation::Kind::OutOfRange,
                                      "token " + std::to_string(i) + " has label " +
                                          std::to_string(label) + " outside [0, " +
                                          std::to_string(partition.n_regions) + ")"};
        }
        ++counts[static_cast<std::size_t>(label)];
    }
    for (std::size_t r = 0; r < counts.size(); ++r) {
        if (counts[r] == 0) {
            return PartitionViolation{PartitionViolation::Kind::EmptyRegion,
                                      "region " + std::to_string(r) + " has no tokens"};
        }
    }
    return std::nullopt;
}

}  // namespace uhrbat

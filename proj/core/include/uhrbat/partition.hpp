// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "uhrbat/types.hpp"

namespace uhrbat {

enum class PartitionMethod { KMeans, ExternalLabels };

struct PartitionConfig {
    PartitionMethod method = PartitionMethod::KMeans;
    std::size_t k = 600;
    double lambda_f = 1.0;    // weight of the l2-normalized feature block
    double lambda_xy = 0.5;   // weight of the normalized coordinates
    std::uint64_t seed = 0;
    std::size_t max_iters = 100;
    double tol = 1e-6;        // stop when the relative decrease of J drops below

    void validate() const;
};

/// Pixel-level labels covering the image of a token grid; patch_size pixels
/// per token side. Negative labels mean "unlabeled" (background).
struct PixelLabelMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t patch_size = 1;
    std::vector<std::int32_t> labels;  // height * width, row-major
};

/// Clustering embedding u_i = [lf * f_i / ||f_i||, lxy * x_i, lxy * y_i].
/// Zero feature rows stay zero instead of dividing by zero.
FeatureMatrix build_cluster_embeddings(const FeatureMatrix& features, const TokenGrid& grid,
                                       const PartitionConfig& cfg);

struct KMeansResult {
    RegionPartition partition;             // labels densified by first occurrence
    FeatureMatrix centers;                 // one row per dense region
    std::vector<double> objective_trace;   // J after each assignment step
};

/// Lloyd iterations over k-means++ seeding. Deterministic for a fixed
/// (embeddings, cfg) pair and for every thread count: assignments are
/// element-independent and centroid accumulation runs in token order.
/// Ties in the assignment go to the smallest center index; empty clusters are
/// re-seeded from the point farthest from its assigned center.
KMeansResult kmeans_partition(const FeatureMatrix& embeddings, const PartitionConfig& cfg,
                              int threads = 1);

/// Token label = majority pixel label inside its patch, ties to the smallest
/// label id. Tokens whose majority is unlabeled become singleton regions.
/// Output labels are densified to {0..R-1} by first occurrence.
RegionPartition labels_to_partition(const PixelLabelMap& map, const TokenGrid& grid);

/// Checks the disjoint-cover contract; nullopt means the partition is valid.
std::optional<PartitionViolation> validate_partition(const RegionPartition& partition);

}  // namespace uhrbat

// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uhrbat/types.hpp"

namespace uhrbat::oracle {

// Brute-force reference implementations for equivalence testing. Each one is
// written independently of its production counterpart (different loop
// structure, no shared helpers beyond the core types) and is only meant for
// desk-scale inputs.

/// Column mean of the attention map, summed in reverse row order.
ScoreVector oracle_column_mean(const AttentionMap& attn);

/// Literal four-corner bilinear interpolation with clamped lookups.
double oracle_bilinear(const GridScores& grid, double x, double y);

double squared_distance(std::span<const double> a, std::span<const double> b);

/// Exhaustive nearest-center assignment, ties to the smallest center index.
std::vector<std::int32_t> oracle_nearest_center(const FeatureMatrix& embeddings,
                                                const FeatureMatrix& centers);

/// Straight-line re-transcription of the region-wise preserve-and-merge
/// serialization with naive selection sorts.
CompressedSequence oracle_compress(const FeatureMatrix& features, const ScoreVector& scores,
                                   const RegionPartition& partition, std::size_t budget);

}  // namespace uhrbat::oracle

// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace uhrbat {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or length mismatch between paired inputs.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Non-finite, negative-where-forbidden, or otherwise unusable values.
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration (bad k, zero budget, malformed manifest, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Index outside its valid range.
class BoundsError : public Error {
public:
    using Error::Error;
};

/// File or stream failure, malformed tensor container.
class IoError : public Error {
public:
    using Error::Error;
};

/// Budget constraints cannot be met (sum of region floors exceeds the cap,
/// or a per-scale budget is below the region count in strict mode).
class BudgetError : public Error {
public:
    using Error::Error;
};

/// Normalized (x, y) cell centers for a rows x cols token grid, row-major.
/// Token (u, v) sits at ((v + 0.5) / cols, (u + 0.5) / rows).
std::vector<std::array<double, 2>> token_coordinates(std::size_t rows, std::size_t cols);

/// Geometry of one scale's token grid. Immutable after construction.
struct TokenGrid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    int scale_id = 1;
    std::vector<std::array<double, 2>> coords;  // cell centers, row-major

    static TokenGrid regular(std::size_t rows, std::size_t cols, int scale_id = 1);

    std::size_t size() const { return rows * cols; }
};

/// Dense row-major matrix of token features, one row per token.
struct FeatureMatrix {
    std::size_t n_tokens = 0;
    std::size_t dim = 0;
    std::vector<double> data;  // n_tokens * dim, row-major

    static FeatureMatrix zeros(std::size_t n_tokens, std::size_t dim);

    double& at(std::size_t token, std::size_t channel) { return data[token * dim + channel]; }
    double at(std::size_t token, std::size_t channel) const { return data[token * dim + channel]; }
    std::span<const double> row(std::size_t token) const { return {data.data() + token * dim, dim}; }
    std::span<double> row(std::size_t token) { return {data.data() + token * dim, dim}; }

    /// Throws DataError on non-finite entries, DimensionError on size mismatch.
    void validate() const;
};

/// Text-to-vision attention weights, one row per text token.
struct AttentionMap {
    std::size_t n_text = 0;
    std::size_t n_vision = 0;
    std::vector<double> weights;  // n_text * n_vision, row-major

    double at(std::size_t text, std::size_t vision) const { return weights[text * n_vision + vision]; }

    /// Entries must be finite and >= 0.
    void validate() const;
};

/// Per-token scalar importance.
using ScoreVector = std::vector<double>;

/// Score vector reshaped onto its grid; element (u, v) = scores[u * cols + v].
struct GridScores {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    double at(std::size_t u, std::size_t v) const { return values[u * cols + v]; }
};

GridScores reshape_scores_to_grid(const ScoreVector& scores, const TokenGrid& grid);

/// Disjoint cover of token indices: labels[i] in [0, n_regions), every
/// region index non-empty.
struct RegionPartition {
    std::size_t n_tokens = 0;
    std::size_t n_regions = 0;
    std::vector<std::int32_t> labels;
};

struct PartitionViolation {
    enum class Kind { SizeMismatch, OutOfRange, EmptyRegion };
    Kind kind;
    std::string message;
};

/// Global cap plus per-scale allocations.
struct BudgetSpec {
    std::size_t global_budget = 0;
    std::vector<std::size_t> per_scale;

    /// Each B_s >= 1 and sum != exceeding the global cap.
    void validate() const;
};

enum class TokenKind : std::uint8_t { Kept, Merged };

/// One output token. Kept records cite exactly one source index; merged
/// records carry the mean of their (>= 1) source rows.
struct TokenRecord {
    std::vector<double> feature;
    TokenKind kind = TokenKind::Kept;
    std::int32_t region = 0;
    std::vector<std::size_t> source_indices;
    double score = 0.0;  // a_i for kept, region mean for merged
};

struct CompressedSequence {
    std::vector<TokenRecord> tokens;
    std::size_t budget_used = 0;
};

}  // namespace uhrbat

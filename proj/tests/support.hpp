// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "uhrbat/partition.hpp"
#include "uhrbat/tensor_io.hpp"
#include "uhrbat/types.hpp"

namespace uhrbat::testing {

// Hand-rolled draws so generated instances are identical across standard
// libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : rng_(seed) {}

    double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    std::uint64_t integer(std::uint64_t lo, std::uint64_t hi) {  // inclusive
        return lo + rng_() % (hi - lo + 1);
    }
    std::uint64_t raw() { return rng_(); }

private:
    std::mt19937_64 rng_;
};

inline ScoreVector random_scores(std::size_t n, Rng& rng, double lo = 0.0, double hi = 1.0) {
    ScoreVector s(n);
    for (double& v : s) {
        v = rng.uniform(lo, hi);
    }
    return s;
}

inline ScoreVector random_integer_scores(std::size_t n, Rng& rng, std::uint64_t max_value = 16) {
    ScoreVector s(n);
    for (double& v : s) {
        v = static_cast<double>(rng.integer(0, max_value));
    }
    return s;
}

inline FeatureMatrix random_features(std::size_t n, std::size_t d, Rng& rng, double lo = -1.0,
                                     double hi = 1.0) {
    FeatureMatrix m = FeatureMatrix::zeros(n, d);
    for (double& v : m.data) {
        v = rng.uniform(lo, hi);
    }
    return m;
}

inline AttentionMap random_attention(std::size_t m, std::size_t n, Rng& rng) {
    AttentionMap a;
    a.n_text = m;
    a.n_vision = n;
    a.weights.resize(m * n);
    for (double& w : a.weights) {
        w = rng.unit();
    }
    return a;
}

/// Random valid partition with at most max_regions regions, densified by
/// first occurrence so every region id is populated.
inline RegionPartition random_partition(std::size_t n, std::size_t max_regions, Rng& rng) {
    const std::size_t target = rng.integer(1, std::min(max_regions, n));
    RegionPartition p;
    p.n_tokens = n;
    p.labels.resize(n);
    std::vector<std::int32_t> dense(target, -1);
    std::int32_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto raw = static_cast<std::size_t>(rng.integer(0, target - 1));
        if (dense[raw] < 0) {
            dense[raw] = next++;
        }
        p.labels[i] = dense[raw];
    }
    p.n_regions = static_cast<std::size_t>(next);
    return p;
}

/// First structural difference between two compressed sequences, if any.
/// Scores and features are compared bitwise.
inline std::optional<std::string> structural_difference(const CompressedSequence& a,
                                                        const CompressedSequence& b) {
    if (a.tokens.size() != b.tokens.size()) {
        return "lengths differ: " + std::to_string(a.tokens.size()) + " vs " +
               std::to_string(b.tokens.size());
    }
    if (a.budget_used != b.budget_used) {
        return "budget_used differs";
    }
    for (std::size_t i = 0; i < a.tokens.size(); ++i) {
        const TokenRecord& ra = a.tokens[i];
        const TokenRecord& rb = b.tokens[i];
        const std::string at = "record " + std::to_string(i) + ": ";
        if (ra.kind != rb.kind) {
            return at + "kind differs";
        }
        if (ra.region != rb.region) {
            return at + "region differs (" + std::to_string(ra.region) + " vs " +
                   std::to_string(rb.region) + ")";
        }
        if (ra.source_indices != rb.source_indices) {
            return at + "source indices differ";
        }
        if (ra.score != rb.score) {
            return at + "score differs";
        }
        if (ra.feature != rb.feature) {
            return at + "feature differs";
        }
    }
    return std::nullopt;
}

/// Serialization-order contract on an output sequence: region groups in
/// non-increasing mean order, kept scores non-increasing inside a group,
/// merged records only at group ends.
inline std::optional<std::string> order_violation(const CompressedSequence& seq,
                                                  const std::vector<double>& region_means) {
    double prev_mean = std::numeric_limits<double>::infinity();
    std::int32_t current_region = -1;
    bool region_closed = false;  // a merged record ends its group
    double prev_score = std::numeric_limits<double>::infinity();
    std::vector<bool> seen(region_means.size(), false);
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
        const TokenRecord& rec = seq.tokens[i];
        const auto m = static_cast<std::size_t>(rec.region);
        if (rec.region != current_region) {
            if (m >= region_means.size()) {
                return "record " + std::to_string(i) + ": unknown region";
            }
            if (seen[m]) {
                return "record " + std::to_string(i) + ": region revisited";
            }
            seen[m] = true;
            if (region_means[m] > prev_mean) {
                return "record " + std::to_string(i) + ": region mean increased";
            }
            prev_mean = region_means[m];
            current_region = rec.region;
            region_closed = false;
            prev_score = std::numeric_limits<double>::infinity();
        }
        if (region_closed) {
            return "record " + std::to_string(i) + ": follows a merged record in its group";
        }
        if (rec.kind == TokenKind::Merged) {
            region_closed = true;
        } else {
            if (rec.score > prev_score) {
                return "record " + std::to_string(i) + ": kept score increased inside a group";
            }
            prev_score = rec.score;
        }
    }
    return std::nullopt;
}

/// Writes a failing randomized instance for replay.
inline std::filesystem::path dump_instance(const FeatureMatrix& features,
                                           const ScoreVector& scores,
                                           const RegionPartition& partition, std::size_t budget,
                                           const std::string& tag) {
    namespace fs = std::filesystem;
    const fs::path dir =
        fs::temp_directory_path() / ("uhrbat_failed_" + tag + "_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const std::uint64_t fdims[2] = {features.n_tokens, features.dim};
    write_uhrt_f64(dir / "features.uhrt", fdims, features.data);
    const std::uint64_t sdims[1] = {scores.size()};
    write_uhrt_f64(dir / "scores.uhrt", sdims, scores);
    const std::uint64_t ldims[1] = {partition.labels.size()};
    write_uhrt_i32(dir / "labels.uhrt", ldims, partition.labels);
    std::ofstream manifest(dir / "instance.txt");
    manifest << "n_tokens " << partition.n_tokens << "\nn_regions " << partition.n_regions
             << "\nbudget " << budget << "\n";
    return dir;
}

}  // namespace uhrbat::testing

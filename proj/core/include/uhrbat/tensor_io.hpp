// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "uhrbat/types.hpp"

namespace uhrbat {

// UHRT binary tensor container, little-endian:
//   magic "UHRT" | u32 version = 1 | u8 dtype | u8 ndim | u64 dims[ndim] | payload
// dtype: 0 = f32, 1 = f64, 2 = i32. Payload is row-major.

enum class DType : std::uint8_t { F32 = 0, F64 = 1, I32 = 2 };

/// In-memory tensor. Floating payloads are widened to f64 on load; integer
/// payloads stay i32. Exactly one of `f64` / `i32` is populated.
struct Tensor {
    DType source_dtype = DType::F64;
    std::vector<std::uint64_t> dims;
    std::vector<double> f64;
    std::vector<std::int32_t> i32;

    std::size_t element_count() const;
    bool is_integer() const { return source_dtype == DType::I32; }
};

Tensor read_uhrt(const std::filesystem::path& path);

void write_uhrt_f64(const std::filesystem::path& path, std::span<const std::uint64_t> dims,
                    std::span<const double> values);
void write_uhrt_f32(const std::filesystem::path& path, std::span<const std::uint64_t> dims,
                    std::span<const double> values);
void write_uhrt_i32(const std::filesystem::path& path, std::span<const std::uint64_t> dims,
                    std::span<const std::int32_t> values);

// Adapters between tensors and the domain types they transport.

FeatureMatrix tensor_to_features(const Tensor& t);
AttentionMap tensor_to_attention(const Tensor& t);
ScoreVector tensor_to_scores(const Tensor& t);
std::vector<std::int32_t> tensor_to_labels(const Tensor& t);  // 1-D or 2-D i32

}  // namespace uhrbat

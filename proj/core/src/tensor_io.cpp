// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#include "uhrbat/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace uhrbat {

static_assert(std::endian::native == std::endian::little,
              "UHRT I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'U', 'H', 'R', 'T'};
constexpr std::uint32_t kVersion = 1;

void read_exact(std::ifstream& in, void* dst, std::size_t bytes, const char* what) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
    if (in.gcount() != static_cast<std::streamsize>(bytes)) {
        throw IoError(std::string("UHRT: truncated file while reading ") + what);
    }
}

struct Header {
    DType dtype;
    std::vector<std::uint64_t> dims;
    std::size_t elements;
};

Header read_header(std::ifstream& in, const std::filesystem::path& path) {
    char magic[4];
    read_exact(in, magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("UHRT: bad magic in " + path.string());
    }
    std::uint32_t version = 0;
    read_exact(in, &version, sizeof(version), "version");
    if (version != kVersion) {
        throw IoError("UHRT: unsupported version " + std::to_string(version));
    }
    std::uint8_t dtype_code = 0;
    std::uint8_t ndim = 0;
    read_exact(in, &dtype_code, 1, "dtype");
    read_exact(in, &ndim, 1, "ndim");
    if (dtype_code > 2) {
        throw IoError("UHRT: unknown dtype code " + std::to_string(dtype_code));
    }
    Header h;
    h.dtype = static_cast<DType>(dtype_code);
    h.dims.resize(ndim);
    if (ndim > 0) {
        read_exact(in, h.dims.data(), sizeof(std::uint64_t) * ndim, "dims");
    }
    std::size_t count = 1;
    for (std::uint64_t d : h.dims) {
        if (d == 0) {
            count = 0;
            continue;
        }
        if (count > std::numeric_limits<std::size_t>::max() / d) {
            throw IoError("UHRT: dimension overflow");
        }
        count *= static_cast<std::size_t>(d);
    }
    h.elements = count;
    return h;
}

void write_header(std::ofstream& out, DType dtype, std::span<const std::uint64_t> dims) {
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
    const std::uint8_t dtype_code = static_cast<std::uint8_t>(dtype);
    const std::uint8_t ndim = static_cast<std::uint8_t>(dims.size());
    if (dims.size() > 255) {
        throw IoError("UHRT: too many dimensions");
    }
    out.write(reinterpret_cast<const char*>(&dtype_code), 1);
    out.write(reinterpret_cast<const char*>(&ndim), 1);
    out.write(reinterpret_cast<const char*>(dims.data()),
              static_cast<std::streamsize>(sizeof(std::uint64_t) * dims.size()));
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("UHRT: cannot open " + path.string() + " for writing");
    }
    return out;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) {
        throw IoError("UHRT: write failed for " + path.string());
    }
}

}  // namespace

std::size_t Tensor::element_count() const {
    std::size_t count = 1;
    for (std::uint64_t d : dims) {
        count *= static_cast<std::size_t>(d);
    }
    return count;
}

Tensor read_uhrt(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("UHRT: cannot open " + path.string());
    }
    const Header h = read_header(in, path);
    Tensor t;
    t.source_dtype = h.dtype;
    t.dims = h.dims;
    switch (h.dtype) {
        case DType::F32: {
            std::vector<float> raw(h.elements);
            read_exact(in, raw.data(), sizeof(float) * h.elements, "f32 payload");
            t.f64.assign(raw.begin(), raw.end());  // widen
            break;
        }
        case DType::F64:
            t.f64.resize(h.elements);
            read_exact(in, t.f64.data(), sizeof(double) * h.elements, "f64 payload");
            break;
        case DType::I32:
            t.i32.resize(h.elements);
            read_exact(in, t.i32.data(), sizeof(std::int32_t) * h.elements, "i32 payload");
            break;
    }
    return t;
}

void write_uhrt_f64(const std::filesystem::path& path, std::span<const std::uint64_t> dims,
                    std::span<const double> values) {
    auto out = open_for_write(path);
    write_header(out, DType::F64, dims);
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(sizeof(double) * values.size()));
    finish_write(out, path);
}

void write_uhrt_f32(const std::filesystem::path& path, std::span<const std::uint64_t> dims,
                    std::span<const double> values) {
    auto out = open_for_write(path);
    write_header(out, DType::F32, dims);
    std::vector<float> narrow(values.begin(), values.end());
    out.write(reinterpret_cast<const char*>(narrow.data()),
              static_cast<std::streamsize>(sizeof(float) * narrow.size()));
    finish_write(out, path);
}

void write_uhrt_i32(const std::filesystem::path& path, std::span<const std::uint64_t> dims,
                    std::span<const std::int32_t> values) {
    auto out = open_for_write(path);
    write_header(out, DType::I32, dims);
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(sizeof(std::int32_t) * values.size()));
    finish_write(out, path);
}

FeatureMatrix tensor_to_features(const Tensor& t) {
    if (t.is_integer() || t.dims.size() != 2) {
        throw IoError("expected a 2-D floating tensor for features");
    }
    FeatureMatrix m;
    m.n_tokens = static_cast<std::size_t>(t.dims[0]);
    m.dim = static_cast<std::size_t>(t.dims[1]);
    m.data = t.f64;
    m.validate();
    return m;
}

AttentionMap tensor_to_attention(const Tensor& t) {
    if (t.is_integer() || t.dims.size() != 2) {
        throw IoError("expected a 2-D floating tensor for an attention map");
    }
    AttentionMap a;
    a.n_text = static_cast<std::size_t>(t.dims[0]);
    a.n_vision = static_cast<std::size_t>(t.dims[1]);
    a.weights = t.f64;
    a.validate();
    return a;
}

ScoreVector tensor_to_scores(const Tensor& t) {
    if (t.is_integer() || t.dims.size() != 1) {
        throw IoError("expected a 1-D floating tensor for scores");
    }
    for (double v : t.f64) {
        if (!std::isfinite(v)) {
            throw DataError("scores: non-finite entry");
        }
    }
    return t.f64;
}

std::vector<std::int32_t> tensor_to_labels(const Tensor& t) {
    if (!t.is_integer() || t.dims.empty() || t.dims.size() > 2) {
        throw IoError("expected a 1-D or 2-D i32 tensor for labels");
    }
    return t.i32;
}

}  // namespace uhrbat

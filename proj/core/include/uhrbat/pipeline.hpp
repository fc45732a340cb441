// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "uhrbat/multiscale.hpp"
#include "uhrbat/types.hpp"

namespace uhrbat {

// Manifest-driven batch front-end. One manifest describes one run: scales,
// budgets, partition config, seeds, tensor paths. Artifacts per scale s:
//   <out>/<s>.feat.uhrt   compressed features, budget_used x d, f64
//   <out>/<s>.meta.txt    one JSON record per output token (kind, region,
//                         score, source_indices)
//   <out>/<s>.mask.pgm    P5 graymap over the original grid: 255 kept,
//                         128 merged into a representative, 0 dropped
// plus <out>/report.json. All files are staged to temp names and renamed,
// and contain no timestamps, so identical runs produce identical bytes.

struct ManifestScale {
    int scale_id = 1;
    std::size_t resolution = 0;
    std::string features_path;
    std::string labels_path;  // external-label partitions only
};

struct Manifest {
    std::size_t patch_size = 14;
    std::uint64_t seed = 0;
    int threads = 1;
    bool strict_budget = true;
    BudgetPolicy budget_policy = BudgetPolicy::Proportional;
    std::size_t global_budget = 0;
    std::vector<std::size_t> preset_budgets;
    PartitionConfig partition;
    std::string anchor_attention_path;
    std::string base_pe_path;  // empty -> zero tables
    std::size_t base_rows = 0;
    std::size_t base_cols = 0;
    std::string scale_embeddings_path;
    std::vector<ManifestScale> scales;
    std::string output_dir;
    std::filesystem::path base_dir;  // relative tensor paths resolve against this
};

/// Parses a manifest file; UHRBAT_SEED in the environment overrides its seed.
Manifest load_manifest(const std::filesystem::path& path);

struct ScaleReport {
    int scale_id = 1;
    std::size_t n_tokens = 0;
    std::size_t n_regions = 0;
    std::size_t budget = 0;
    std::size_t kept = 0;
    std::size_t merged = 0;
    double ratio = 0.0;  // n_tokens / budget
};

struct RunReport {
    std::vector<ScaleReport> scales;
    std::size_t total_tokens = 0;
    std::size_t total_budget = 0;
    double total_ratio = 0.0;
    std::vector<std::pair<std::string, double>> timing_ms;  // per stage, in order
};

/// n / budget rendered to two decimals, as reported.
std::string format_ratio(std::size_t n_tokens, std::size_t budget);

std::string render_report_text(const RunReport& report);
/// Deterministic JSON body (timing is reported on the text side only).
std::string render_report_json(const RunReport& report);

/// Runs a compress manifest end to end and writes all artifacts.
RunReport run_compress(const Manifest& manifest, const std::filesystem::path& out_dir);

// Sidecar metadata and masks.

struct MetaRecord {
    TokenKind kind = TokenKind::Kept;
    std::int32_t region = 0;
    std::vector<std::size_t> source_indices;
    double score = 0.0;
};

std::string metadata_lines(const CompressedSequence& sequence);
std::vector<MetaRecord> parse_metadata(std::istream& in);
std::vector<MetaRecord> parse_metadata_file(const std::filesystem::path& path);

/// Grid mask from final metadata: 255 kept, 128 merged, 0 dropped.
std::vector<std::uint8_t> mask_from_metadata(const std::vector<MetaRecord>& records,
                                             std::size_t rows, std::size_t cols);
void write_pgm(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
               std::span<const std::uint8_t> pixels);

// CLI command bodies. Errors map to exit codes:
//   0 ok, 2 invalid manifest/config/input shape, 3 tensor I/O failure,
//   4 infeasible budget, 1 anything else.
int exit_code_for_current_exception();

struct CompressArgs {
    std::filesystem::path manifest_path;
    std::filesystem::path out_dir;
    int threads = 0;           // 0 -> manifest value
    bool force_strict = false; // --strict-budget
};
int cmd_compress(const CompressArgs& args, std::ostream& out, std::ostream& err);

struct PartitionArgs {
    std::filesystem::path features_path;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t k = 600;
    std::uint64_t seed = 0;
    double lambda_f = 1.0;
    double lambda_xy = 0.5;
    std::filesystem::path out_path;  // empty -> <features>.labels.uhrt
};
int cmd_partition(const PartitionArgs& args, std::ostream& out, std::ostream& err);

struct MaskArgs {
    std::filesystem::path meta_path;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::filesystem::path out_path;
};
int cmd_mask(const MaskArgs& args, std::ostream& out, std::ostream& err);

}  // namespace uhrbat

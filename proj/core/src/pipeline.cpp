// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#include "uhrbat/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "uhrbat/importance.hpp"
#include "uhrbat/tensor_io.hpp"

namespace uhrbat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double ms_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

json parse_json_file(const fs::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(std::string("cannot open ") + what + ": " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed ") + what + " " + path.string() + ": " +
                          e.what());
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("manifest field '") + key + "': " + e.what());
    }
}

template <typename T>
T require(const json& j, const char* key) {
    if (!j.contains(key)) {
        throw ConfigError(std::string("manifest is missing required field '") + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("manifest field '") + key + "': " + e.what());
    }
}

// Staged artifact writes: everything lands on a temp name first and is
// renamed only after the whole set succeeded.
class StagedWrites {
public:
    fs::path stage(const fs::path& final_path) {
        fs::path tmp = final_path;
        tmp += ".tmp";
        pending_.emplace_back(tmp, final_path);
        return tmp;
    }

    void commit() {
        for (const auto& [tmp, final_path] : pending_) {
            std::error_code ec;
            fs::rename(tmp, final_path, ec);
            if (ec) {
                throw IoError("cannot move " + tmp.string() + " to " + final_path.string() +
                              ": " + ec.message());
            }
        }
        pending_.clear();
    }

    ~StagedWrites() {
        for (const auto& [tmp, final_path] : pending_) {
            std::error_code ec;
            fs::remove(tmp, ec);
        }
    }

private:
    std::vector<std::pair<fs::path, fs::path>> pending_;
};

void write_text_file(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << body;
    out.flush();
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

fs::path resolve_input(const Manifest& manifest, const std::string& rel) {
    fs::path p(rel);
    if (p.is_absolute()) {
        return p;
    }
    return manifest.base_dir / p;
}

}  // namespace

Manifest load_manifest(const fs::path& path) {
    const json j = parse_json_file(path, "manifest");
    Manifest m;
    m.base_dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    m.patch_size = get_or<std::size_t>(j, "patch_size", 14);
    m.seed = get_or<std::uint64_t>(j, "seed", 0);
    m.threads = get_or<int>(j, "threads", 1);
    m.strict_budget = get_or<bool>(j, "strict_budget", true);
    m.anchor_attention_path = require<std::string>(j, "anchor_attention");
    m.output_dir = get_or<std::string>(j, "output_dir", "");

    const json budget = j.contains("budget") ? j.at("budget") : json::object();
    const std::string policy = budget.contains("policy") ? budget.at("policy").get<std::string>()
                                                         : std::string("proportional");
    if (policy == "preset") {
        m.budget_policy = BudgetPolicy::Preset;
        m.preset_budgets = require<std::vector<std::size_t>>(budget, "per_scale");
        std::size_t sum = 0;
        for (std::size_t b : m.preset_budgets) {
            sum += b;
        }
        m.global_budget = get_or<std::size_t>(budget, "global", sum);
    } else if (policy == "proportional") {
        m.budget_policy = BudgetPolicy::Proportional;
        m.global_budget = require<std::size_t>(budget, "global");
    } else {
        throw ConfigError("manifest budget policy must be 'preset' or 'proportional'");
    }

    const json part = j.contains("partition") ? j.at("partition") : json::object();
    const std::string method = get_or<std::string>(part, "method", "kmeans");
    if (method == "kmeans") {
        m.partition.method = PartitionMethod::KMeans;
    } else if (method == "external_labels") {
        m.partition.method = PartitionMethod::ExternalLabels;
    } else {
        throw ConfigError("manifest partition method must be 'kmeans' or 'external_labels'");
    }
    m.partition.k = get_or<std::size_t>(part, "k", 600);
    m.partition.lambda_f = get_or<double>(part, "lambda_f", 1.0);
    m.partition.lambda_xy = get_or<double>(part, "lambda_xy", 0.5);
    m.partition.max_iters = get_or<std::size_t>(part, "max_iters", 100);
    m.partition.tol = get_or<double>(part, "tol", 1e-6);
    m.partition.seed = get_or<std::uint64_t>(part, "seed", m.seed);

    if (const char* env_seed = std::getenv("UHRBAT_SEED")) {
        char* end = nullptr;
        const unsigned long long parsed = std::strtoull(env_seed, &end, 10);
        if (end == env_seed || *end != '\0') {
            throw ConfigError(std::string("UHRBAT_SEED is not an integer: ") + env_seed);
        }
        m.seed = parsed;
        m.partition.seed = parsed;
    }

    if (j.contains("embeddings")) {
        const json emb = j.at("embeddings");
        m.base_pe_path = require<std::string>(emb, "base_pe");
        m.base_rows = require<std::size_t>(emb, "base_rows");
        m.base_cols = require<std::size_t>(emb, "base_cols");
        m.scale_embeddings_path = require<std::string>(emb, "scale_embeddings");
    }

    if (!j.contains("scales") || !j.at("scales").is_array() || j.at("scales").empty()) {
        throw ConfigError("manifest needs a non-empty 'scales' array");
    }
    for (const json& s : j.at("scales")) {
        ManifestScale ms;
        ms.scale_id = require<int>(s, "scale_id");
        ms.resolution = require<std::size_t>(s, "resolution");
        ms.features_path = require<std::string>(s, "features");
        ms.labels_path = get_or<std::string>(s, "labels", "");
        m.scales.push_back(std::move(ms));
    }
    return m;
}

std::string format_ratio(std::size_t n_tokens, std::size_t budget) {
    const double ratio =
        budget == 0 ? 0.0 : static_cast<double>(n_tokens) / static_cast<double>(budget);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", ratio);
    return buf;
}

std::string render_report_text(const RunReport& report) {
    std::ostringstream out;
    out << "scale  tokens  regions  budget  kept  merged  ratio\n";
    for (const ScaleReport& s : report.scales) {
        out << s.scale_id << "  " << s.n_tokens << "  " << s.n_regions << "  " << s.budget << "  "
            << s.kept << "  " << s.merged << "  " << format_ratio(s.n_tokens, s.budget) << "\n";
    }
    out << "total  " << report.total_tokens << "  budget " << report.total_budget << "  ratio "
        << format_ratio(report.total_tokens, report.total_budget) << "\n";
    if (!report.timing_ms.empty()) {
        out << "timing_ms ";
        for (std::size_t i = 0; i < report.timing_ms.size(); ++i) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%s=%.2f", report.timing_ms[i].first.c_str(),
                          report.timing_ms[i].second);
            out << (i ? " " : "") << buf;
        }
        out << "\n";
    }
    return out.str();
}

std::string render_report_json(const RunReport& report) {
    json j;
    j["scales"] = json::array();
    for (const ScaleReport& s : report.scales) {
        json js;
        js["scale_id"] = s.scale_id;
        js["n_tokens"] = s.n_tokens;
        js["n_regions"] = s.n_regions;
        js["budget"] = s.budget;
        js["kept"] = s.kept;
        js["merged"] = s.merged;
        js["ratio"] = s.ratio;
        j["scales"].push_back(js);
    }
    j["totals"]["n_tokens"] = report.total_tokens;
    j["totals"]["budget"] = report.total_budget;
    j["totals"]["ratio"] = report.total_ratio;
    return j.dump(2) + "\n";
}

std::string metadata_lines(const CompressedSequence& sequence) {
    std::ostringstream out;
    for (const TokenRecord& rec : sequence.tokens) {
        json j;
        j["kind"] = rec.kind == TokenKind::Kept ? "kept" : "merged";
        j["region"] = rec.region;
        j["score"] = rec.score;
        j["source_indices"] = rec.source_indices;
        out << j.dump() << "\n";
    }
    return out.str();
}

std::vector<MetaRecord> parse_metadata(std::istream& in) {
    std::vector<MetaRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ConfigError("metadata line " + std::to_string(line_no) + ": " + e.what());
        }
        MetaRecord rec;
        try {
            const std::string kind = j.at("kind").get<std::string>();
            if (kind == "kept") {
                rec.kind = TokenKind::Kept;
            } else if (kind == "merged") {
                rec.kind = TokenKind::Merged;
            } else {
                throw ConfigError("metadata line " + std::to_string(line_no) +
                                  ": unknown kind '" + kind + "'");
            }
            rec.region = j.at("region").get<std::int32_t>();
            rec.score = j.at("score").get<double>();
            rec.source_indices = j.at("source_indices").get<std::vector<std::size_t>>();
        } catch (const json::exception& e) {
            throw ConfigError("metadata line " + std::to_string(line_no) + ": " + e.what());
        }
        if (rec.source_indices.empty()) {
            throw ConfigError("metadata line " + std::to_string(line_no) + ": no source indices");
        }
        if (rec.kind == TokenKind::Kept && rec.source_indices.size() != 1) {
            throw ConfigError("metadata line " + std::to_string(line_no) +
                              ": kept records cite exactly one source");
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<MetaRecord> parse_metadata_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open metadata " + path.string());
    }
    return parse_metadata(in);
}

std::vector<std::uint8_t> mask_from_metadata(const std::vector<MetaRecord>& records,
                                             std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) {
        throw ConfigError("mask grid must be at least 1x1");
    }
    std::vector<std::uint8_t> mask(rows * cols, 0);
    for (const MetaRecord& rec : records) {
        const std::uint8_t value = rec.kind == TokenKind::Kept ? 255 : 128;
        for (std::size_t src : rec.source_indices) {
            if (src >= mask.size()) {
                throw ConfigError("metadata cites token " + std::to_string(src) +
                                  " outside the " + std::to_string(rows) + "x" +
                                  std::to_string(cols) + " grid");
            }
            mask[src] = value;
        }
    }
    return mask;
}

void write_pgm(const fs::path& path, std::size_t rows, std::size_t cols,
               std::span<const std::uint8_t> pixels) {
    if (pixels.size() != rows * cols) {
        throw DimensionError("write_pgm: pixel count does not match the grid");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << "P5\n" << cols << " " << rows << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    out.flush();
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

RunReport run_compress(const Manifest& manifest, const fs::path& out_dir) {
    const auto t_start = std::chrono::steady_clock::now();
    RunReport report;

    // load
    auto t0 = std::chrono::steady_clock::now();
    const AttentionMap attention =
        tensor_to_attention(read_uhrt(resolve_input(manifest, manifest.anchor_attention_path)));

    std::vector<ScaleView> views;
    std::vector<ScaleSpec> specs;
    views.reserve(manifest.scales.size());
    for (std::size_t s = 0; s < manifest.scales.size(); ++s) {
        const ManifestScale& ms = manifest.scales[s];
        TokenGrid grid = grid_for_resolution(ms.resolution, manifest.patch_size, ms.scale_id);
        FeatureMatrix features =
            tensor_to_features(read_uhrt(resolve_input(manifest, ms.features_path)));
        if (features.n_tokens != grid.size()) {
            throw DimensionError("scale " + std::to_string(ms.scale_id) + ": features hold " +
                                 std::to_string(features.n_tokens) + " tokens but the grid is " +
                                 std::to_string(grid.rows) + "x" + std::to_string(grid.cols));
        }
        ScaleView view;
        view.grid = grid;
        view.features = std::move(features);
        if (manifest.partition.method == PartitionMethod::ExternalLabels) {
            if (ms.labels_path.empty()) {
                throw ConfigError("scale " + std::to_string(ms.scale_id) +
                                  ": external-label partitioning needs a 'labels' path");
            }
            const Tensor t = read_uhrt(resolve_input(manifest, ms.labels_path));
            if (t.dims.size() != 2) {
                throw IoError("scale " + std::to_string(ms.scale_id) +
                              ": label maps must be 2-D i32 tensors");
            }
            PixelLabelMap map;
            map.height = static_cast<std::size_t>(t.dims[0]);
            map.width = static_cast<std::size_t>(t.dims[1]);
            map.labels = tensor_to_labels(t);
            if (grid.rows == 0 || map.height % grid.rows != 0) {
                throw DimensionError("scale " + std::to_string(ms.scale_id) +
                                     ": label map height does not cover the token grid");
            }
            map.patch_size = map.height / grid.rows;  // pixels per token side
            view.labels = std::move(map);
        }
        views.push_back(std::move(view));

        ScaleSpec spec;
        spec.scale_id = ms.scale_id;
        spec.resolution = ms.resolution;
        spec.grid = views.back().grid;
        spec.budget = 0;
        specs.push_back(std::move(spec));
    }

    std::size_t feature_dim = views.front().features.dim;
    EmbeddingTables tables;
    if (manifest.base_pe_path.empty()) {
        // zero tables need one scale row per configured scale id
        std::size_t max_scale = 1;
        for (const ScaleView& view : views) {
            max_scale = std::max(max_scale, static_cast<std::size_t>(view.grid.scale_id));
        }
        tables = EmbeddingTables::zeros(views.front().grid.rows, views.front().grid.cols,
                                        feature_dim, max_scale);
    } else {
        Tensor pe = read_uhrt(resolve_input(manifest, manifest.base_pe_path));
        Tensor se = read_uhrt(resolve_input(manifest, manifest.scale_embeddings_path));
        tables.base_grid = TokenGrid::regular(manifest.base_rows, manifest.base_cols);
        tables.base_pe = tensor_to_features(pe);
        tables.scale_embeddings = tensor_to_features(se);
        tables.validate();
    }

    if (manifest.budget_policy == BudgetPolicy::Preset) {
        if (manifest.preset_budgets.size() != specs.size()) {
            throw ConfigError("manifest preset budgets list one value per scale");
        }
        for (std::size_t s = 0; s < specs.size(); ++s) {
            specs[s].budget = manifest.preset_budgets[s];
        }
    }
    report.timing_ms.emplace_back("load", ms_since(t0));

    // partition
    t0 = std::chrono::steady_clock::now();
    const std::vector<RegionPartition> partitions =
        partition_scales(views, manifest.partition, manifest.threads);
    std::vector<std::size_t> region_counts;
    region_counts.reserve(partitions.size());
    for (const RegionPartition& p : partitions) {
        region_counts.push_back(p.n_regions);
    }
    report.timing_ms.emplace_back("partition", ms_since(t0));

    const std::vector<std::size_t> budgets =
        allocate_budgets(manifest.global_budget, specs, region_counts, manifest.budget_policy);

    // compress
    t0 = std::chrono::steady_clock::now();
    CompressOptions opts;
    opts.strict_budget = manifest.strict_budget;
    const std::vector<ScaleOutput> outputs = compress_multiscale(
        views, attention, tables, partitions, budgets, opts, manifest.threads);
    report.timing_ms.emplace_back("compress", ms_since(t0));

    // write artifacts (staged, then renamed as a set)
    t0 = std::chrono::steady_clock::now();
    fs::create_directories(out_dir);
    StagedWrites staged;
    for (std::size_t s = 0; s < outputs.size(); ++s) {
        const ScaleOutput& out = outputs[s];
        const std::string stem = std::to_string(out.scale_id);

        const CompressedSequence& seq = out.sequence;
        std::vector<double> flat;
        flat.reserve(seq.tokens.size() * feature_dim);
        for (const TokenRecord& rec : seq.tokens) {
            flat.insert(flat.end(), rec.feature.begin(), rec.feature.end());
        }
        const std::uint64_t dims[2] = {static_cast<std::uint64_t>(seq.tokens.size()),
                                       static_cast<std::uint64_t>(feature_dim)};
        write_uhrt_f64(staged.stage(out_dir / (stem + ".feat.uhrt")), dims, flat);

        const std::string meta = metadata_lines(seq);
        write_text_file(staged.stage(out_dir / (stem + ".meta.txt")), meta);

        std::istringstream meta_in(meta);
        const std::vector<MetaRecord> records = parse_metadata(meta_in);
        const auto mask = mask_from_metadata(records, views[s].grid.rows, views[s].grid.cols);
        write_pgm(staged.stage(out_dir / (stem + ".mask.pgm")), views[s].grid.rows,
                  views[s].grid.cols, mask);

        ScaleReport sr;
        sr.scale_id = out.scale_id;
        sr.n_tokens = views[s].grid.size();
        sr.n_regions = partitions[s].n_regions;
        sr.budget = budgets[s];
        for (const TokenRecord& rec : seq.tokens) {
            if (rec.kind == TokenKind::Kept) {
                ++sr.kept;
            } else {
                ++sr.merged;
            }
        }
        sr.ratio = static_cast<double>(sr.n_tokens) / static_cast<double>(sr.budget);
        report.scales.push_back(sr);

        report.total_tokens += sr.n_tokens;
        report.total_budget += sr.budget;
    }
    report.total_ratio =
        static_cast<double>(report.total_tokens) / static_cast<double>(report.total_budget);
    write_text_file(staged.stage(out_dir / "report.json"), render_report_json(report));
    staged.commit();
    report.timing_ms.emplace_back("write", ms_since(t0));
    report.timing_ms.emplace_back("total", ms_since(t_start));
    return report;
}

int exit_code_for_current_exception() {
    try {
        throw;
    } catch (const BudgetError&) {
        return 4;
    } catch (const IoError&) {
        return 3;
    } catch (const ConfigError&) {
        return 2;
    } catch (const DimensionError&) {
        return 2;
    } catch (const DataError&) {
        return 2;
    } catch (const BoundsError&) {
        return 2;
    } catch (...) {
        return 1;
    }
}

int cmd_compress(const CompressArgs& args, std::ostream& out, std::ostream& err) {
    try {
        Manifest manifest = load_manifest(args.manifest_path);
        if (args.threads > 0) {
            manifest.threads = args.threads;
        }
        if (args.force_strict) {
            manifest.strict_budget = true;
        }
        fs::path out_dir = args.out_dir;
        if (out_dir.empty()) {
            if (manifest.output_dir.empty()) {
                throw ConfigError("no output directory: pass --out or set output_dir");
            }
            out_dir = manifest.base_dir / manifest.output_dir;
        }
        const RunReport report = run_compress(manifest, out_dir);
        out << render_report_text(report);
        return 0;
    } catch (const std::exception& e) {
        err << "compress: " << e.what() << "\n";
        return exit_code_for_current_exception();
    }
}

int cmd_partition(const PartitionArgs& args, std::ostream& out, std::ostream& err) {
    try {
        const FeatureMatrix features = tensor_to_features(read_uhrt(args.features_path));
        const TokenGrid grid = TokenGrid::regular(args.rows, args.cols);
        if (features.n_tokens != grid.size()) {
            throw DimensionError("features hold " + std::to_string(features.n_tokens) +
                                 " tokens but the grid is " + std::to_string(args.rows) + "x" +
                                 std::to_string(args.cols));
        }
        PartitionConfig cfg;
        cfg.method = PartitionMethod::KMeans;
        cfg.k = args.k;
        cfg.seed = args.seed;
        cfg.lambda_f = args.lambda_f;
        cfg.lambda_xy = args.lambda_xy;
        const FeatureMatrix embeddings = build_cluster_embeddings(features, grid, cfg);
        const KMeansResult result = kmeans_partition(embeddings, cfg);

        fs::path out_path = args.out_path;
        if (out_path.empty()) {
            out_path = args.features_path;
            out_path.replace_extension(".labels.uhrt");
        }
        StagedWrites staged;
        const std::uint64_t dims[1] = {static_cast<std::uint64_t>(result.partition.n_tokens)};
        write_uhrt_i32(staged.stage(out_path), dims, result.partition.labels);
        staged.commit();
        out << "regions " << result.partition.n_regions << " tokens "
            << result.partition.n_tokens << " -> " << out_path.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "partition: " << e.what() << "\n";
        return exit_code_for_current_exception();
    }
}

int cmd_mask(const MaskArgs& args, std::ostream& out, std::ostream& err) {
    try {
        const std::vector<MetaRecord> records = parse_metadata_file(args.meta_path);
        const auto mask = mask_from_metadata(records, args.rows, args.cols);
        StagedWrites staged;
        write_pgm(staged.stage(args.out_path), args.rows, args.cols, mask);
        staged.commit();
        std::size_t kept = 0;
        std::size_t merged = 0;
        for (std::uint8_t v : mask) {
            kept += v == 255;
            merged += v == 128;
        }
        out << "mask " << args.rows << "x" << args.cols << " kept " << kept << " merged "
            << merged << " -> " << args.out_path.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "mask: " << e.what() << "\n";
        return exit_code_for_current_exception();
    }
}

}  // namespace uhrbat

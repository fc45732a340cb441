// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "CLI11.hpp"

#include "uhrbat/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"uhrbat: budget-aware visual token compression"};
    app.require_subcommand(1);

    uhrbat::CompressArgs compress_args;
    CLI::App* compress = app.add_subcommand(
        "compress", "Run a manifest: per-scale partition, importance alignment, "
                    "preserve-and-merge, budget truncation");
    compress->add_option("--manifest", compress_args.manifest_path, "Run manifest (JSON)")
        ->required();
    compress->add_option("--out", compress_args.out_dir, "Output directory");
    compress->add_option("--threads", compress_args.threads, "Worker threads (overrides manifest)");
    compress->add_flag("--strict-budget", compress_args.force_strict,
                       "Fail when a per-scale budget is below its region count");

    uhrbat::PartitionArgs partition_args;
    CLI::App* partition =
        app.add_subcommand("partition", "K-means region partition over a feature tensor");
    partition->add_option("--features", partition_args.features_path, "Feature tensor (UHRT, NxD)")
        ->required();
    partition->add_option("--rows", partition_args.rows, "Token grid rows")->required();
    partition->add_option("--cols", partition_args.cols, "Token grid cols")->required();
    partition->add_option("--k", partition_args.k, "Cluster count")->required();
    partition->add_option("--seed", partition_args.seed, "Seeding value")->required();
    partition->add_option("--lambda-f", partition_args.lambda_f, "Feature weight");
    partition->add_option("--lambda-xy", partition_args.lambda_xy, "Coordinate weight");
    partition->add_option("--out", partition_args.out_path,
                          "Label tensor path (default: <features>.labels.uhrt)");

    uhrbat::MaskArgs mask_args;
    CLI::App* mask = app.add_subcommand("mask", "Render a keep/merge/drop graymap from metadata");
    mask->add_option("--meta", mask_args.meta_path, "Metadata sidecar (.meta.txt)")->required();
    mask->add_option("--rows", mask_args.rows, "Token grid rows")->required();
    mask->add_option("--cols", mask_args.cols, "Token grid cols")->required();
    mask->add_option("--out", mask_args.out_path, "Output PGM path")->required();

    CLI11_PARSE(app, argc, argv);

    if (compress->parsed()) {
        return uhrbat::cmd_compress(compress_args, std::cout, std::cerr);
    }
    if (partition->parsed()) {
        return uhrbat::cmd_partition(partition_args, std::cout, std::cerr);
    }
    return uhrbat::cmd_mask(mask_args, std::cout, std::cerr);
}

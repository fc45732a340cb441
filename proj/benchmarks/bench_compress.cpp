// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "uhrbat/importance.hpp"
#include "uhrbat/multiscale.hpp"
#include "uhrbat/partition.hpp"
#include "uhrbat/preserve_merge.hpp"

namespace {

using namespace uhrbat;

std::uint64_t lcg_state = 0x9e3779b97f4a7c15ull;

double next_unit() {
    lcg_state = lcg_state * 6364136223846793005ull + 1442695040888963407ull;
    return static_cast<double>(lcg_state >> 11) * 0x1.0p-53;
}

FeatureMatrix synth_features(std::size_t n, std::size_t d) {
    FeatureMatrix f = FeatureMatrix::zeros(n, d);
    for (double& v : f.data) {
        v = next_unit();
    }
    return f;
}

ScoreVector synth_scores(std::size_t n) {
    ScoreVector s(n);
    for (double& v : s) {
        v = next_unit();
    }
    return s;
}

RegionPartition round_robin_partition(std::size_t n, std::size_t regions) {
    RegionPartition p;
    p.n_tokens = n;
    p.n_regions = regions;
    p.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        p.labels[i] = static_cast<std::int32_t>(i % regions);
    }
    return p;
}

void BM_CompressScale(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const std::size_t d = 64;
    const std::size_t regions = std::min<std::size_t>(600, n);
    const FeatureMatrix features = synth_features(n, d);
    const ScoreVector scores = synth_scores(n);
    const RegionPartition partition = round_robin_partition(n, regions);
    const std::size_t budget = std::max<std::size_t>(regions, n / 32);
    for (auto _ : state) {
        benchmark::DoNotOptimize(compress_scale(features, scores, partition, budget));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(n));
}
BENCHMARK(BM_CompressScale)->Arg(4096)->Arg(16384)->Arg(65536)->Arg(131328);

void BM_SerializeCandidates(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const FeatureMatrix features = synth_features(n, 64);
    const ScoreVector scores = synth_scores(n);
    const RegionPartition partition = round_robin_partition(n, std::min<std::size_t>(128, n));
    for (auto _ : state) {
        benchmark::DoNotOptimize(serialize_candidates(features, scores, partition));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(n));
}
BENCHMARK(BM_SerializeCandidates)->Arg(4096)->Arg(32768);

void BM_AlignImportance(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const TokenGrid anchor = TokenGrid::regular(48, 48);
    const TokenGrid target = TokenGrid::regular(side, side, 2);
    const ScoreVector scores = synth_scores(anchor.size());
    for (auto _ : state) {
        benchmark::DoNotOptimize(align_importance(scores, anchor, target));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(target.size()));
}
BENCHMARK(BM_AlignImportance)->Arg(96)->Arg(192)->Arg(288);

void BM_AggregateAttention(benchmark::State& state) {
    AttentionMap attn;
    attn.n_text = 32;
    attn.n_vision = 9216;
    attn.weights.resize(attn.n_text * attn.n_vision);
    for (double& w : attn.weights) {
        w = next_unit();
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(aggregate_text_attention(attn));
    }
}
BENCHMARK(BM_AggregateAttention);

void BM_KMeansPartition(benchmark::State& state) {
    const FeatureMatrix emb = synth_features(4096, 18);
    PartitionConfig cfg;
    cfg.k = static_cast<std::size_t>(state.range(0));
    cfg.seed = 42;
    cfg.max_iters = 10;
    for (auto _ : state) {
        benchmark::DoNotOptimize(kmeans_partition(emb, cfg));
    }
}
BENCHMARK(BM_KMeansPartition)->Arg(64)->Arg(256);

void BM_InterpolatePositionEmbedding(benchmark::State& state) {
    EmbeddingTables tables = EmbeddingTables::zeros(24, 24, 64, 4);
    for (double& v : tables.base_pe.data) {
        v = next_unit();
    }
    const TokenGrid target = TokenGrid::regular(96, 96, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(interpolate_position_embedding(tables, target));
    }
}
BENCHMARK(BM_InterpolatePositionEmbedding);

}  // namespace

BENCHMARK_MAIN();

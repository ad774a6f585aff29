#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "narex/model.hpp"

namespace narex {

struct BenchmarkRecord {
    std::string mode;  // ar | nar | hard | soft
    int T = 0;
    int repetitions = 0;
    std::int64_t median_ns = 0;
    std::int64_t p95_ns = 0;
    std::uint64_t decoder_flops = 0;  // mean per decode
    real_t mean_exit = 0.0;
    real_t speedup_vs_ar = 0.0;  // ar median / this median; 0 when ar not run
};

struct BenchOptions {
    int repetitions = 30;  // timed decodes per (mode, length); minimum 30
    int warmups = 5;
    real_t delta = 0.5;  // hard-exit threshold
};

// Single-threaded, batch-one decode timing. Sources are encoded once up
// front; each timed repetition covers exactly one decode. Warm-up decodes are
// discarded.
std::vector<BenchmarkRecord> bench_latency(
    const Model& model, std::span<const std::vector<int>> sources,
    std::span<const std::string> modes, std::span<const int> lengths,
    const BenchOptions& opts = {});

std::string format_benchmark_table(std::span<const BenchmarkRecord> records);

}  // namespace narex

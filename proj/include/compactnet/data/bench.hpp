// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "compactnet/nn/pool.hpp"
#include "compactnet/zoo/model.hpp"

namespace compactnet::bench {

struct BenchConfig {
    Index batch = 1;
    int warmup = 2;
    int timed = 7;
    int threads = 1;

    void validate() const;
};

struct LayerTiming {
    std::string layer;
    double seconds = 0.0;
};

struct BenchResult {
    std::string model;
    Index batch = 0;
    double median_seconds = 0.0;
    double samples_per_sec = 0.0;
    std::vector<double> iteration_seconds;
    /// Top-level layers of the median iteration.
    std::vector<LayerTiming> breakdown;
    /// Tape ops of one forward pass, identical across runs of a configuration.
    std::vector<std::string> op_sequence;
};

/// Median wall time (steady clock) of `fn` over `timed` runs after `warmup`.
std::vector<double> time_runs(const std::function<void()>& fn, int warmup, int timed);
double median(std::vector<double> v);

/// Inference-mode forward throughput on a seeded normal input.
BenchResult bench_throughput(const zoo::Model<float>& model, const BenchConfig& cfg, std::uint64_t seed = 0);

struct KernelComparison {
    double standard_seconds = 0.0;
    double compact_seconds = 0.0;
    double speedup() const { return standard_seconds / compact_seconds; }
};

/// Isolated K x K standard convolution against the fused compact convolution
/// of the same C_in -> C_out on an (1, C_in, h, w) input, same padding.
KernelComparison compare_compact_vs_standard(Index c_in, Index c_out, Index h, Index w, Index kernel,
                                             const nn::PoolSpec& pool, int warmup, int timed,
                                             std::uint64_t seed = 0);

struct BenchRow {
    std::string model;
    Index compact_factor = 1;
    std::string pool;
    std::int64_t params = 0;
    double mflops = 0.0;
    double samples_per_sec = 0.0;
};

/// model,C,pool,params,mflops,samples_per_sec
void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows);

} // namespace compactnet::bench

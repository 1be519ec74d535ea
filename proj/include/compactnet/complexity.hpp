// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "compactnet/nn/pool.hpp"
#include "compactnet/zoo/layer_spec.hpp"
#include "compactnet/zoo/model.hpp"

// FLOP accounting: one multiply-add is 2 FLOPs; a comparison or an
// addition inside the channel pool is 1, and so is the division of the
// average variant. Only convolutions and channel pooling enter FLOP totals;
// every tensor (including batch-norm running statistics) enters parameter
// totals.

namespace compactnet::complexity {

using Count = std::int64_t;

/// 2 * C_in * K^2 * H_out * W_out * C_out
Count flops_standard(Index kernel, Index c_in, Index c_out, Index h_out, Index w_out);

/// 2 * K^2 * C * H_out * W_out
Count flops_depthwise(Index kernel, Index channels, Index h_out, Index w_out);

/// ((C - 1) + d) * (C_in / C) * H * W with d = 1 for the average variant
/// (C > 1), i.e. C - 1 reductions plus the optional division per output.
Count flops_channel_pool(Index c_in, Index h, Index w, const nn::PoolSpec& pool);

/// Depthwise + channel pool + 1x1 over C_in / C channels. At C = 2 this is
/// (2K^2 + C_out + m/2) * C_in * H_out * W_out with m = 1 (max, sum) or 2 (avg).
Count flops_compact(Index kernel, Index c_in, Index c_out, Index h_out, Index w_out, const nn::PoolSpec& pool);

/// F'/F at C = 2: 1/C_out + 1/(2K^2) + m/(4K^2 C_out).
double compression_rate(Index kernel, Index c_out, Index m);

Count layer_params(const zoo::LayerSpec& layer);
Count layer_flops(const zoo::LayerSpec& layer);

struct FlopRow {
    std::string layer;
    std::string kind;
    Index kernel = 0;
    Index c_in = 0, c_out = 0;
    Index h_out = 0, w_out = 0;
    Count params = 0;
    Count flops = 0;
    std::optional<double> alpha; // compact units only
};

struct FlopReport {
    std::string model;
    std::vector<FlopRow> rows;
    Count total_params = 0;
    Count total_flops = 0;
    /// Compact FLOPs over the FLOPs of the standard convolutions they replace.
    std::optional<double> aggregate_alpha;
    std::optional<nn::PoolSpec> pool;

    double mflops() const { return static_cast<double>(total_flops) / 1e6; }

    /// layer,kind,K,C_in,C_out,H_out,W_out,params,flops,alpha followed by a
    /// "total" row.
    void write_csv(std::ostream& os) const;
    /// Per-layer table and a Params / Complexity (MFLOPs) summary line.
    std::string table() const;
};

FlopReport analyze(const std::string& model_name, const std::vector<zoo::LayerSpec>& layers);
Count count_params(const std::vector<zoo::LayerSpec>& layers);

template <typename Scalar>
FlopReport analyze(const zoo::Model<Scalar>& model)
{
    return analyze(model.name(), model.enumerate_layers());
}

template <typename Scalar>
Count count_params(const zoo::Model<Scalar>& model)
{
    return count_params(model.enumerate_layers());
}

/// 1234567 -> "1,234,567"
std::string group_thousands(Count v);

} // namespace compactnet::complexity

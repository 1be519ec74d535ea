// SPDX-License-Identifier: Apache-2.0
#include "compactnet/data/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>

#include "compactnet/nn/compact.hpp"
#include "compactnet/prng.hpp"

namespace compactnet::bench {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

} // namespace

void BenchConfig::validate() const
{
    if (batch < 1) throw ArgumentError("bench batch must be >= 1");
    if (warmup < 0) throw ArgumentError("warmup iterations must be >= 0");
    if (timed < 1) throw ArgumentError("timed iterations must be >= 1");
    if (threads != 1) throw ArgumentError("only single-thread benchmarking is supported (threads=1)");
}

double median(std::vector<double> v)
{
    if (v.empty()) throw ArgumentError("median of no samples");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<double> time_runs(const std::function<void()>& fn, int warmup, int timed)
{
    if (warmup < 0 || timed < 1) throw ArgumentError("iteration counts must be warmup >= 0, timed >= 1");
    for (int i = 0; i < warmup; ++i) fn();
    std::vector<double> out;
    out.reserve(timed);
    for (int i = 0; i < timed; ++i) {
        const auto t0 = Clock::now();
        fn();
        out.push_back(seconds_since(t0));
    }
    return out;
}

BenchResult bench_throughput(const zoo::Model<float>& model, const BenchConfig& cfg, std::uint64_t seed)
{
    cfg.validate();
    const auto& in = model.input_shape();
    Prng prng(seed);
    const TensorF x = normal_tensor<float>(prng, Shape{cfg.batch, in.c, in.h, in.w});
    const std::size_t n_layers = model.layers().size();

    BenchResult r;
    r.model = model.name();
    r.batch = cfg.batch;
    std::vector<std::vector<double>> per_layer;
    Clock::time_point layer_t0;
    std::vector<double> current(n_layers, 0.0);
    auto observer = [&](std::size_t i, bool entering) {
        if (entering)
            layer_t0 = Clock::now();
        else
            current[i] = seconds_since(layer_t0);
    };

    auto run = [&](bool record) {
        autograd::Tape<float> tape(autograd::TapeOptions{false, false});
        autograd::NodeId id = tape.constant(x);
        model.forward(tape, id, nn::Mode::infer, observer);
        if (record) {
            r.op_sequence.clear();
            for (auto op : tape.op_sequence()) r.op_sequence.emplace_back(op);
        }
    };

    run(true);
    for (int i = 1; i < cfg.warmup; ++i) run(false);
    for (int i = 0; i < cfg.timed; ++i) {
        const auto t0 = Clock::now();
        run(false);
        r.iteration_seconds.push_back(seconds_since(t0));
        per_layer.push_back(current);
    }
    r.median_seconds = median(r.iteration_seconds);
    r.samples_per_sec = static_cast<double>(cfg.batch) / r.median_seconds;

    // Breakdown of the iteration closest to the median.
    std::size_t pick = 0;
    for (std::size_t i = 1; i < r.iteration_seconds.size(); ++i)
        if (std::abs(r.iteration_seconds[i] - r.median_seconds) <
            std::abs(r.iteration_seconds[pick] - r.median_seconds))
            pick = i;
    for (std::size_t l = 0; l < n_layers; ++l) r.breakdown.push_back({model.layers()[l]->name(), per_layer[pick][l]});
    return r;
}

KernelComparison compare_compact_vs_standard(Index c_in, Index c_out, Index h, Index w, Index kernel,
                                             const nn::PoolSpec& pool, int warmup, int timed, std::uint64_t seed)
{
    using nn::ConvKind;
    using nn::ConvSpec;
    Prng prng(seed);
    const ConvSpec standard{ConvKind::standard, kernel, c_in, c_out, 1, nn::Padding::same, true};
    standard.validate();
    const ConvSpec dw = nn::compact_depthwise_spec(standard, true);
    const ConvSpec pw = nn::compact_pointwise_spec(standard, pool, true);

    const TensorF x = normal_tensor<float>(prng, Shape{1, c_in, h, w});
    const TensorF w_std = he_init<float>(prng, standard.weight_shape(), standard.fan_in());
    const TensorF b_std(Shape{c_out}, 0.01f);
    const TensorF w_dw = he_init<float>(prng, dw.weight_shape(), dw.fan_in());
    const TensorF b_dw(Shape{c_in}, 0.01f);
    const TensorF w_pw = he_init<float>(prng, pw.weight_shape(), pw.fan_in());
    const TensorF b_pw(Shape{c_out}, 0.01f);

    volatile float sink = 0.0f;
    KernelComparison k;
    k.standard_seconds = median(time_runs(
        [&] { sink = nn::conv2d_fwd(x, w_std, &b_std, standard)[0]; }, warmup, timed));
    k.compact_seconds = median(time_runs(
        [&] { sink = nn::compact_conv_fwd(x, w_dw, &b_dw, w_pw, &b_pw, pool, standard).out[0]; }, warmup, timed));
    return k;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows)
{
    os << "model,C,pool,params,mflops,samples_per_sec\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%lld,%s,%lld,%.3f,%.4f\n", r.model.c_str(),
                      static_cast<long long>(r.compact_factor), r.pool.c_str(), static_cast<long long>(r.params),
                      r.mflops, r.samples_per_sec);
        os << buf;
    }
}

} // namespace compactnet::bench

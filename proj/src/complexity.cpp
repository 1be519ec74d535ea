// SPDX-License-Identifier: Apache-2.0
#include "compactnet/complexity.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

namespace compactnet::complexity {

namespace {

void require_positive(std::initializer_list<Index> values, const char* what)
{
    for (Index v : values)
        if (v < 1) throw ArgumentError(std::string(what) + ": all arguments must be >= 1");
}

std::string kind_name(const zoo::LayerSpec& l)
{
    if (l.kind == zoo::LayerKind::conv) return std::string("conv_") + nn::to_string(l.conv_kind);
    return zoo::to_string(l.kind);
}

std::string format_double(double v, const char* fmt)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

} // namespace

Count flops_standard(Index kernel, Index c_in, Index c_out, Index h_out, Index w_out)
{
    require_positive({kernel, c_in, c_out, h_out, w_out}, "flops_standard");
    return 2 * c_in * kernel * kernel * h_out * w_out * c_out;
}

Count flops_depthwise(Index kernel, Index channels, Index h_out, Index w_out)
{
    require_positive({kernel, channels, h_out, w_out}, "flops_depthwise");
    return 2 * kernel * kernel * channels * h_out * w_out;
}

Count flops_channel_pool(Index c_in, Index h, Index w, const nn::PoolSpec& pool)
{
    require_positive({c_in, h, w}, "flops_channel_pool");
    const Index c = pool.compact_factor;
    const Index groups = pool.output_channels(c_in);
    const Index division = pool.variant == nn::PoolVariant::avg && c > 1 ? 1 : 0;
    return ((c - 1) + division) * groups * h * w;
}

Count flops_compact(Index kernel, Index c_in, Index c_out, Index h_out, Index w_out, const nn::PoolSpec& pool)
{
    require_positive({kernel, c_in, c_out, h_out, w_out}, "flops_compact");
    const Index groups = pool.output_channels(c_in);
    return flops_depthwise(kernel, c_in, h_out, w_out) + flops_channel_pool(c_in, h_out, w_out, pool) +
           flops_standard(1, groups, c_out, h_out, w_out);
}

double compression_rate(Index kernel, Index c_out, Index m)
{
    require_positive({kernel, c_out, m}, "compression_rate");
    const double k2 = static_cast<double>(kernel * kernel);
    const double co = static_cast<double>(c_out);
    return 1.0 / co + 1.0 / (2.0 * k2) + static_cast<double>(m) / (4.0 * k2 * co);
}

Count layer_params(const zoo::LayerSpec& l)
{
    using zoo::LayerKind;
    switch (l.kind) {
    case LayerKind::conv: {
        Count w = 0;
        switch (l.conv_kind) {
        case nn::ConvKind::standard: w = l.kernel * l.kernel * l.c_in * l.c_out; break;
        case nn::ConvKind::depthwise: w = l.kernel * l.kernel * l.c_in; break;
        case nn::ConvKind::pointwise: w = l.c_in * l.c_out; break;
        }
        return w + (l.has_bias ? l.c_out : 0);
    }
    case LayerKind::separable:
    case LayerKind::compact: {
        const Index pooled = l.pool ? l.pool->output_channels(l.c_in) : l.c_in;
        Count p = l.kernel * l.kernel * l.c_in;
        if (l.dw_bias) p += l.c_in;
        if (l.dw_bn) p += 4 * l.c_in;
        p += pooled * l.c_out;
        if (l.has_bias) p += l.c_out;
        return p;
    }
    case LayerKind::batchnorm: return 4 * l.c_in;
    case LayerKind::dense: return l.c_in * l.c_out + (l.has_bias ? l.c_out : 0);
    case LayerKind::relu:
    case LayerKind::maxpool:
    case LayerKind::global_avg_pool:
    case LayerKind::add: return 0;
    }
    return 0;
}

Count layer_flops(const zoo::LayerSpec& l)
{
    using zoo::LayerKind;
    switch (l.kind) {
    case LayerKind::conv:
        switch (l.conv_kind) {
        case nn::ConvKind::standard: return flops_standard(l.kernel, l.c_in, l.c_out, l.h_out, l.w_out);
        case nn::ConvKind::depthwise: return flops_depthwise(l.kernel, l.c_in, l.h_out, l.w_out);
        case nn::ConvKind::pointwise: return flops_standard(1, l.c_in, l.c_out, l.h_out, l.w_out);
        }
        return 0;
    case LayerKind::separable:
        return flops_depthwise(l.kernel, l.c_in, l.h_out, l.w_out) +
               flops_standard(1, l.c_in, l.c_out, l.h_out, l.w_out);
    case LayerKind::compact: return flops_compact(l.kernel, l.c_in, l.c_out, l.h_out, l.w_out, *l.pool);
    default: return 0;
    }
}

FlopReport analyze(const std::string& model_name, const std::vector<zoo::LayerSpec>& layers)
{
    FlopReport r;
    r.model = model_name;
    Count compact_flops = 0, replaced_flops = 0;
    for (const auto& l : layers) {
        const Count params = layer_params(l);
        const Count flops = layer_flops(l);
        if (params == 0 && flops == 0) continue;
        FlopRow row{l.name, kind_name(l), l.kernel, l.c_in, l.c_out, l.h_out, l.w_out, params, flops, std::nullopt};
        if (l.kind == zoo::LayerKind::compact) {
            const Count standard = flops_standard(l.kernel, l.c_in, l.c_out, l.h_out, l.w_out);
            row.alpha = static_cast<double>(flops) / static_cast<double>(standard);
            compact_flops += flops;
            replaced_flops += standard;
            r.pool = *l.pool;
        }
        r.total_params += params;
        r.total_flops += flops;
        r.rows.push_back(std::move(row));
    }
    if (replaced_flops > 0)
        r.aggregate_alpha = static_cast<double>(compact_flops) / static_cast<double>(replaced_flops);
    return r;
}

Count count_params(const std::vector<zoo::LayerSpec>& layers)
{
    Count total = 0;
    for (const auto& l : layers) total += layer_params(l);
    return total;
}

std::string group_thousands(Count v)
{
    std::string digits = std::to_string(v < 0 ? -v : v);
    std::string out;
    const int lead = static_cast<int>(digits.size()) % 3;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i && (static_cast<int>(i) - lead) % 3 == 0) out += ',';
        out += digits[i];
    }
    return v < 0 ? "-" + out : out;
}

void FlopReport::write_csv(std::ostream& os) const
{
    os << "layer,kind,K,C_in,C_out,H_out,W_out,params,flops,alpha\n";
    for (const auto& r : rows) {
        os << r.layer << ',' << r.kind << ',' << r.kernel << ',' << r.c_in << ',' << r.c_out << ',' << r.h_out << ','
           << r.w_out << ',' << r.params << ',' << r.flops << ',';
        if (r.alpha) os << format_double(*r.alpha, "%.9g");
        os << '\n';
    }
    os << "total," << model << ",,,,,," << total_params << ',' << total_flops << ',';
    if (aggregate_alpha) os << format_double(*aggregate_alpha, "%.9g");
    os << '\n';
}

std::string FlopReport::table() const
{
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-34s %-16s %3s %6s %6s %11s %12s %16s %9s\n", "layer", "kind", "K", "C_in",
                  "C_out", "H_out x W_out", "params", "flops", "alpha");
    os << line;
    for (const auto& r : rows) {
        const std::string hw = std::to_string(r.h_out) + "x" + std::to_string(r.w_out);
        const std::string alpha = r.alpha ? format_double(*r.alpha, "%.5f") : "";
        std::snprintf(line, sizeof line, "%-34s %-16s %3lld %6lld %6lld %13s %12s %16s %9s\n", r.layer.c_str(),
                      r.kind.c_str(), static_cast<long long>(r.kernel), static_cast<long long>(r.c_in),
                      static_cast<long long>(r.c_out), hw.c_str(), group_thousands(r.params).c_str(),
                      group_thousands(r.flops).c_str(), alpha.c_str());
        os << line;
    }
    os << "\nModel: " << model;
    if (pool) os << " (C=" << pool->compact_factor << ", pool=" << nn::to_string(pool->variant) << ")";
    os << "\nParams: " << group_thousands(total_params) << "\nComplexity (MFLOPs): " << format_double(mflops(), "%.1f")
       << "\n";
    if (aggregate_alpha) os << "Compression rate (compact layers): " << format_double(*aggregate_alpha, "%.5f") << "\n";
    return os.str();
}

} // namespace compactnet::complexity

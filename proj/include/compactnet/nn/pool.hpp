// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "compactnet/tensor.hpp"

namespace compactnet::nn {

enum class PoolVariant { max, sum, avg };

inline const char* to_string(PoolVariant v)
{
    switch (v) {
    case PoolVariant::max: return "max";
    case PoolVariant::sum: return "sum";
    case PoolVariant::avg: return "avg";
    }
    return "?";
}

inline PoolVariant parse_pool_variant(const std::string& s)
{
    if (s == "max") return PoolVariant::max;
    if (s == "sum") return PoolVariant::sum;
    if (s == "avg" || s == "average") return PoolVariant::avg;
    throw ArgumentError("unknown pool variant '" + s + "' (expected max, sum or avg)");
}

/// Point-wise interchannel reduction over groups of `compact_factor`
/// consecutive channels. The normalizer is 1 for max and sum, C for avg.
struct PoolSpec {
    PoolVariant variant = PoolVariant::max;
    Index compact_factor = 1;

    PoolSpec() = default;
    PoolSpec(PoolVariant v, Index c) : variant(v), compact_factor(c)
    {
        if (c < 1) throw ArgumentError("compact factor must be >= 1");
    }

    Index normalizer() const { return variant == PoolVariant::avg ? compact_factor : 1; }

    Index output_channels(Index input_channels) const
    {
        if (input_channels % compact_factor != 0)
            throw ShapeError("input channels " + std::to_string(input_channels) +
                             " not divisible by compact factor " + std::to_string(compact_factor));
        return input_channels / compact_factor;
    }

    bool operator==(const PoolSpec&) const = default;
};

/// Backward bookkeeping. `argmax` holds, per output element, the absolute
/// input channel chosen by the max variant; it is empty for sum and avg.
struct PoolCache {
    PoolSpec spec;
    Shape input_shape;
    std::vector<std::int32_t> argmax;
};

namespace detail {

/// Reduces the C planes starting at `group` into `out`. Ties keep the lowest
/// channel. Summation runs in ascending channel order.
template <typename Scalar>
inline void pool_group(const Scalar* group, Index plane, Index c, PoolVariant variant,
                       Scalar* out, std::int32_t* argmax, std::int32_t first_channel)
{
    if (variant == PoolVariant::max) {
        for (Index i = 0; i < plane; ++i) {
            out[i] = group[i];
            argmax[i] = first_channel;
        }
        for (Index k = 1; k < c; ++k) {
            const Scalar* src = group + k * plane;
            for (Index i = 0; i < plane; ++i) {
                if (src[i] > out[i]) {
                    out[i] = src[i];
                    argmax[i] = first_channel + static_cast<std::int32_t>(k);
                }
            }
        }
        return;
    }
    for (Index i = 0; i < plane; ++i) out[i] = group[i];
    for (Index k = 1; k < c; ++k) {
        const Scalar* src = group + k * plane;
        for (Index i = 0; i < plane; ++i) out[i] += src[i];
    }
    if (variant == PoolVariant::avg && c > 1) {
        const Scalar m = static_cast<Scalar>(c);
        for (Index i = 0; i < plane; ++i) out[i] /= m;
    }
}

} // namespace detail

template <typename Scalar>
std::pair<Tensor<Scalar>, PoolCache> channel_group_pool_fwd(const Tensor<Scalar>& x,
                                                             const PoolSpec& spec)
{
    const Shape& s = x.shape();
    const Index c = spec.compact_factor;
    const Index groups = spec.output_channels(s.c());
    const Index plane = s.h() * s.w();

    Tensor<Scalar> out(Shape{s.n(), groups, s.h(), s.w()});
    PoolCache cache{spec, s, {}};
    if (spec.variant == PoolVariant::max) cache.argmax.resize(static_cast<std::size_t>(out.size()));

    for (Index n = 0; n < s.n(); ++n) {
        for (Index g = 0; g < groups; ++g) {
            std::int32_t* am = spec.variant == PoolVariant::max
                                   ? cache.argmax.data() + (n * groups + g) * plane
                                   : nullptr;
            detail::pool_group(x.plane(n, g * c), plane, c, spec.variant, out.plane(n, g), am,
                               static_cast<std::int32_t>(g * c));
        }
    }
    return {std::move(out), std::move(cache)};
}

template <typename Scalar>
Tensor<Scalar> channel_group_pool_bwd(const Tensor<Scalar>& grad_out, const PoolCache& cache,
                                      const PoolSpec& spec)
{
    if (!(cache.spec == spec)) throw InternalError("channel_group_pool_bwd: cache built for a different spec");
    const Shape& in = cache.input_shape;
    const Index c = spec.compact_factor;
    const Index groups = in.c() / c;
    const Shape expected{in.n(), groups, in.h(), in.w()};
    if (!(grad_out.shape() == expected))
        throw ShapeError("channel_group_pool_bwd: grad shape " + grad_out.shape().str() +
                         " does not match forward output " + expected.str());
    if (spec.variant == PoolVariant::max && cache.argmax.size() != static_cast<std::size_t>(grad_out.size()))
        throw InternalError("channel_group_pool_bwd: argmax cache size mismatch");

    const Index plane = in.h() * in.w();
    Tensor<Scalar> grad_in(in);
    for (Index n = 0; n < in.n(); ++n) {
        for (Index g = 0; g < groups; ++g) {
            const Scalar* go = grad_out.plane(n, g);
            if (spec.variant == PoolVariant::max) {
                const std::int32_t* am = cache.argmax.data() + (n * groups + g) * plane;
                Scalar* base = grad_in.plane(n, 0);
                for (Index i = 0; i < plane; ++i) base[am[i] * plane + i] = go[i];
            } else {
                const Scalar scale = Scalar(1) / static_cast<Scalar>(spec.normalizer());
                for (Index k = 0; k < c; ++k) {
                    Scalar* gi = grad_in.plane(n, g * c + k);
                    if (spec.normalizer() == 1) {
                        for (Index i = 0; i < plane; ++i) gi[i] = go[i];
                    } else {
                        for (Index i = 0; i < plane; ++i) gi[i] = go[i] * scale;
                    }
                }
            }
        }
    }
    return grad_in;
}

} // namespace compactnet::nn

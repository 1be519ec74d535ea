// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "compactnet/nn/conv.hpp"
#include "compactnet/nn/pool.hpp"

namespace compactnet::nn {

// A compact convolution replaces a standard K x K convolution described by
// `conv` (C_in -> C_out) with
//   depthwise K x K (C_in) -> channel-group pool (C_in -> C_in / C) -> 1 x 1 (C_in / C -> C_out).

inline ConvSpec compact_depthwise_spec(const ConvSpec& conv, bool has_bias)
{
    return ConvSpec{ConvKind::depthwise, conv.kernel, conv.c_in, conv.c_in, conv.stride, conv.padding, has_bias};
}

inline ConvSpec compact_pointwise_spec(const ConvSpec& conv, const PoolSpec& pool, bool has_bias)
{
    return ConvSpec{ConvKind::pointwise, 1, pool.output_channels(conv.c_in), conv.c_out, 1, Padding::valid, has_bias};
}

template <typename Scalar>
struct CompactCache {
    Tensor<Scalar> pooled;
    PoolCache pool;
};

template <typename Scalar>
struct CompactResult {
    Tensor<Scalar> out;
    CompactCache<Scalar> cache;
};

/// Depthwise output is produced one channel group at a time and reduced
/// immediately, so the full C_in-channel intermediate is never materialized.
template <typename Scalar>
CompactResult<Scalar> compact_conv_fwd(const Tensor<Scalar>& x, const Tensor<Scalar>& w_dw,
                                       const Tensor<Scalar>* b_dw, const Tensor<Scalar>& w_pw,
                                       const Tensor<Scalar>* b_pw, const PoolSpec& pool, const ConvSpec& conv)
{
    if (x.shape().rank() != 4) throw ShapeError("compact_conv: input must be rank 4");
    if (x.shape().c() != conv.c_in)
        throw ShapeError("compact_conv: input has " + std::to_string(x.shape().c()) + " channels, expected " +
                         std::to_string(conv.c_in));
    const ConvSpec dw = compact_depthwise_spec(conv, b_dw != nullptr);
    const ConvSpec pw = compact_pointwise_spec(conv, pool, b_pw != nullptr);
    detail::check_conv_operands(x, w_dw, b_dw, dw);
    if (!(w_pw.shape() == pw.weight_shape()))
        throw ShapeError("compact_conv: 1x1 weight shape " + w_pw.shape().str() + " does not match pooled width " +
                         pw.weight_shape().str());

    const auto g = detail::conv_geometry(x.shape(), dw);
    const Index c = pool.compact_factor;
    const Index groups = pw.c_in;
    const Index plane = g.ho * g.wo;
    const Index kk = dw.kernel * dw.kernel;

    Tensor<Scalar> pooled(Shape{g.n, groups, g.ho, g.wo});
    PoolCache cache{pool, Shape{g.n, conv.c_in, g.ho, g.wo}, {}};
    if (pool.variant == PoolVariant::max) cache.argmax.resize(static_cast<std::size_t>(pooled.size()));

    std::vector<Scalar> scratch(static_cast<std::size_t>(c * plane));
    for (Index n = 0; n < g.n; ++n) {
        for (Index gi = 0; gi < groups; ++gi) {
            std::fill(scratch.begin(), scratch.end(), Scalar(0));
            for (Index k = 0; k < c; ++k) {
                const Index ch = gi * c + k;
                const Scalar* in_plane = x.plane(n, ch);
                const Scalar* wts = w_dw.data() + ch * kk;
                Scalar* dst = scratch.data() + k * plane;
                for (Index oy = 0; oy < g.ho; ++oy) {
                    Scalar* row = dst + oy * g.wo;
                    detail::conv_row_block<1>(&in_plane, 1, &wts, &row, g, dw.kernel, dw.stride, oy);
                    if (b_dw) {
                        const Scalar bv = (*b_dw)[ch];
                        for (Index ox = 0; ox < g.wo; ++ox) row[ox] += bv;
                    }
                }
            }
            std::int32_t* am = pool.variant == PoolVariant::max
                                   ? cache.argmax.data() + (n * groups + gi) * plane
                                   : nullptr;
            detail::pool_group(scratch.data(), plane, c, pool.variant, pooled.plane(n, gi), am,
                               static_cast<std::int32_t>(gi * c));
        }
    }
    Tensor<Scalar> out = conv2d_fwd(pooled, w_pw, b_pw, pw);
    return {std::move(out), {std::move(pooled), std::move(cache)}};
}

template <typename Scalar>
struct CompactGrads {
    Tensor<Scalar> x;
    Tensor<Scalar> w_dw;
    std::optional<Tensor<Scalar>> b_dw;
    Tensor<Scalar> w_pw;
    std::optional<Tensor<Scalar>> b_pw;
};

template <typename Scalar>
CompactGrads<Scalar> compact_conv_bwd(const Tensor<Scalar>& grad_out, const CompactCache<Scalar>& cache,
                                      const Tensor<Scalar>& x, const Tensor<Scalar>& w_dw, bool dw_bias,
                                      const Tensor<Scalar>& w_pw, bool pw_bias, const PoolSpec& pool,
                                      const ConvSpec& conv)
{
    const ConvSpec dw = compact_depthwise_spec(conv, dw_bias);
    const ConvSpec pw = compact_pointwise_spec(conv, pool, pw_bias);
    auto pw_grads = conv2d_bwd(grad_out, cache.pooled, w_pw, pw);
    Tensor<Scalar> grad_dw_out = channel_group_pool_bwd(pw_grads.x, cache.pool, pool);
    auto dw_grads = conv2d_bwd(grad_dw_out, x, w_dw, dw);
    return {std::move(dw_grads.x), std::move(dw_grads.w), std::move(dw_grads.b), std::move(pw_grads.w),
            std::move(pw_grads.b)};
}

} // namespace compactnet::nn

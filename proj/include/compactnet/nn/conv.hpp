// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "compactnet/tensor.hpp"

namespace compactnet::nn {

enum class ConvKind { standard, depthwise, pointwise };
enum class Padding { same, valid };

inline const char* to_string(ConvKind k)
{
    switch (k) {
    case ConvKind::standard: return "standard";
    case ConvKind::depthwise: return "depthwise";
    case ConvKind::pointwise: return "pointwise";
    }
    return "?";
}

/// Output extent along one spatial axis. "same" yields ceil(in / stride),
/// "valid" uses no padding.
inline Index conv_output_extent(Index in, Index kernel, Index stride, Padding padding)
{
    if (stride < 1) throw ArgumentError("stride must be >= 1");
    if (padding == Padding::same) return (in + stride - 1) / stride;
    if (in < kernel)
        throw ShapeError("valid padding: input extent " + std::to_string(in) + " smaller than kernel " +
                         std::to_string(kernel));
    return (in - kernel) / stride + 1;
}

/// Leading zero padding; the remainder of an odd total goes after.
inline Index conv_pad_before(Index in, Index kernel, Index stride, Padding padding)
{
    if (padding == Padding::valid) return 0;
    const Index out = conv_output_extent(in, kernel, stride, padding);
    const Index total = std::max<Index>((out - 1) * stride + kernel - in, 0);
    return total / 2;
}

/// Square-kernel 2-D convolution. Weight layouts:
///   standard  (C_out, C_in, K, K)
///   depthwise (C_in, 1, K, K), C_out == C_in
///   pointwise (C_out, C_in, 1, 1), K == 1
struct ConvSpec {
    ConvKind kind = ConvKind::standard;
    Index kernel = 3;
    Index c_in = 1;
    Index c_out = 1;
    Index stride = 1;
    Padding padding = Padding::same;
    bool has_bias = true;

    void validate() const
    {
        if (kernel < 1) throw ArgumentError("kernel extent must be >= 1");
        if (stride < 1) throw ArgumentError("stride must be >= 1");
        if (c_in < 1 || c_out < 1) throw ArgumentError("channel counts must be >= 1");
        if (kind == ConvKind::pointwise && kernel != 1) throw ArgumentError("pointwise convolution requires K = 1");
        if (kind == ConvKind::depthwise && c_out != c_in)
            throw ArgumentError("depthwise convolution requires C_out == C_in");
    }

    Shape weight_shape() const
    {
        if (kind == ConvKind::depthwise) return Shape{c_in, 1, kernel, kernel};
        return Shape{c_out, c_in, kernel, kernel};
    }

    Index weight_count() const { return weight_shape().size(); }
    Index fan_in() const { return kind == ConvKind::depthwise ? kernel * kernel : c_in * kernel * kernel; }
};

namespace detail {

struct ConvGeometry {
    Index n, h, w, ho, wo, pad_top, pad_left;
};

inline ConvGeometry conv_geometry(const Shape& x, const ConvSpec& spec)
{
    ConvGeometry g{};
    g.n = x.n();
    g.h = x.h();
    g.w = x.w();
    g.ho = conv_output_extent(g.h, spec.kernel, spec.stride, spec.padding);
    g.wo = conv_output_extent(g.w, spec.kernel, spec.stride, spec.padding);
    g.pad_top = conv_pad_before(g.h, spec.kernel, spec.stride, spec.padding);
    g.pad_left = conv_pad_before(g.w, spec.kernel, spec.stride, spec.padding);
    return g;
}

/// Output columns [lo, hi) whose input column ox*stride + offset is in [0, width).
inline std::pair<Index, Index> valid_columns(Index offset, Index stride, Index width, Index wo)
{
    Index lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
    Index hi = offset > width - 1 ? 0 : std::min<Index>(wo, (width - 1 - offset) / stride + 1);
    return {lo, std::max(lo, hi)};
}

template <typename Scalar>
void check_conv_operands(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>* b,
                         const ConvSpec& spec)
{
    spec.validate();
    if (x.shape().rank() != 4) throw ShapeError("conv2d: input must be rank 4, got " + x.shape().str());
    if (x.shape().c() != spec.c_in)
        throw ShapeError("conv2d: input has " + std::to_string(x.shape().c()) + " channels, spec expects " +
                         std::to_string(spec.c_in));
    if (!(w.shape() == spec.weight_shape()))
        throw ShapeError("conv2d: weight shape " + w.shape().str() + " does not match " +
                         spec.weight_shape().str());
    if (spec.has_bias != (b != nullptr))
        throw ArgumentError(spec.has_bias ? "conv2d: spec has bias but none supplied"
                                          : "conv2d: bias supplied to a bias-free spec");
    if (b && !(b->shape() == Shape{spec.c_out}))
        throw ShapeError("conv2d: bias shape " + b->shape().str() + " expected (" + std::to_string(spec.c_out) + ")");
}

/// Accumulates one output row for `Block` output channels sharing an input
/// channel set. Per output element the update order is ascending input
/// channel, then kernel row, then kernel column, matching a naive loop.
template <int Block, typename Scalar>
void conv_row_block(const Scalar* const* in_planes, Index in_count, const Scalar* const* weights,
                    Scalar* const* acc, const ConvGeometry& g, Index kernel, Index stride, Index oy)
{
    const Index kk = kernel * kernel;
    for (Index ci = 0; ci < in_count; ++ci) {
        for (Index kh = 0; kh < kernel; ++kh) {
            const Index iy = oy * stride + kh - g.pad_top;
            if (iy < 0 || iy >= g.h) continue;
            const Scalar* in_row = in_planes[ci] + iy * g.w;
            for (Index kw = 0; kw < kernel; ++kw) {
                const Index offset = kw - g.pad_left;
                const auto [lo, hi] = valid_columns(offset, stride, g.w, g.wo);
                Scalar wv[Block];
                for (int bi = 0; bi < Block; ++bi) wv[bi] = weights[bi][ci * kk + kh * kernel + kw];
                if (stride == 1) {
                    const Scalar* src = in_row + offset;
                    for (int bi = 0; bi < Block; ++bi) {
                        Scalar* dst = acc[bi];
                        const Scalar wb = wv[bi];
                        for (Index ox = lo; ox < hi; ++ox) dst[ox] += wb * src[ox];
                    }
                } else {
                    for (int bi = 0; bi < Block; ++bi) {
                        Scalar* dst = acc[bi];
                        const Scalar wb = wv[bi];
                        for (Index ox = lo; ox < hi; ++ox) dst[ox] += wb * in_row[ox * stride + offset];
                    }
                }
            }
        }
    }
}

} // namespace detail

/// Direct convolution. The result is bitwise identical to the textbook
/// six-deep loop (zero-initialized accumulator, bias added last, padded taps
/// skipped).
template <typename Scalar>
Tensor<Scalar> conv2d_fwd(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>* b,
                          const ConvSpec& spec)
{
    detail::check_conv_operands(x, w, b, spec);
    const auto g = detail::conv_geometry(x.shape(), spec);
    Tensor<Scalar> out(Shape{g.n, spec.c_out, g.ho, g.wo});
    const Index kk = spec.kernel * spec.kernel;
    const bool depthwise = spec.kind == ConvKind::depthwise;
    const Index in_count = depthwise ? 1 : spec.c_in;
    constexpr int kBlock = 4;

    std::vector<const Scalar*> in_planes(static_cast<std::size_t>(spec.c_in));
    for (Index n = 0; n < g.n; ++n) {
        for (Index ci = 0; ci < spec.c_in; ++ci) in_planes[ci] = x.plane(n, ci);
        const Index step = depthwise ? 1 : kBlock;
        for (Index o = 0; o < spec.c_out; o += step) {
            const Index block = std::min<Index>(step, spec.c_out - o);
            const Scalar* const* planes = depthwise ? &in_planes[o] : in_planes.data();
            for (Index oy = 0; oy < g.ho; ++oy) {
                Scalar* acc[kBlock];
                const Scalar* wts[kBlock];
                for (Index bi = 0; bi < block; ++bi) {
                    acc[bi] = out.plane(n, o + bi) + oy * g.wo;
                    wts[bi] = w.data() + (o + bi) * in_count * kk;
                }
                if (block == kBlock)
                    detail::conv_row_block<kBlock>(planes, in_count, wts, acc, g, spec.kernel, spec.stride, oy);
                else
                    for (Index bi = 0; bi < block; ++bi)
                        detail::conv_row_block<1>(planes, in_count, &wts[bi], &acc[bi], g, spec.kernel,
                                                  spec.stride, oy);
                if (b) {
                    for (Index bi = 0; bi < block; ++bi) {
                        const Scalar bv = (*b)[o + bi];
                        for (Index ox = 0; ox < g.wo; ++ox) acc[bi][ox] += bv;
                    }
                }
            }
        }
    }
    return out;
}

template <typename Scalar>
struct ConvGrads {
    Tensor<Scalar> x;
    Tensor<Scalar> w;
    std::optional<Tensor<Scalar>> b;
};

template <typename Scalar>
ConvGrads<Scalar> conv2d_bwd(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& x, const Tensor<Scalar>& w,
                             const ConvSpec& spec)
{
    using Arr = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
    using Strided = Eigen::Map<Arr, 0, Eigen::InnerStride<>>;
    using CStrided = Eigen::Map<const Arr, 0, Eigen::InnerStride<>>;
    using CMap = Eigen::Map<const Arr>;

    spec.validate();
    const auto g = detail::conv_geometry(x.shape(), spec);
    const Shape expected{g.n, spec.c_out, g.ho, g.wo};
    if (!(grad_out.shape() == expected))
        throw ShapeError("conv2d_bwd: grad shape " + grad_out.shape().str() + " expected " + expected.str());
    if (!(w.shape() == spec.weight_shape())) throw ShapeError("conv2d_bwd: weight shape mismatch");

    ConvGrads<Scalar> grads{Tensor<Scalar>(x.shape()), Tensor<Scalar>(w.shape()), std::nullopt};
    const Index kk = spec.kernel * spec.kernel;
    const Index k = spec.kernel;
    const Index s = spec.stride;
    const bool depthwise = spec.kind == ConvKind::depthwise;
    const Index in_count = depthwise ? 1 : spec.c_in;

    if (spec.has_bias) {
        Tensor<Scalar> gb(Shape{spec.c_out});
        for (Index n = 0; n < g.n; ++n)
            for (Index o = 0; o < spec.c_out; ++o)
                gb[o] += CMap(grad_out.plane(n, o), g.ho * g.wo).sum();
        grads.b = std::move(gb);
    }

    for (Index n = 0; n < g.n; ++n) {
        for (Index o = 0; o < spec.c_out; ++o) {
            const Index ci0 = depthwise ? o : 0;
            Scalar* gw = grads.w.data() + o * in_count * kk;
            const Scalar* wo = w.data() + o * in_count * kk;
            for (Index oy = 0; oy < g.ho; ++oy) {
                const Scalar* g_row = grad_out.plane(n, o) + oy * g.wo;
                for (Index cl = 0; cl < in_count; ++cl) {
                    const Index ci = ci0 + cl;
                    for (Index kh = 0; kh < k; ++kh) {
                        const Index iy = oy * s + kh - g.pad_top;
                        if (iy < 0 || iy >= g.h) continue;
                        const Scalar* in_row = x.plane(n, ci) + iy * g.w;
                        Scalar* gx_row = grads.x.plane(n, ci) + iy * g.w;
                        for (Index kw = 0; kw < k; ++kw) {
                            const Index offset = kw - g.pad_left;
                            const auto [lo, hi] = detail::valid_columns(offset, s, g.w, g.wo);
                            const Index len = hi - lo;
                            if (len <= 0) continue;
                            const Index widx = cl * kk + kh * k + kw;
                            CMap go(g_row + lo, len);
                            if (s == 1) {
                                CMap xin(in_row + lo + offset, len);
                                Eigen::Map<Arr> gx(gx_row + lo + offset, len);
                                gw[widx] += (go * xin).sum();
                                gx += wo[widx] * go;
                            } else {
                                CStrided xin(in_row + lo * s + offset, len, Eigen::InnerStride<>(s));
                                Strided gx(gx_row + lo * s + offset, len, Eigen::InnerStride<>(s));
                                gw[widx] += (go * xin).sum();
                                gx += wo[widx] * go;
                            }
                        }
                    }
                }
            }
        }
    }
    return grads;
}

} // namespace compactnet::nn

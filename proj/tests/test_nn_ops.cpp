// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "compactnet/nn/batchnorm.hpp"
#include "compactnet/nn/compact.hpp"
#include "compactnet/nn/conv.hpp"
#include "compactnet/nn/layers.hpp"
#include "compactnet/nn/pool.hpp"
#include "compactnet/prng.hpp"
#include "oracles.hpp"

using namespace compactnet;
using namespace compactnet::nn;

namespace {

const TensorF* const no_bias = nullptr;

TensorF pair_input(float a, float b) { return TensorF(Shape{1, 2, 1, 1}, {a, b}); }

/// Float direct convolution with the documented accumulation order
/// (input channel, kernel row, kernel column, bias last).
TensorF loop_conv(const TensorF& x, const TensorF& w, const TensorF* b, const ConvSpec& s)
{
    const Index h = x.shape().h(), wd = x.shape().w();
    const Index ho = s.padding == Padding::same ? (h + s.stride - 1) / s.stride : (h - s.kernel) / s.stride + 1;
    const Index wo = s.padding == Padding::same ? (wd + s.stride - 1) / s.stride : (wd - s.kernel) / s.stride + 1;
    auto pad = [&](Index in, Index out) {
        const Index t = (out - 1) * s.stride + s.kernel - in;
        return s.padding == Padding::same && t > 0 ? t / 2 : Index(0);
    };
    const Index pt = pad(h, ho), pl = pad(wd, wo);
    TensorF y(Shape{x.shape().n(), s.c_out, ho, wo});
    for (Index n = 0; n < x.shape().n(); ++n)
        for (Index o = 0; o < s.c_out; ++o)
            for (Index i = 0; i < ho; ++i)
                for (Index j = 0; j < wo; ++j) {
                    float acc = 0.0f;
                    for (Index ci = 0; ci < s.c_in; ++ci) {
                        if (s.kind == ConvKind::depthwise && ci != o) continue;
                        for (Index a = 0; a < s.kernel; ++a)
                            for (Index q = 0; q < s.kernel; ++q) {
                                const Index yy = i * s.stride + a - pt, xx = j * s.stride + q - pl;
                                if (yy < 0 || yy >= h || xx < 0 || xx >= wd) continue;
                                const Index widx = s.kind == ConvKind::depthwise
                                                       ? (o * s.kernel + a) * s.kernel + q
                                                       : ((o * s.c_in + ci) * s.kernel + a) * s.kernel + q;
                                acc += x(n, ci, yy, xx) * w[widx];
                            }
                    }
                    if (b) acc += (*b)[o];
                    y(n, o, i, j) = acc;
                }
    return y;
}

} // namespace

// --- channel-group pooling ----------------------------------------------------

TEST(ChannelPool, ForwardExamples)
{
    EXPECT_FLOAT_EQ(channel_group_pool_fwd(pair_input(0.3f, 0.7f), PoolSpec(PoolVariant::max, 2)).first[0], 0.7f);
    EXPECT_FLOAT_EQ(channel_group_pool_fwd(pair_input(0.3f, 0.7f), PoolSpec(PoolVariant::sum, 2)).first[0], 1.0f);
    EXPECT_FLOAT_EQ(channel_group_pool_fwd(pair_input(0.3f, 0.7f), PoolSpec(PoolVariant::avg, 2)).first[0], 0.5f);
}

TEST(ChannelPool, NormalizerPerVariant)
{
    EXPECT_EQ(PoolSpec(PoolVariant::max, 4).normalizer(), 1);
    EXPECT_EQ(PoolSpec(PoolVariant::sum, 4).normalizer(), 1);
    EXPECT_EQ(PoolSpec(PoolVariant::avg, 4).normalizer(), 4);
    EXPECT_THROW(PoolSpec(PoolVariant::max, 0), ArgumentError);
}

TEST(ChannelPool, IdentityAtC1)
{
    Prng p(1);
    const TensorF x = normal_tensor<float>(p, Shape{2, 5, 3, 3});
    for (auto v : {PoolVariant::max, PoolVariant::sum, PoolVariant::avg})
        EXPECT_TRUE(channel_group_pool_fwd(x, PoolSpec(v, 1)).first.bitwise_equal(x));
}

TEST(ChannelPool, ShapeLaw)
{
    const TensorF x(Shape{1, 64, 32, 32});
    EXPECT_EQ(channel_group_pool_fwd(x, PoolSpec(PoolVariant::max, 4)).first.shape(), (Shape{1, 16, 32, 32}));
    EXPECT_THROW(channel_group_pool_fwd(TensorF(Shape{1, 5, 2, 2}), PoolSpec(PoolVariant::max, 2)), ShapeError);
}

TEST(ChannelPool, BackwardExamples)
{
    const float g = 0.25f;
    const TensorF up(Shape{1, 1, 1, 1}, {g});
    {
        auto [y, cache] = channel_group_pool_fwd(pair_input(0.3f, 0.7f), PoolSpec(PoolVariant::max, 2));
        const TensorF gi = channel_group_pool_bwd(up, cache, PoolSpec(PoolVariant::max, 2));
        EXPECT_EQ(gi[0], 0.0f);
        EXPECT_EQ(gi[1], g);
    }
    {
        auto [y, cache] = channel_group_pool_fwd(pair_input(0.3f, 0.7f), PoolSpec(PoolVariant::sum, 2));
        const TensorF gi = channel_group_pool_bwd(up, cache, PoolSpec(PoolVariant::sum, 2));
        EXPECT_EQ(gi[0], g);
        EXPECT_EQ(gi[1], g);
    }
    {
        auto [y, cache] = channel_group_pool_fwd(pair_input(0.3f, 0.7f), PoolSpec(PoolVariant::avg, 2));
        const TensorF gi = channel_group_pool_bwd(up, cache, PoolSpec(PoolVariant::avg, 2));
        EXPECT_EQ(gi[0], g / 2);
        EXPECT_EQ(gi[1], g / 2);
    }
}

TEST(ChannelPool, TieGoesToLowestChannel)
{
    auto [y, cache] = channel_group_pool_fwd(pair_input(0.5f, 0.5f), PoolSpec(PoolVariant::max, 2));
    EXPECT_EQ(cache.argmax[0], 0);
}

TEST(ChannelPool, SpecMismatchIsInternalError)
{
    auto [y, cache] = channel_group_pool_fwd(pair_input(0.3f, 0.7f), PoolSpec(PoolVariant::max, 2));
    EXPECT_THROW(channel_group_pool_bwd(y, cache, PoolSpec(PoolVariant::sum, 2)), InternalError);
    EXPECT_THROW(channel_group_pool_bwd(TensorF(Shape{1, 2, 1, 1}), cache, PoolSpec(PoolVariant::max, 2)),
                 ShapeError);
}

class PoolProperties : public ::testing::TestWithParam<std::tuple<PoolVariant, Index>> {};

TEST_P(PoolProperties, GradientGroupSums)
{
    const auto [variant, c] = GetParam();
    Prng p(static_cast<std::uint64_t>(c) * 7 + static_cast<std::uint64_t>(variant));
    const PoolSpec spec(variant, c);
    const TensorD x = normal_tensor<double>(p, Shape{2, 4 * c, 3, 3});
    auto [y, cache] = channel_group_pool_fwd(x, spec);
    const TensorD up = normal_tensor<double>(p, y.shape());
    const TensorD gi = channel_group_pool_bwd(up, cache, spec);
    for (Index n = 0; n < 2; ++n)
        for (Index g = 0; g < 4; ++g)
            for (Index i = 0; i < 3; ++i)
                for (Index j = 0; j < 3; ++j) {
                    double sum = 0;
                    int nonzero = 0;
                    for (Index k = 0; k < c; ++k) {
                        const double v = gi(n, g * c + k, i, j);
                        sum += v;
                        nonzero += v != 0.0;
                        if (variant != PoolVariant::max) {
                            EXPECT_EQ(v, up(n, g, i, j) / static_cast<double>(spec.normalizer()));
                        }
                    }
                    const double u = up(n, g, i, j);
                    if (variant == PoolVariant::max) {
                        EXPECT_EQ(sum, u);
                        EXPECT_LE(nonzero, 1);
                        const auto am = cache.argmax[((n * 4 + g) * 3 + i) * 3 + j];
                        EXPECT_GE(am, g * c);
                        EXPECT_LE(am, (g + 1) * c - 1);
                    } else if (variant == PoolVariant::avg) {
                        EXPECT_NEAR(sum, u, 1e-15);
                    } else {
                        EXPECT_NEAR(sum, static_cast<double>(c) * u, 1e-14);
                    }
                }
}

TEST_P(PoolProperties, PermutationWithinGroupInvariant)
{
    const auto [variant, c] = GetParam();
    Prng p(99);
    // Small integers keep every sum exact, so the comparison is bitwise.
    TensorF x(Shape{1, 3 * c, 2, 2});
    for (Index i = 0; i < x.size(); ++i) x[i] = static_cast<float>(static_cast<int>(p.below(17)) - 8);
    TensorF permuted = x;
    for (Index g = 0; g < 3; ++g)
        for (Index k = 0; k < c; ++k)
            for (Index i = 0; i < 4; ++i) permuted.plane(0, g * c + k)[i] = x.plane(0, g * c + (c - 1 - k))[i];
    const PoolSpec spec(variant, c);
    EXPECT_TRUE(channel_group_pool_fwd(x, spec).first.bitwise_equal(channel_group_pool_fwd(permuted, spec).first));
}

INSTANTIATE_TEST_SUITE_P(AllVariants, PoolProperties,
                         ::testing::Combine(::testing::Values(PoolVariant::max, PoolVariant::sum, PoolVariant::avg),
                                            ::testing::Values(Index(1), Index(2), Index(4), Index(8))));

TEST(ChannelPool, AvgIsSumOverCBitwise)
{
    Prng p(5);
    for (Index c : {1, 2, 4, 8})
        for (int d = 0; d < 20; ++d) {
            const TensorF x = normal_tensor<float>(p, Shape{2, 2 * c, 4, 3});
            const TensorF a = channel_group_pool_fwd(x, PoolSpec(PoolVariant::avg, c)).first;
            TensorF s = channel_group_pool_fwd(x, PoolSpec(PoolVariant::sum, c)).first;
            for (Index i = 0; i < s.size(); ++i) s[i] = s[i] / static_cast<float>(c);
            EXPECT_TRUE(a.bitwise_equal(s)) << "C=" << c;
        }
}

TEST(ChannelPool, MaxDominatesGroup)
{
    Prng p(6);
    for (Index c : {1, 2, 4, 8}) {
        const TensorF x = normal_tensor<float>(p, Shape{2, 3 * c, 4, 4});
        const TensorF y = channel_group_pool_fwd(x, PoolSpec(PoolVariant::max, c)).first;
        for (Index n = 0; n < 2; ++n)
            for (Index g = 0; g < 3; ++g)
                for (Index k = 0; k < c; ++k)
                    for (Index i = 0; i < 16; ++i) EXPECT_GE(y.plane(n, g)[i], x.plane(n, g * c + k)[i]);
    }
}

// --- convolution ------------------------------------------------------------

TEST(Conv, PointwiseScalarMultiply)
{
    const ConvSpec s{ConvKind::pointwise, 1, 1, 1, 1, Padding::same, false};
    const TensorF x(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
    const TensorF w(Shape{1, 1, 1, 1}, {2.0f});
    EXPECT_TRUE(conv2d_fwd(x, w, no_bias, s).bitwise_equal(TensorF(Shape{1, 1, 2, 2}, {2, 4, 6, 8})));
}

TEST(Conv, IdentityKernelSamePadding)
{
    Prng p(3);
    const ConvSpec s{ConvKind::standard, 3, 2, 2, 1, Padding::same, true};
    const TensorF x = normal_tensor<float>(p, Shape{1, 2, 5, 4});
    TensorF w(s.weight_shape());
    w[((0 * 2 + 0) * 3 + 1) * 3 + 1] = 1.0f;
    w[((1 * 2 + 1) * 3 + 1) * 3 + 1] = 1.0f;
    const TensorF b(Shape{2});
    EXPECT_TRUE(conv2d_fwd(x, w, &b, s).bitwise_equal(x));
}

TEST(Conv, SamePaddingExtents)
{
    EXPECT_EQ(conv_output_extent(128, 3, 1, Padding::same), 128);
    EXPECT_EQ(conv_output_extent(7, 3, 2, Padding::same), 4);
    EXPECT_EQ(conv_output_extent(7, 3, 2, Padding::valid), 3);
    EXPECT_EQ(conv_pad_before(7, 3, 2, Padding::same), 1);
    EXPECT_EQ(conv_pad_before(8, 3, 2, Padding::same), 0);
}

TEST(Conv, RandomMatchesLoopOracleBitwise)
{
    Prng p(4);
    const ConvSpec s{ConvKind::standard, 3, 3, 5, 1, Padding::same, true};
    const TensorF x = uniform_tensor<float>(p, Shape{1, 3, 4, 4});
    const TensorF w = uniform_tensor<float>(p, s.weight_shape());
    const TensorF b = uniform_tensor<float>(p, Shape{5});
    EXPECT_TRUE(conv2d_fwd(x, w, &b, s).bitwise_equal(loop_conv(x, w, &b, s)));
}

TEST(Conv, RandomDrawsMatchLoopOracleBitwise)
{
    Prng p(12);
    for (int d = 0; d < 60; ++d) {
        ConvSpec s;
        s.kind = static_cast<ConvKind>(p.below(3));
        s.kernel = s.kind == ConvKind::pointwise ? 1 : 3 + 2 * static_cast<Index>(p.below(2));
        s.c_in = 1 + static_cast<Index>(p.below(7));
        s.c_out = s.kind == ConvKind::depthwise ? s.c_in : 1 + static_cast<Index>(p.below(9));
        s.stride = 1 + static_cast<Index>(p.below(3));
        s.padding = p.below(2) ? Padding::same : Padding::valid;
        s.has_bias = p.below(2) == 1;
        const Index lo = s.padding == Padding::valid ? s.kernel : 1;
        const Shape xs{1 + static_cast<Index>(p.below(2)), s.c_in, lo + static_cast<Index>(p.below(11)),
                       lo + static_cast<Index>(p.below(11))};
        const TensorF x = uniform_tensor<float>(p, xs);
        const TensorF w = uniform_tensor<float>(p, s.weight_shape());
        const TensorF b = uniform_tensor<float>(p, Shape{s.c_out});
        const TensorF* bp = s.has_bias ? &b : nullptr;
        ASSERT_TRUE(conv2d_fwd(x, w, bp, s).bitwise_equal(loop_conv(x, w, bp, s))) << "draw " << d;
    }
}

TEST(Conv, DoubleOracleAgreesWithinRounding)
{
    Prng p(8);
    const ConvSpec s{ConvKind::standard, 5, 4, 3, 2, Padding::same, true};
    const TensorD x = normal_tensor<double>(p, Shape{2, 4, 9, 7});
    const TensorD w = normal_tensor<double>(p, s.weight_shape());
    const TensorD b = normal_tensor<double>(p, Shape{3});
    Index ho = 0, wo = 0;
    const auto bv = oracle::to_vec(b);
    const auto ref = oracle::conv(oracle::to_vec(x), 2, 4, 9, 7, oracle::to_vec(w), 3, 5, 2, true, false, &bv, ho, wo);
    const TensorD y = conv2d_fwd(x, w, &b, s);
    EXPECT_EQ(y.shape(), (Shape{2, 3, ho, wo}));
    EXPECT_LT(oracle::max_abs_diff(oracle::to_vec(y), ref), 1e-12);
}

TEST(Conv, BackwardMatchesLinearDifferences)
{
    // Convolution is linear in x and in w, so symmetric differences of
    // <g, conv(.)> recover each gradient entry up to rounding.
    Prng p(10);
    for (ConvKind kind : {ConvKind::standard, ConvKind::depthwise, ConvKind::pointwise}) {
        const Index k = kind == ConvKind::pointwise ? 1 : 3;
        const ConvSpec s{kind, k, 3, kind == ConvKind::depthwise ? 3 : 2, 2, Padding::same, true};
        const TensorD x = normal_tensor<double>(p, Shape{2, 3, 5, 6});
        const TensorD w = normal_tensor<double>(p, s.weight_shape());
        const TensorD b = normal_tensor<double>(p, Shape{s.c_out});
        const TensorD y = conv2d_fwd(x, w, &b, s);
        const TensorD g = normal_tensor<double>(p, y.shape());
        const auto grads = conv2d_bwd(g, x, w, s);
        auto objective = [&](const TensorD& xx, const TensorD& ww, const TensorD& bb) {
            return (conv2d_fwd(xx, ww, &bb, s).array() * g.array()).sum();
        };
        for (Index i = 0; i < x.size(); ++i) {
            TensorD xp = x, xm = x;
            xp[i] += 1.0;
            xm[i] -= 1.0;
            EXPECT_NEAR(grads.x[i], (objective(xp, w, b) - objective(xm, w, b)) / 2.0, 1e-10);
        }
        for (Index i = 0; i < w.size(); ++i) {
            TensorD wp = w, wm = w;
            wp[i] += 1.0;
            wm[i] -= 1.0;
            EXPECT_NEAR(grads.w[i], (objective(x, wp, b) - objective(x, wm, b)) / 2.0, 1e-10);
        }
        ASSERT_TRUE(grads.b.has_value());
        for (Index o = 0; o < s.c_out; ++o) {
            double sum = 0;
            for (Index n = 0; n < y.shape().n(); ++n)
                for (Index i = 0; i < y.shape().h() * y.shape().w(); ++i) sum += g.plane(n, o)[i];
            EXPECT_NEAR((*grads.b)[o], sum, 1e-12);
        }
    }
}

TEST(Conv, Errors)
{
    ConvSpec s{ConvKind::standard, 3, 2, 2, 0, Padding::same, false};
    EXPECT_THROW(s.validate(), ArgumentError);
    s.stride = 1;
    EXPECT_THROW(conv2d_fwd(TensorF(Shape{1, 3, 4, 4}), TensorF(s.weight_shape()), no_bias, s), ShapeError);
    const ConvSpec pw{ConvKind::pointwise, 3, 2, 2, 1, Padding::same, false};
    EXPECT_THROW(pw.validate(), ArgumentError);
    const ConvSpec dw{ConvKind::depthwise, 3, 2, 3, 1, Padding::same, false};
    EXPECT_THROW(dw.validate(), ArgumentError);
}

TEST(Conv, WeightLayouts)
{
    EXPECT_EQ((ConvSpec{ConvKind::standard, 3, 4, 8, 1, Padding::same, true}.weight_shape()), (Shape{8, 4, 3, 3}));
    EXPECT_EQ((ConvSpec{ConvKind::depthwise, 3, 4, 4, 1, Padding::same, true}.weight_shape()), (Shape{4, 1, 3, 3}));
    EXPECT_EQ((ConvSpec{ConvKind::pointwise, 1, 4, 8, 1, Padding::same, true}.weight_shape()), (Shape{8, 4, 1, 1}));
}

// --- compact convolution ------------------------------------------------------

TEST(Compact, IdentityCompositionAtC1)
{
    Prng p(2);
    const ConvSpec conv{ConvKind::standard, 3, 4, 4, 1, Padding::same, false};
    const TensorF x = normal_tensor<float>(p, Shape{1, 4, 5, 5});
    TensorF w_dw(Shape{4, 1, 3, 3});
    for (Index c = 0; c < 4; ++c) w_dw[c * 9 + 4] = 1.0f;
    TensorF w_pw(Shape{4, 4, 1, 1});
    for (Index c = 0; c < 4; ++c) w_pw[c * 4 + c] = 1.0f;
    const TensorF zb(Shape{4});
    for (auto v : {PoolVariant::max, PoolVariant::sum, PoolVariant::avg}) {
        const auto r = compact_conv_fwd(x, w_dw, &zb, w_pw, &zb, PoolSpec(v, 1), conv);
        EXPECT_TRUE(r.out.bitwise_equal(x));
    }
}

TEST(Compact, FusedEqualsCompositionAllVariants)
{
    Prng p(21);
    for (auto v : {PoolVariant::max, PoolVariant::sum, PoolVariant::avg}) {
        const ConvSpec conv{ConvKind::standard, 3, 8, 6, 1, Padding::same, false};
        const PoolSpec pool(v, 2);
        const TensorF x = normal_tensor<float>(p, Shape{2, 8, 5, 5});
        const TensorF w_dw = normal_tensor<float>(p, Shape{8, 1, 3, 3});
        const TensorF b_dw = normal_tensor<float>(p, Shape{8});
        const TensorF w_pw = normal_tensor<float>(p, Shape{6, 4, 1, 1});
        const TensorF b_pw = normal_tensor<float>(p, Shape{6});
        const auto fused = compact_conv_fwd(x, w_dw, &b_dw, w_pw, &b_pw, pool, conv);
        const TensorF d = conv2d_fwd(x, w_dw, &b_dw, compact_depthwise_spec(conv, true));
        const TensorF q = channel_group_pool_fwd(d, pool).first;
        const TensorF y = conv2d_fwd(q, w_pw, &b_pw, compact_pointwise_spec(conv, pool, true));
        EXPECT_TRUE(fused.out.bitwise_equal(y)) << to_string(v);
    }
}

TEST(Compact, BackwardChainsThreeStages)
{
    Prng p(22);
    for (auto v : {PoolVariant::max, PoolVariant::sum, PoolVariant::avg}) {
        const ConvSpec conv{ConvKind::standard, 3, 8, 5, 2, Padding::same, false};
        const PoolSpec pool(v, 4);
        const ConvSpec dw = compact_depthwise_spec(conv, true);
        const ConvSpec pw = compact_pointwise_spec(conv, pool, true);
        const TensorD x = normal_tensor<double>(p, Shape{2, 8, 6, 6});
        const TensorD w_dw = normal_tensor<double>(p, dw.weight_shape());
        const TensorD b_dw = normal_tensor<double>(p, Shape{8});
        const TensorD w_pw = normal_tensor<double>(p, pw.weight_shape());
        const TensorD b_pw = normal_tensor<double>(p, Shape{5});
        const auto fused = compact_conv_fwd(x, w_dw, &b_dw, w_pw, &b_pw, pool, conv);
        const TensorD g = normal_tensor<double>(p, fused.out.shape());
        const auto cg = compact_conv_bwd(g, fused.cache, x, w_dw, true, w_pw, true, pool, conv);

        const TensorD d = conv2d_fwd(x, w_dw, &b_dw, dw);
        auto [q, pc] = channel_group_pool_fwd(d, pool);
        const auto g3 = conv2d_bwd(g, q, w_pw, pw);
        const TensorD g2 = channel_group_pool_bwd(g3.x, pc, pool);
        const auto g1 = conv2d_bwd(g2, x, w_dw, dw);
        EXPECT_LT(oracle::max_abs_diff(oracle::to_vec(cg.x), oracle::to_vec(g1.x)), 1e-12);
        EXPECT_LT(oracle::max_abs_diff(oracle::to_vec(cg.w_dw), oracle::to_vec(g1.w)), 1e-12);
        EXPECT_LT(oracle::max_abs_diff(oracle::to_vec(*cg.b_dw), oracle::to_vec(*g1.b)), 1e-12);
        EXPECT_LT(oracle::max_abs_diff(oracle::to_vec(cg.w_pw), oracle::to_vec(g3.w)), 1e-12);
        EXPECT_LT(oracle::max_abs_diff(oracle::to_vec(*cg.b_pw), oracle::to_vec(*g3.b)), 1e-12);
    }
}

TEST(Compact, DivisibilityAndWidthErrors)
{
    const ConvSpec conv{ConvKind::standard, 3, 6, 4, 1, Padding::same, false};
    const PoolSpec pool(PoolVariant::max, 4);
    EXPECT_THROW(compact_conv_fwd(TensorF(Shape{1, 6, 3, 3}), TensorF(Shape{6, 1, 3, 3}), no_bias,
                                  TensorF(Shape{4, 1, 1, 1}), no_bias, pool, conv),
                 ShapeError);
    const ConvSpec conv8{ConvKind::standard, 3, 8, 4, 1, Padding::same, false};
    EXPECT_THROW(compact_conv_fwd(TensorF(Shape{1, 8, 3, 3}), TensorF(Shape{8, 1, 3, 3}), no_bias,
                                  TensorF(Shape{4, 4, 1, 1}), no_bias, pool, conv8),
                 ShapeError);
}

// --- batch norm ---------------------------------------------------------------

TEST(BatchNorm, ConstantInputGivesZeros)
{
    const TensorF x(Shape{4, 2, 3, 3}, 2.5f);
    TensorF rm(Shape{2}), rv(Shape{2}, 1.0f);
    const TensorF y = batchnorm_fwd(x, TensorF(Shape{2}, 1.0f), TensorF(Shape{2}), rm, rv, Mode::train, {});
    EXPECT_EQ(y.array().abs().maxCoeff(), 0.0f);
}

TEST(BatchNorm, TrainModeNormalizes)
{
    Prng p(3);
    TensorD x = normal_tensor<double>(p, Shape{8, 3, 4, 4});
    x.array() = x.array() * 3.0 + 1.5;
    TensorD rm(Shape{3}), rv(Shape{3}, 1.0);
    const TensorD y = batchnorm_fwd(x, TensorD(Shape{3}, 1.0), TensorD(Shape{3}), rm, rv, Mode::train, {});
    for (Index c = 0; c < 3; ++c) {
        double s = 0, sq = 0;
        for (Index n = 0; n < 8; ++n)
            for (Index i = 0; i < 16; ++i) s += y.plane(n, c)[i];
        const double mean = s / 128;
        for (Index n = 0; n < 8; ++n)
            for (Index i = 0; i < 16; ++i) sq += std::pow(y.plane(n, c)[i] - mean, 2);
        EXPECT_LT(std::abs(mean), 1e-6);
        EXPECT_NEAR(sq / 128, 1.0, 1e-4);
    }
}

TEST(BatchNorm, RunningStatsMomentum)
{
    TensorF x(Shape{2, 1, 1, 2}, {1, 3, 5, 7});
    TensorF rm(Shape{1}), rv(Shape{1}, 1.0f);
    batchnorm_fwd(x, TensorF(Shape{1}, 1.0f), TensorF(Shape{1}), rm, rv, Mode::train, {});
    EXPECT_FLOAT_EQ(rm[0], 0.1f * 4.0f);
    EXPECT_FLOAT_EQ(rv[0], 0.9f + 0.1f * 5.0f); // biased variance of {1,3,5,7}
}

TEST(BatchNorm, InferIdentity)
{
    Prng p(4);
    const TensorF x = normal_tensor<float>(p, Shape{2, 3, 2, 2});
    TensorF rm(Shape{3}), rv(Shape{3}, 1.0f);
    const TensorF y = batchnorm_fwd(x, TensorF(Shape{3}, 1.0f), TensorF(Shape{3}), rm, rv, Mode::infer, {});
    for (Index i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-5 * std::abs(x[i]) + 1e-7);
    EXPECT_EQ(rm[0], 0.0f);
}

TEST(BatchNorm, Errors)
{
    TensorF rm(Shape{2}), rv(Shape{2}, 1.0f);
    EXPECT_THROW(batchnorm_fwd(TensorF(Shape{1, 2, 2, 2}), TensorF(Shape{2}), TensorF(Shape{2}), rm, rv, Mode::train,
                               BatchNormOptions{0.0, 0.9}),
                 ArgumentError);
    EXPECT_THROW(batchnorm_fwd(TensorF(Shape{1, 3, 2, 2}), TensorF(Shape{2}), TensorF(Shape{2}), rm, rv, Mode::train,
                               {}),
                 ShapeError);
}

// --- other layers -------------------------------------------------------------

TEST(Relu, Example)
{
    const TensorF x(Shape{2}, {-1.0f, 2.0f});
    EXPECT_TRUE(relu_fwd(x).bitwise_equal(TensorF(Shape{2}, {0.0f, 2.0f})));
    EXPECT_TRUE(relu_bwd(TensorF(Shape{2}, {5.0f, 7.0f}), x).bitwise_equal(TensorF(Shape{2}, {0.0f, 7.0f})));
}

TEST(MaxPool2d, TwoByTwo)
{
    const TensorF x(Shape{1, 1, 2, 4}, {1, 5, 2, 0, 3, 4, 8, 6});
    auto [y, cache] = maxpool2d_fwd(x, MaxPoolSpec{});
    EXPECT_TRUE(y.bitwise_equal(TensorF(Shape{1, 1, 1, 2}, {5, 8})));
    const TensorF g = maxpool2d_bwd(TensorF(Shape{1, 1, 1, 2}, {1, 2}), cache);
    EXPECT_TRUE(g.bitwise_equal(TensorF(Shape{1, 1, 2, 4}, {0, 1, 0, 0, 0, 0, 2, 0})));
}

TEST(MaxPool2d, OddExtentSamePaddingStride2)
{
    const TensorF x(Shape{1, 1, 5, 5}, 1.0f);
    auto [y, cache] = maxpool2d_fwd(x, MaxPoolSpec{3, 2, Padding::same});
    EXPECT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
}

TEST(GlobalAvgPool, MeanAndGradient)
{
    const TensorF x(Shape{1, 2, 2, 2}, {1, 2, 3, 4, 10, 10, 10, 10});
    const TensorF y = global_avg_pool_fwd(x);
    EXPECT_TRUE(y.bitwise_equal(TensorF(Shape{1, 2, 1, 1}, {2.5f, 10.0f})));
    const TensorF g = global_avg_pool_bwd(TensorF(Shape{1, 2, 1, 1}, {4.0f, 8.0f}), x.shape());
    EXPECT_TRUE(g.bitwise_equal(TensorF(Shape{1, 2, 2, 2}, {1, 1, 1, 1, 2, 2, 2, 2})));
}

TEST(Dense, ForwardBackward)
{
    const TensorD x(Shape{2, 3, 1, 1}, {1, 2, 3, 4, 5, 6});
    const TensorD w(Shape{2, 3}, {1, 0, -1, 0.5, 0.5, 0.5});
    const TensorD b(Shape{2}, {0.1, -0.1});
    const TensorD y = dense_fwd(x, w, &b);
    EXPECT_DOUBLE_EQ(y[0], -2 + 0.1);
    EXPECT_DOUBLE_EQ(y[1], 3 - 0.1);
    EXPECT_DOUBLE_EQ(y[2], -2 + 0.1);
    EXPECT_DOUBLE_EQ(y[3], 7.5 - 0.1);
    const auto g = dense_bwd(TensorD(Shape{2, 2, 1, 1}, {1, 0, 0, 1}), x, w, true);
    EXPECT_DOUBLE_EQ(g.x[0], 1);
    EXPECT_DOUBLE_EQ(g.x[3], 0.5);
    EXPECT_DOUBLE_EQ(g.w[0], 1);
    EXPECT_DOUBLE_EQ(g.w[3], 4);
    EXPECT_DOUBLE_EQ((*g.b)[0], 1);
    EXPECT_THROW(dense_fwd(x, TensorD(Shape{2, 4}), &b), ShapeError);
}

TEST(SoftmaxXent, UniformLogitsGiveLnK)
{
    const TensorD z(Shape{3, 10, 1, 1});
    const std::vector<int> y{0, 4, 9};
    const auto r = softmax_xent_fwd(z, std::span<const int>(y));
    EXPECT_NEAR(r.loss, std::log(10.0), 1e-12);
    EXPECT_NEAR(2.302585, r.loss, 1e-6);
}

TEST(SoftmaxXent, GradientIsProbsMinusOnehotOverBatch)
{
    Prng p(1);
    const TensorD z = normal_tensor<double>(p, Shape{4, 5, 1, 1});
    const std::vector<int> y{1, 0, 4, 2};
    const auto r = softmax_xent_fwd(z, std::span<const int>(y));
    const TensorD g = softmax_xent_bwd(r.probs, std::span<const int>(y));
    for (Index n = 0; n < 4; ++n)
        for (Index k = 0; k < 5; ++k) {
            const double expected = (r.probs[n * 5 + k] - (k == y[n] ? 1.0 : 0.0)) / 4.0;
            EXPECT_DOUBLE_EQ(g[n * 5 + k], expected);
            // central difference on the loss
            TensorD zp = z, zm = z;
            zp[n * 5 + k] += 1e-5;
            zm[n * 5 + k] -= 1e-5;
            const double fd = (softmax_xent_fwd(zp, std::span<const int>(y)).loss -
                               softmax_xent_fwd(zm, std::span<const int>(y)).loss) /
                              2e-5;
            EXPECT_NEAR(g[n * 5 + k], fd, 1e-9);
        }
}

TEST(SoftmaxXent, LabelOutOfRange)
{
    const std::vector<int> y{0, 10};
    EXPECT_THROW(softmax_xent_fwd(TensorF(Shape{2, 10, 1, 1}), std::span<const int>(y)), ArgumentError);
    const std::vector<int> neg{-1, 0};
    EXPECT_THROW(softmax_xent_fwd(TensorF(Shape{2, 10, 1, 1}), std::span<const int>(neg)), ArgumentError);
}

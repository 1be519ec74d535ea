// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "compactnet/autograd/tape.hpp"
#include "compactnet/nn/batchnorm.hpp"
#include "compactnet/nn/compact.hpp"
#include "compactnet/nn/conv.hpp"
#include "compactnet/nn/layers.hpp"
#include "compactnet/nn/pool.hpp"

// Differentiable wrappers: each runs the forward kernel, appends a node and
// captures exactly the cache its backward kernel needs.

namespace compactnet::autograd {

using nn::ConvSpec;
using nn::Mode;
using nn::PoolSpec;

template <typename Scalar>
NodeId conv2d(Tape<Scalar>& t, NodeId x, NodeId w, std::optional<NodeId> b, const ConvSpec& spec)
{
    Tensor<Scalar> y = nn::conv2d_fwd(t.value(x), t.value(w), b ? &t.value(*b) : nullptr, spec);
    auto fn = [x, w, b, spec](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
        auto grads = nn::conv2d_bwd(g, tp.value(x), tp.value(w), spec);
        tp.accumulate(x, std::move(grads.x));
        tp.accumulate(w, std::move(grads.w));
        if (b) tp.accumulate(*b, std::move(*grads.b));
    };
    if (b) return t.record("conv2d", std::move(y), {x, w, *b}, fn);
    return t.record("conv2d", std::move(y), {x, w}, fn);
}

template <typename Scalar>
void mark_argmax(Tape<Scalar>& t, const std::vector<std::int32_t>& argmax)
{
    if (t.options().track_patterns) t.mark_pattern(fnv1a(std::span<const std::int32_t>(argmax)));
}

template <typename Scalar>
NodeId channel_pool(Tape<Scalar>& t, NodeId x, const PoolSpec& spec)
{
    auto [y, cache] = nn::channel_group_pool_fwd(t.value(x), spec);
    mark_argmax(t, cache.argmax);
    return t.record("channel_pool", std::move(y), {x},
                    [x, spec, cache = std::move(cache)](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
                        tp.accumulate(x, nn::channel_group_pool_bwd(g, cache, spec));
                    });
}

template <typename Scalar>
NodeId compact_conv(Tape<Scalar>& t, NodeId x, NodeId w_dw, std::optional<NodeId> b_dw, NodeId w_pw,
                    std::optional<NodeId> b_pw, const PoolSpec& pool, const ConvSpec& conv)
{
    auto r = nn::compact_conv_fwd(t.value(x), t.value(w_dw), b_dw ? &t.value(*b_dw) : nullptr, t.value(w_pw),
                                  b_pw ? &t.value(*b_pw) : nullptr, pool, conv);
    mark_argmax(t, r.cache.pool.argmax);
    auto fn = [=, cache = std::move(r.cache)](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
        auto grads = nn::compact_conv_bwd(g, cache, tp.value(x), tp.value(w_dw), b_dw.has_value(), tp.value(w_pw),
                                          b_pw.has_value(), pool, conv);
        tp.accumulate(x, std::move(grads.x));
        tp.accumulate(w_dw, std::move(grads.w_dw));
        if (b_dw) tp.accumulate(*b_dw, std::move(*grads.b_dw));
        tp.accumulate(w_pw, std::move(grads.w_pw));
        if (b_pw) tp.accumulate(*b_pw, std::move(*grads.b_pw));
    };
    // Every operand is listed so requires_grad propagates from any of them.
    NodeId ins[5] = {x, w_dw, b_dw.value_or(x), w_pw, b_pw.value_or(x)};
    return t.record("compact_conv", std::move(r.out), {ins[0], ins[1], ins[2], ins[3], ins[4]}, std::move(fn));
}

/// `running_mean` / `running_var` are updated in train mode.
template <typename Scalar>
NodeId batchnorm(Tape<Scalar>& t, NodeId x, NodeId gamma, NodeId beta, Param<Scalar>& running_mean,
                 Param<Scalar>& running_var, Mode mode, const nn::BatchNormOptions& opt)
{
    nn::BatchNormCache<Scalar> cache;
    Tensor<Scalar> y = nn::batchnorm_fwd(t.value(x), t.value(gamma), t.value(beta), running_mean.value,
                                         running_var.value, mode, opt, &cache);
    return t.record("batchnorm", std::move(y), {x, gamma, beta},
                    [x, gamma, beta, cache = std::move(cache)](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
                        auto grads = nn::batchnorm_bwd(g, cache, tp.value(gamma));
                        tp.accumulate(x, std::move(grads.x));
                        tp.accumulate(gamma, std::move(grads.gamma));
                        tp.accumulate(beta, std::move(grads.beta));
                    });
}

template <typename Scalar>
NodeId relu(Tape<Scalar>& t, NodeId x)
{
    const Tensor<Scalar>& xv = t.value(x);
    if (t.options().track_patterns) {
        std::vector<unsigned char> mask(static_cast<std::size_t>(xv.size()));
        for (Index i = 0; i < xv.size(); ++i) mask[i] = xv[i] > Scalar(0);
        t.mark_pattern(fnv1a(std::span<const unsigned char>(mask)));
    }
    return t.record("relu", nn::relu_fwd(xv), {x}, [x](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
        tp.accumulate(x, nn::relu_bwd(g, tp.value(x)));
    });
}

template <typename Scalar>
NodeId maxpool2d(Tape<Scalar>& t, NodeId x, const nn::MaxPoolSpec& spec)
{
    auto [y, cache] = nn::maxpool2d_fwd(t.value(x), spec);
    mark_argmax(t, cache.argmax);
    return t.record("maxpool2d", std::move(y), {x},
                    [x, cache = std::move(cache)](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
                        tp.accumulate(x, nn::maxpool2d_bwd(g, cache));
                    });
}

template <typename Scalar>
NodeId global_avg_pool(Tape<Scalar>& t, NodeId x)
{
    return t.record("global_avg_pool", nn::global_avg_pool_fwd(t.value(x)), {x},
                    [x](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
                        tp.accumulate(x, nn::global_avg_pool_bwd(g, tp.value(x).shape()));
                    });
}

template <typename Scalar>
NodeId dense(Tape<Scalar>& t, NodeId x, NodeId w, std::optional<NodeId> b)
{
    Tensor<Scalar> y = nn::dense_fwd(t.value(x), t.value(w), b ? &t.value(*b) : nullptr);
    auto fn = [x, w, b](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
        auto grads = nn::dense_bwd(g, tp.value(x), tp.value(w), b.has_value());
        tp.accumulate(x, std::move(grads.x));
        tp.accumulate(w, std::move(grads.w));
        if (b) tp.accumulate(*b, std::move(*grads.b));
    };
    if (b) return t.record("dense", std::move(y), {x, w, *b}, fn);
    return t.record("dense", std::move(y), {x, w}, fn);
}

template <typename Scalar>
NodeId add(Tape<Scalar>& t, NodeId a, NodeId b)
{
    return t.record("add", t.value(a) + t.value(b), {a, b}, [a, b](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
        tp.accumulate(a, g);
        tp.accumulate(b, g);
    });
}

struct LossNode {
    NodeId loss;
    Index correct = 0;
};

template <typename Scalar>
LossNode softmax_xent(Tape<Scalar>& t, NodeId logits, std::vector<int> labels)
{
    auto r = nn::softmax_xent_fwd(t.value(logits), std::span<const int>(labels));
    Tensor<Scalar> loss(Shape{1}, r.loss);
    const Index correct = r.correct;
    NodeId id = t.record("softmax_xent", std::move(loss), {logits},
                         [logits, labels = std::move(labels), probs = std::move(r.probs)](
                             Tape<Scalar>& tp, const Tensor<Scalar>& g) {
                             tp.accumulate(logits, nn::softmax_xent_bwd(probs, std::span<const int>(labels), g[0]));
                         });
    return {id, correct};
}

/// sum(x * weights): turns any tensor-valued fragment into a scalar objective
/// with a non-degenerate gradient.
template <typename Scalar>
NodeId weighted_sum(Tape<Scalar>& t, NodeId x, Tensor<Scalar> weights)
{
    const Tensor<Scalar>& xv = t.value(x);
    require_same_shape(xv.shape(), weights.shape(), "weighted_sum");
    Tensor<Scalar> out(Shape{1}, (xv.array() * weights.array()).sum());
    return t.record("weighted_sum", std::move(out), {x},
                    [x, weights = std::move(weights)](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
                        tp.accumulate(x, weights * g[0]);
                    });
}

} // namespace compactnet::autograd

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "compactnet/nn/conv.hpp"
#include "compactnet/tensor.hpp"

namespace compactnet::nn {

template <typename Scalar>
Tensor<Scalar> relu_fwd(const Tensor<Scalar>& x)
{
    Tensor<Scalar> y(x.shape());
    y.array() = x.array().max(Scalar(0));
    return y;
}

template <typename Scalar>
Tensor<Scalar> relu_bwd(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& x)
{
    require_same_shape(grad_out.shape(), x.shape(), "relu_bwd");
    Tensor<Scalar> g(x.shape());
    g.array() = (x.array() > Scalar(0)).select(grad_out.array(), Scalar(0));
    return g;
}

// ---------------------------------------------------------------------------
// Spatial max pooling

struct MaxPoolSpec {
    Index kernel = 2;
    Index stride = 2;
    Padding padding = Padding::valid;
};

struct MaxPoolCache {
    Shape input_shape;
    std::vector<std::int32_t> argmax; // offset within the input plane
};

template <typename Scalar>
std::pair<Tensor<Scalar>, MaxPoolCache> maxpool2d_fwd(const Tensor<Scalar>& x, const MaxPoolSpec& spec)
{
    const Shape& s = x.shape();
    const Index ho = conv_output_extent(s.h(), spec.kernel, spec.stride, spec.padding);
    const Index wo = conv_output_extent(s.w(), spec.kernel, spec.stride, spec.padding);
    const Index pt = conv_pad_before(s.h(), spec.kernel, spec.stride, spec.padding);
    const Index pl = conv_pad_before(s.w(), spec.kernel, spec.stride, spec.padding);
    Tensor<Scalar> out(Shape{s.n(), s.c(), ho, wo});
    MaxPoolCache cache{s, std::vector<std::int32_t>(static_cast<std::size_t>(out.size()))};
    for (Index n = 0; n < s.n(); ++n) {
        for (Index c = 0; c < s.c(); ++c) {
            const Scalar* in = x.plane(n, c);
            Scalar* o = out.plane(n, c);
            std::int32_t* am = cache.argmax.data() + (n * s.c() + c) * ho * wo;
            for (Index oy = 0; oy < ho; ++oy) {
                for (Index ox = 0; ox < wo; ++ox) {
                    Scalar best = -std::numeric_limits<Scalar>::infinity();
                    Index best_at = -1;
                    for (Index kh = 0; kh < spec.kernel; ++kh) {
                        const Index iy = oy * spec.stride + kh - pt;
                        if (iy < 0 || iy >= s.h()) continue;
                        for (Index kw = 0; kw < spec.kernel; ++kw) {
                            const Index ix = ox * spec.stride + kw - pl;
                            if (ix < 0 || ix >= s.w()) continue;
                            const Scalar v = in[iy * s.w() + ix];
                            if (best_at < 0 || v > best) {
                                best = v;
                                best_at = iy * s.w() + ix;
                            }
                        }
                    }
                    o[oy * wo + ox] = best;
                    am[oy * wo + ox] = static_cast<std::int32_t>(best_at);
                }
            }
        }
    }
    return {std::move(out), std::move(cache)};
}

template <typename Scalar>
Tensor<Scalar> maxpool2d_bwd(const Tensor<Scalar>& grad_out, const MaxPoolCache& cache)
{
    if (cache.argmax.size() != static_cast<std::size_t>(grad_out.size()))
        throw InternalError("maxpool2d_bwd: cache does not match gradient");
    const Shape& s = cache.input_shape;
    Tensor<Scalar> g(s);
    const Index out_plane = grad_out.shape().h() * grad_out.shape().w();
    for (Index n = 0; n < s.n(); ++n)
        for (Index c = 0; c < s.c(); ++c) {
            const Scalar* go = grad_out.plane(n, c);
            const std::int32_t* am = cache.argmax.data() + (n * s.c() + c) * out_plane;
            Scalar* gi = g.plane(n, c);
            for (Index i = 0; i < out_plane; ++i) gi[am[i]] += go[i];
        }
    return g;
}

// ---------------------------------------------------------------------------
// Global average pooling: (N, C, H, W) -> (N, C, 1, 1)

template <typename Scalar>
Tensor<Scalar> global_avg_pool_fwd(const Tensor<Scalar>& x)
{
    const Shape& s = x.shape();
    const Index plane = s.h() * s.w();
    Tensor<Scalar> out(Shape{s.n(), s.c(), 1, 1});
    for (Index n = 0; n < s.n(); ++n)
        for (Index c = 0; c < s.c(); ++c)
            out(n, c, 0, 0) =
                Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>(x.plane(n, c), plane).sum() /
                static_cast<Scalar>(plane);
    return out;
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool_bwd(const Tensor<Scalar>& grad_out, const Shape& input_shape)
{
    const Index plane = input_shape.h() * input_shape.w();
    Tensor<Scalar> g(input_shape);
    for (Index n = 0; n < input_shape.n(); ++n)
        for (Index c = 0; c < input_shape.c(); ++c) {
            const Scalar v = grad_out(n, c, 0, 0) / static_cast<Scalar>(plane);
            Scalar* p = g.plane(n, c);
            std::fill(p, p + plane, v);
        }
    return g;
}

// ---------------------------------------------------------------------------
// Fully connected: x is (N, ...) flattened to (N, F); w is (out, F).

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
Tensor<Scalar> dense_fwd(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>* b)
{
    const Index batch = x.shape()[0];
    const Index features = x.size() / batch;
    if (w.shape().rank() != 2 || w.shape()[1] != features)
        throw ShapeError("dense: weight " + w.shape().str() + " incompatible with " + std::to_string(features) +
                         " input features");
    const Index outputs = w.shape()[0];
    if (b && !(b->shape() == Shape{outputs})) throw ShapeError("dense: bias shape mismatch");
    Tensor<Scalar> y(Shape{batch, outputs, 1, 1});
    Eigen::Map<const RowMatrix<Scalar>> X(x.data(), batch, features);
    Eigen::Map<const RowMatrix<Scalar>> W(w.data(), outputs, features);
    Eigen::Map<RowMatrix<Scalar>> Y(y.data(), batch, outputs);
    Y.noalias() = X * W.transpose();
    if (b) Y.rowwise() += Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(b->data(), outputs);
    return y;
}

template <typename Scalar>
struct DenseGrads {
    Tensor<Scalar> x;
    Tensor<Scalar> w;
    std::optional<Tensor<Scalar>> b;
};

template <typename Scalar>
DenseGrads<Scalar> dense_bwd(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& x, const Tensor<Scalar>& w,
                             bool has_bias)
{
    const Index batch = x.shape()[0];
    const Index features = x.size() / batch;
    const Index outputs = w.shape()[0];
    if (grad_out.size() != batch * outputs) throw ShapeError("dense_bwd: gradient shape mismatch");
    DenseGrads<Scalar> g{Tensor<Scalar>(x.shape()), Tensor<Scalar>(w.shape()), std::nullopt};
    Eigen::Map<const RowMatrix<Scalar>> X(x.data(), batch, features);
    Eigen::Map<const RowMatrix<Scalar>> W(w.data(), outputs, features);
    Eigen::Map<const RowMatrix<Scalar>> G(grad_out.data(), batch, outputs);
    Eigen::Map<RowMatrix<Scalar>>(g.x.data(), batch, features).noalias() = G * W;
    Eigen::Map<RowMatrix<Scalar>>(g.w.data(), outputs, features).noalias() = G.transpose() * X;
    if (has_bias) {
        Tensor<Scalar> gb(Shape{outputs});
        Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(gb.data(), outputs) = G.colwise().sum();
        g.b = std::move(gb);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Softmax + cross-entropy, mean over the batch.

template <typename Scalar>
struct SoftmaxXent {
    Scalar loss;
    Tensor<Scalar> probs; // (N, K)
    Index correct;        // argmax(probs) == label count
};

template <typename Scalar>
SoftmaxXent<Scalar> softmax_xent_fwd(const Tensor<Scalar>& logits, std::span<const int> labels)
{
    const Index batch = logits.shape()[0];
    const Index classes = logits.size() / batch;
    if (static_cast<Index>(labels.size()) != batch)
        throw ShapeError("softmax_xent: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(batch));
    SoftmaxXent<Scalar> r{Scalar(0), Tensor<Scalar>(Shape{batch, classes}), 0};
    double total = 0.0;
    for (Index n = 0; n < batch; ++n) {
        const int y = labels[n];
        if (y < 0 || y >= classes)
            throw ArgumentError("softmax_xent: label " + std::to_string(y) + " out of range [0, " +
                                std::to_string(classes) + ")");
        const Scalar* z = logits.data() + n * classes;
        Scalar* p = r.probs.data() + n * classes;
        const Scalar zmax = *std::max_element(z, z + classes);
        Index best = 0;
        double denom = 0.0;
        for (Index k = 0; k < classes; ++k) {
            denom += std::exp(static_cast<double>(z[k] - zmax));
            if (z[k] > z[best]) best = k;
        }
        for (Index k = 0; k < classes; ++k)
            p[k] = static_cast<Scalar>(std::exp(static_cast<double>(z[k] - zmax)) / denom);
        total += std::log(denom) - static_cast<double>(z[y] - zmax);
        if (best == y) ++r.correct;
    }
    r.loss = static_cast<Scalar>(total / static_cast<double>(batch));
    return r;
}

/// (softmax(z) - onehot(y)) / batch, scaled by the upstream loss gradient.
template <typename Scalar>
Tensor<Scalar> softmax_xent_bwd(const Tensor<Scalar>& probs, std::span<const int> labels, Scalar upstream = 1)
{
    const Index batch = probs.shape()[0];
    const Index classes = probs.shape()[1];
    Tensor<Scalar> g(Shape{batch, classes, 1, 1});
    const Scalar inv = upstream / static_cast<Scalar>(batch);
    for (Index n = 0; n < batch; ++n)
        for (Index k = 0; k < classes; ++k) {
            const Scalar onehot = k == labels[n] ? Scalar(1) : Scalar(0);
            g[n * classes + k] = (probs[n * classes + k] - onehot) * inv;
        }
    return g;
}

} // namespace compactnet::nn

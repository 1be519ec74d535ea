// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "compactnet/tensor.hpp"

namespace compactnet::nn {

enum class Mode { train, infer };

struct BatchNormOptions {
    double eps = 1e-5;
    /// running <- momentum * running + (1 - momentum) * batch
    double momentum = 0.9;
};

template <typename Scalar>
struct BatchNormCache {
    Mode mode = Mode::train;
    Tensor<Scalar> xhat;
    Tensor<Scalar> inv_std; // (C)
};

/// Per-channel normalization over batch x height x width. Train mode uses
/// the (biased) batch statistics and updates the running estimates in place.
template <typename Scalar>
Tensor<Scalar> batchnorm_fwd(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma, const Tensor<Scalar>& beta,
                             Tensor<Scalar>& running_mean, Tensor<Scalar>& running_var, Mode mode,
                             const BatchNormOptions& opt, BatchNormCache<Scalar>* cache = nullptr)
{
    if (!(opt.eps > 0)) throw ArgumentError("batchnorm: eps must be > 0");
    const Shape& s = x.shape();
    const Index ch = s.c();
    const Shape param_shape{ch};
    for (const Tensor<Scalar>* p : std::initializer_list<const Tensor<Scalar>*>{&gamma, &beta, &running_mean, &running_var})
        if (!(p->shape() == param_shape))
            throw ShapeError("batchnorm: parameter shape " + p->shape().str() + " expected " + param_shape.str());

    const Index plane = s.h() * s.w();
    const double count = static_cast<double>(s.n() * plane);
    Tensor<Scalar> y(s);
    Tensor<Scalar> xhat(s);
    Tensor<Scalar> inv_std(param_shape);

    for (Index c = 0; c < ch; ++c) {
        double mean, var;
        if (mode == Mode::train) {
            double acc = 0.0;
            for (Index n = 0; n < s.n(); ++n) {
                const Scalar* p = x.plane(n, c);
                for (Index i = 0; i < plane; ++i) acc += p[i];
            }
            mean = acc / count;
            double sq = 0.0;
            for (Index n = 0; n < s.n(); ++n) {
                const Scalar* p = x.plane(n, c);
                for (Index i = 0; i < plane; ++i) {
                    const double d = p[i] - mean;
                    sq += d * d;
                }
            }
            var = sq / count;
            running_mean[c] = static_cast<Scalar>(opt.momentum * running_mean[c] + (1.0 - opt.momentum) * mean);
            running_var[c] = static_cast<Scalar>(opt.momentum * running_var[c] + (1.0 - opt.momentum) * var);
        } else {
            mean = running_mean[c];
            var = running_var[c];
        }
        const Scalar m = static_cast<Scalar>(mean);
        const Scalar is = static_cast<Scalar>(1.0 / std::sqrt(var + opt.eps));
        inv_std[c] = is;
        const Scalar gm = gamma[c];
        const Scalar bt = beta[c];
        for (Index n = 0; n < s.n(); ++n) {
            const Scalar* p = x.plane(n, c);
            Scalar* xh = xhat.plane(n, c);
            Scalar* q = y.plane(n, c);
            for (Index i = 0; i < plane; ++i) {
                xh[i] = (p[i] - m) * is;
                q[i] = gm * xh[i] + bt;
            }
        }
    }
    if (cache) *cache = BatchNormCache<Scalar>{mode, std::move(xhat), std::move(inv_std)};
    return y;
}

template <typename Scalar>
struct BatchNormGrads {
    Tensor<Scalar> x;
    Tensor<Scalar> gamma;
    Tensor<Scalar> beta;
};

template <typename Scalar>
BatchNormGrads<Scalar> batchnorm_bwd(const Tensor<Scalar>& grad_out, const BatchNormCache<Scalar>& cache,
                                     const Tensor<Scalar>& gamma)
{
    const Shape& s = grad_out.shape();
    if (!(s == cache.xhat.shape())) throw ShapeError("batchnorm_bwd: gradient shape mismatch");
    const Index ch = s.c();
    const Index plane = s.h() * s.w();
    const double count = static_cast<double>(s.n() * plane);
    BatchNormGrads<Scalar> g{Tensor<Scalar>(s), Tensor<Scalar>(Shape{ch}), Tensor<Scalar>(Shape{ch})};

    for (Index c = 0; c < ch; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (Index n = 0; n < s.n(); ++n) {
            const Scalar* dy = grad_out.plane(n, c);
            const Scalar* xh = cache.xhat.plane(n, c);
            for (Index i = 0; i < plane; ++i) {
                sum_dy += dy[i];
                sum_dy_xhat += static_cast<double>(dy[i]) * xh[i];
            }
        }
        g.beta[c] = static_cast<Scalar>(sum_dy);
        g.gamma[c] = static_cast<Scalar>(sum_dy_xhat);
        const double scale = static_cast<double>(gamma[c]) * cache.inv_std[c];
        for (Index n = 0; n < s.n(); ++n) {
            const Scalar* dy = grad_out.plane(n, c);
            const Scalar* xh = cache.xhat.plane(n, c);
            Scalar* dx = g.x.plane(n, c);
            if (cache.mode == Mode::train) {
                const double mean_dy = sum_dy / count;
                const double mean_dy_xhat = sum_dy_xhat / count;
                for (Index i = 0; i < plane; ++i)
                    dx[i] = static_cast<Scalar>(scale * (dy[i] - mean_dy - xh[i] * mean_dy_xhat));
            } else {
                for (Index i = 0; i < plane; ++i) dx[i] = static_cast<Scalar>(scale * dy[i]);
            }
        }
    }
    return g;
}

} // namespace compactnet::nn

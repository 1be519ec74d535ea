// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

#include "compactnet/autograd/param_store.hpp"

namespace compactnet::autograd {

struct TrainConfig {
    double learning_rate = 0.001;
    Index batch_size = 32;
    int epochs = 10;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const
    {
        if (!(learning_rate > 0)) throw ArgumentError("learning_rate must be > 0");
        if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
        if (epochs < 0) throw ArgumentError("epochs must be >= 0");
        if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ArgumentError("Adam betas must be in [0, 1)");
        if (!(adam_eps > 0)) throw ArgumentError("Adam eps must be > 0");
    }
};

/// One bias-corrected Adam update over every trainable parameter, then the
/// gradients are cleared.
template <typename Scalar>
void adam_step(ParamStore<Scalar>& store, const TrainConfig& cfg)
{
    cfg.validate();
    const std::int64_t t = store.step_count() + 1;
    const Scalar b1 = static_cast<Scalar>(cfg.beta1);
    const Scalar b2 = static_cast<Scalar>(cfg.beta2);
    const Scalar bc1 = static_cast<Scalar>(1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
    const Scalar bc2 = static_cast<Scalar>(1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
    const Scalar lr = static_cast<Scalar>(cfg.learning_rate);
    const Scalar eps = static_cast<Scalar>(cfg.adam_eps);

    for (std::size_t i = 0; i < store.size(); ++i) {
        Param<Scalar>& p = store[i];
        if (!p.trainable) continue;
        if (p.m.empty()) {
            p.m = Tensor<Scalar>(p.value.shape());
            p.v = Tensor<Scalar>(p.value.shape());
        }
        auto g = p.grad.array();
        p.m.array() = b1 * p.m.array() + (Scalar(1) - b1) * g;
        p.v.array() = b2 * p.v.array() + (Scalar(1) - b2) * g.square();
        p.value.array() -= lr * (p.m.array() / bc1) / ((p.v.array() / bc2).sqrt() + eps);
        p.grad.fill(Scalar(0));
    }
    store.set_step_count(t);
}

} // namespace compactnet::autograd

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "compactnet/zoo/layers.hpp"

namespace compactnet::zoo {

/// Called around every top-level layer of a forward pass (index, entering).
using LayerObserver = std::function<void(std::size_t, bool)>;

/// A resolved layer stack plus the parameters it owns. Construction binds
/// all shapes (so divisibility errors surface immediately); tensors are only
/// allocated by `materialize`.
template <typename Scalar>
class Model {
public:
    Model(std::string name, FeatureShape input, std::vector<LayerPtr<Scalar>> layers)
        : name_(std::move(name)), input_(input), layers_(std::move(layers))
    {
        FeatureShape s = input_;
        for (auto& l : layers_) s = l->resolve(s);
        output_ = s;
    }

    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;

    const std::string& name() const { return name_; }
    const FeatureShape& input_shape() const { return input_; }
    const FeatureShape& output_shape() const { return output_; }
    const std::vector<LayerPtr<Scalar>>& layers() const { return layers_; }

    std::vector<LayerSpec> enumerate_layers() const
    {
        std::vector<LayerSpec> out;
        for (const auto& l : layers_) l->describe(out);
        return out;
    }

    /// Allocates every parameter. With a generator, weights are He-initialized
    /// in layer order; without one they are zero (shape-only instantiation).
    void materialize(Prng* prng)
    {
        if (materialized_) throw ArgumentError("model " + name_ + " is already materialized");
        for (auto& l : layers_) l->create_params(params_, prng);
        materialized_ = true;
    }

    bool materialized() const { return materialized_; }
    ParamStore<Scalar>& params() { return params_; }
    const ParamStore<Scalar>& params() const { return params_; }

    NodeId forward(Tape<Scalar>& tape, NodeId x, Mode mode, const LayerObserver& observer = {}) const
    {
        if (!materialized_) throw ArgumentError("model " + name_ + " has no parameters; call materialize()");
        const Shape& s = tape.value(x).shape();
        if (s.rank() != 4 || s.c() != input_.c || s.h() != input_.h || s.w() != input_.w)
            throw ShapeError("model " + name_ + " expects (N," + input_.str() + ") input, got " + s.str());
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            if (observer) observer(i, true);
            x = layers_[i]->forward(tape, x, mode);
            if (observer) observer(i, false);
        }
        return x;
    }

private:
    std::string name_;
    FeatureShape input_;
    FeatureShape output_;
    std::vector<LayerPtr<Scalar>> layers_;
    ParamStore<Scalar> params_;
    bool materialized_ = false;
};

} // namespace compactnet::zoo

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "compactnet/autograd/functional.hpp"
#include "compactnet/prng.hpp"
#include "compactnet/zoo/layer_spec.hpp"

namespace compactnet::zoo {

using autograd::NodeId;
using autograd::Param;
using autograd::ParamStore;
using autograd::Tape;
using nn::Mode;

template <typename Scalar>
class Layer {
public:
    explicit Layer(std::string name) : name_(std::move(name)) {}
    virtual ~Layer() = default;

    const std::string& name() const { return name_; }

    /// Binds the input extents and returns the output extents. Throws
    /// ShapeError naming this layer when the input is incompatible.
    virtual FeatureShape resolve(const FeatureShape& in) = 0;
    virtual void describe(std::vector<LayerSpec>& out) const = 0;
    /// Registers this layer's tensors. Weights are He-initialized from
    /// `prng`; without one every tensor keeps its neutral fill.
    virtual void create_params(ParamStore<Scalar>& store, Prng* prng) = 0;
    virtual NodeId forward(Tape<Scalar>& tape, NodeId x, Mode mode) const = 0;

protected:
    [[noreturn]] void shape_fail(const std::string& what) const
    {
        throw ShapeError("layer " + name_ + ": " + what);
    }

    std::string name_;
};

template <typename Scalar>
using LayerPtr = std::unique_ptr<Layer<Scalar>>;

namespace detail {

template <typename Scalar>
Tensor<Scalar> init_weight(Prng* prng, const Shape& shape, Index fan_in)
{
    return prng ? he_init<Scalar>(*prng, shape, fan_in) : Tensor<Scalar>(shape);
}

/// Weight + optional bias of a single convolution.
template <typename Scalar>
struct ConvParams {
    nn::ConvSpec spec;
    Param<Scalar>* weight = nullptr;
    Param<Scalar>* bias = nullptr;

    void create(ParamStore<Scalar>& store, const std::string& prefix, Prng* prng)
    {
        weight = &store.add(prefix + ".weight", init_weight<Scalar>(prng, spec.weight_shape(), spec.fan_in()));
        if (spec.has_bias) bias = &store.add(prefix + ".bias", Tensor<Scalar>(Shape{spec.c_out}));
    }

    NodeId forward(Tape<Scalar>& t, NodeId x) const
    {
        std::optional<NodeId> b;
        if (bias) b = t.param(*bias);
        return autograd::conv2d(t, x, t.param(*weight), b, spec);
    }
};

template <typename Scalar>
struct BatchNormParams {
    Index channels = 0;
    nn::BatchNormOptions options;
    Param<Scalar>* gamma = nullptr;
    Param<Scalar>* beta = nullptr;
    Param<Scalar>* running_mean = nullptr;
    Param<Scalar>* running_var = nullptr;

    void create(ParamStore<Scalar>& store, const std::string& prefix)
    {
        const Shape s{channels};
        gamma = &store.add(prefix + ".gamma", Tensor<Scalar>(s, Scalar(1)));
        beta = &store.add(prefix + ".beta", Tensor<Scalar>(s));
        running_mean = &store.add(prefix + ".running_mean", Tensor<Scalar>(s), false);
        running_var = &store.add(prefix + ".running_var", Tensor<Scalar>(s, Scalar(1)), false);
    }

    NodeId forward(Tape<Scalar>& t, NodeId x, Mode mode) const
    {
        return autograd::batchnorm(t, x, t.param(*gamma), t.param(*beta), *running_mean, *running_var, mode,
                                   options);
    }
};

} // namespace detail

template <typename Scalar>
class Conv2dLayer final : public Layer<Scalar> {
public:
    /// For depthwise kind `c_out` is ignored (it equals the input width).
    Conv2dLayer(std::string name, nn::ConvKind kind, Index kernel, Index c_out, Index stride, bool bias,
                nn::Padding padding = nn::Padding::same)
        : Layer<Scalar>(std::move(name))
    {
        conv_.spec = nn::ConvSpec{kind, kernel, 0, c_out, stride, padding, bias};
    }

    FeatureShape resolve(const FeatureShape& in) override
    {
        auto& s = conv_.spec;
        s.c_in = in.c;
        if (s.kind == nn::ConvKind::depthwise) s.c_out = in.c;
        try {
            s.validate();
            in_ = in;
            out_ = {s.c_out, nn::conv_output_extent(in.h, s.kernel, s.stride, s.padding),
                    nn::conv_output_extent(in.w, s.kernel, s.stride, s.padding)};
        } catch (const Error& e) {
            this->shape_fail(e.what());
        }
        return out_;
    }

    void describe(std::vector<LayerSpec>& out) const override
    {
        const auto& s = conv_.spec;
        LayerSpec l;
        l.name = this->name_;
        l.kind = LayerKind::conv;
        l.conv_kind = s.kind;
        l.kernel = s.kernel;
        l.stride = s.stride;
        l.c_in = s.c_in;
        l.c_out = s.c_out;
        l.h_in = in_.h;
        l.w_in = in_.w;
        l.h_out = out_.h;
        l.w_out = out_.w;
        l.has_bias = s.has_bias;
        out.push_back(l);
    }

    void create_params(ParamStore<Scalar>& store, Prng* prng) override { conv_.create(store, this->name_, prng); }

    NodeId forward(Tape<Scalar>& t, NodeId x, Mode) const override { return conv_.forward(t, x); }

    const nn::ConvSpec& spec() const { return conv_.spec; }

private:
    detail::ConvParams<Scalar> conv_;
    FeatureShape in_, out_;
};

template <typename Scalar>
class BatchNormLayer final : public Layer<Scalar> {
public:
    explicit BatchNormLayer(std::string name, nn::BatchNormOptions options = {}) : Layer<Scalar>(std::move(name))
    {
        bn_.options = options;
    }

    FeatureShape resolve(const FeatureShape& in) override
    {
        bn_.channels = in.c;
        shape_ = in;
        return in;
    }

    void describe(std::vector<LayerSpec>& out) const override
    {
        LayerSpec l;
        l.name = this->name_;
        l.kind = LayerKind::batchnorm;
        l.c_in = l.c_out = shape_.c;
        l.h_in = l.h_out = shape_.h;
        l.w_in = l.w_out = shape_.w;
        out.push_back(l);
    }

    void create_params(ParamStore<Scalar>& store, Prng*) override { bn_.create(store, this->name_); }

    NodeId forward(Tape<Scalar>& t, NodeId x, Mode mode) const override { return bn_.forward(t, x, mode); }

private:
    detail::BatchNormParams<Scalar> bn_;
    FeatureShape shape_;
};

/// Shape-preserving layer without parameters (ReLU).
template <typename Scalar>
class ReluLayer final : public Layer<Scalar> {
public:
    using Layer<Scalar>::Layer;

    FeatureShape resolve(const FeatureShape& in) override { return shape_ = in; }

    void describe(std::vector<LayerSpec>& out) const override
    {
        LayerSpec l;
        l.name = this->name_;
        l.kind = LayerKind::relu;
        l.c_in = l.c_out = shape_.c;
        l.h_in = l.h_out = shape_.h;
        l.w_in = l.w_out = shape_.w;
        out.push_back(l);
    }

    void create_params(ParamStore<Scalar>&, Prng*) override {}
    NodeId forward(Tape<Scalar>& t, NodeId x, Mode) const override { return autograd::relu(t, x); }

private:
    FeatureShape shape_;
};

template <typename Scalar>
class MaxPoolLayer final : public Layer<Scalar> {
public:
    MaxPoolLayer(std::string name, nn::MaxPoolSpec spec) : Layer<Scalar>(std::move(name)), spec_(spec) {}

    FeatureShape resolve(const FeatureShape& in) override
    {
        in_ = in;
        try {
            out_ = {in.c, nn::conv_output_extent(in.h, spec_.kernel, spec_.stride, spec_.padding),
                    nn::conv_output_extent(in.w, spec_.kernel, spec_.stride, spec_.padding)};
        } catch (const Error& e) {
            this->shape_fail(e.what());
        }
        return out_;
    }

    void describe(std::vector<LayerSpec>& out) const override
    {
        LayerSpec l;
        l.name = this->name_;
        l.kind = LayerKind::maxpool;
        l.kernel = spec_.kernel;
        l.stride = spec_.stride;
        l.c_in = l.c_out = in_.c;
        l.h_in = in_.h;
        l.w_in = in_.w;
        l.h_out = out_.h;
        l.w_out = out_.w;
        out.push_back(l);
    }

    void create_params(ParamStore<Scalar>&, Prng*) override {}
    NodeId forward(Tape<Scalar>& t, NodeId x, Mode) const override { return autograd::maxpool2d(t, x, spec_); }

private:
    nn::MaxPoolSpec spec_;
    FeatureShape in_, out_;
};

template <typename Scalar>
class GlobalAvgPoolLayer final : public Layer<Scalar> {
public:
    using Layer<Scalar>::Layer;

    FeatureShape resolve(const FeatureShape& in) override
    {
        in_ = in;
        return {in.c, 1, 1};
    }

    void describe(std::vector<LayerSpec>& out) const override
    {
        LayerSpec l;
        l.name = this->name_;
        l.kind = LayerKind::global_avg_pool;
        l.c_in = l.c_out = in_.c;
        l.h_in = in_.h;
        l.w_in = in_.w;
        l.h_out = l.w_out = 1;
        out.push_back(l);
    }

    void create_params(ParamStore<Scalar>&, Prng*) override {}
    NodeId forward(Tape<Scalar>& t, NodeId x, Mode) const override { return autograd::global_avg_pool(t, x); }

private:
    FeatureShape in_;
};

/// Fully connected over the flattened per-sample features.
template <typename Scalar>
class DenseLayer final : public Layer<Scalar> {
public:
    DenseLayer(std::string name, Index outputs, bool bias = true)
        : Layer<Scalar>(std::move(name)), outputs_(outputs), bias_(bias)
    {
        if (outputs < 1) throw ArgumentError("dense layer needs >= 1 output");
    }

    FeatureShape resolve(const FeatureShape& in) override
    {
        in_ = in;
        return {outputs_, 1, 1};
    }

    void describe(std::vector<LayerSpec>& out) const override
    {
        LayerSpec l;
        l.name = this->name_;
        l.kind = LayerKind::dense;
        l.c_in = in_.size();
        l.c_out = outputs_;
        l.h_in = l.w_in = l.h_out = l.w_out = 1;
        l.has_bias = bias_;
        out.push_back(l);
    }

    void create_params(ParamStore<Scalar>& store, Prng* prng) override
    {
        weight_ = &store.add(this->name_ + ".weight",
                             detail::init_weight<Scalar>(prng, Shape{outputs_, in_.size()}, in_.size()));
        if (bias_) bias_param_ = &store.add(this->name_ + ".bias", Tensor<Scalar>(Shape{outputs_}));
    }

    NodeId forward(Tape<Scalar>& t, NodeId x, Mode) const override
    {
        std::optional<NodeId> b;
        if (bias_param_) b = t.param(*bias_param_);
        return autograd::dense(t, x, t.param(*weight_), b);
    }

private:
    Index outputs_;
    bool bias_;
    FeatureShape in_;
    Param<Scalar>* weight_ = nullptr;
    Param<Scalar>* bias_param_ = nullptr;
};

/// How the depthwise stage of a separable or compact unit is finished off.
struct DepthwiseConvention {
    bool bias = false;
    bool batchnorm = false;
    bool relu = false;
};

/// depthwise K x K -> [BN] -> [ReLU] -> [channel-group pool] -> 1 x 1.
/// Without a pool this is the classic depthwise separable convolution.
template <typename Scalar>
class DepthwiseUnitLayer final : public Layer<Scalar> {
public:
    DepthwiseUnitLayer(std::string name, Index kernel, Index c_out, Index stride, DepthwiseConvention dw,
                       bool pw_bias, std::optional<nn::PoolSpec> pool, nn::BatchNormOptions bn_options = {})
        : Layer<Scalar>(std::move(name)), dw_convention_(dw), pool_(pool)
    {
        conv_ = nn::ConvSpec{nn::ConvKind::standard, kernel, 0, c_out, stride, nn::Padding::same, false};
        pw_bias_ = pw_bias;
        bn_.options = bn_options;
    }

    FeatureShape resolve(const FeatureShape& in) override
    {
        conv_.c_in = in.c;
        in_ = in;
        try {
            conv_.validate();
            dw_.spec = nn::compact_depthwise_spec(conv_, dw_convention_.bias);
            const nn::PoolSpec pool = pool_.value_or(nn::PoolSpec(nn::PoolVariant::sum, 1));
            pw_.spec = nn::compact_pointwise_spec(conv_, pool, pw_bias_);
            out_ = {conv_.c_out, nn::conv_output_extent(in.h, conv_.kernel, conv_.stride, conv_.padding),
                    nn::conv_output_extent(in.w, conv_.kernel, conv_.stride, conv_.padding)};
        } catch (const Error& e) {
            this->shape_fail(e.what());
        }
        bn_.channels = in.c;
        return out_;
    }

    void describe(std::vector<LayerSpec>& out) const override
    {
        LayerSpec l;
        l.name = this->name_;
        l.kind = pool_ ? LayerKind::compact : LayerKind::separable;
        l.kernel = conv_.kernel;
        l.stride = conv_.stride;
        l.c_in = conv_.c_in;
        l.c_out = conv_.c_out;
        l.h_in = in_.h;
        l.w_in = in_.w;
        l.h_out = out_.h;
        l.w_out = out_.w;
        l.has_bias = pw_bias_;
        l.dw_bias = dw_convention_.bias;
        l.dw_bn = dw_convention_.batchnorm;
        l.pool = pool_;
        out.push_back(l);
    }

    void create_params(ParamStore<Scalar>& store, Prng* prng) override
    {
        dw_.create(store, this->name_ + ".dw", prng);
        if (dw_convention_.batchnorm) bn_.create(store, this->name_ + ".dw_bn");
        pw_.create(store, this->name_ + ".pw", prng);
    }

    NodeId forward(Tape<Scalar>& t, NodeId x, Mode mode) const override
    {
        if (pool_ && !dw_convention_.batchnorm && !dw_convention_.relu) {
            std::optional<NodeId> b_dw, b_pw;
            if (dw_.bias) b_dw = t.param(*dw_.bias);
            if (pw_.bias) b_pw = t.param(*pw_.bias);
            return autograd::compact_conv(t, x, t.param(*dw_.weight), b_dw, t.param(*pw_.weight), b_pw, *pool_,
                                          conv_);
        }
        NodeId h = dw_.forward(t, x);
        if (dw_convention_.batchnorm) h = bn_.forward(t, h, mode);
        if (dw_convention_.relu) h = autograd::relu(t, h);
        if (pool_) h = autograd::channel_pool(t, h, *pool_);
        return pw_.forward(t, h);
    }

private:
    nn::ConvSpec conv_;
    DepthwiseConvention dw_convention_;
    std::optional<nn::PoolSpec> pool_;
    bool pw_bias_ = false;
    detail::ConvParams<Scalar> dw_, pw_;
    detail::BatchNormParams<Scalar> bn_;
    FeatureShape in_, out_;
};

template <typename Scalar>
class SequentialLayer final : public Layer<Scalar> {
public:
    explicit SequentialLayer(std::string name, std::vector<LayerPtr<Scalar>> children = {})
        : Layer<Scalar>(std::move(name)), children_(std::move(children))
    {
    }

    SequentialLayer& push(LayerPtr<Scalar> layer)
    {
        children_.push_back(std::move(layer));
        return *this;
    }

    FeatureShape resolve(const FeatureShape& in) override
    {
        FeatureShape s = in;
        for (auto& c : children_) s = c->resolve(s);
        return s;
    }

    void describe(std::vector<LayerSpec>& out) const override
    {
        for (const auto& c : children_) c->describe(out);
    }

    void create_params(ParamStore<Scalar>& store, Prng* prng) override
    {
        for (auto& c : children_) c->create_params(store, prng);
    }

    NodeId forward(Tape<Scalar>& t, NodeId x, Mode mode) const override
    {
        for (const auto& c : children_) x = c->forward(t, x, mode);
        return x;
    }

    const std::vector<LayerPtr<Scalar>>& children() const { return children_; }

private:
    std::vector<LayerPtr<Scalar>> children_;
};

/// main(x) + shortcut(x); identity shortcut when none is given.
template <typename Scalar>
class ResidualLayer final : public Layer<Scalar> {
public:
    ResidualLayer(std::string name, LayerPtr<Scalar> main, LayerPtr<Scalar> shortcut = nullptr)
        : Layer<Scalar>(std::move(name)), main_(std::move(main)), shortcut_(std::move(shortcut))
    {
    }

    FeatureShape resolve(const FeatureShape& in) override
    {
        const FeatureShape a = main_->resolve(in);
        const FeatureShape b = shortcut_ ? shortcut_->resolve(in) : in;
        if (!(a == b)) this->shape_fail("residual branches disagree: " + a.str() + " vs " + b.str());
        out_ = a;
        return a;
    }

    void describe(std::vector<LayerSpec>& out) const override
    {
        main_->describe(out);
        if (shortcut_) shortcut_->describe(out);
        LayerSpec l;
        l.name = this->name_ + ".add";
        l.kind = LayerKind::add;
        l.c_in = l.c_out = out_.c;
        l.h_in = l.h_out = out_.h;
        l.w_in = l.w_out = out_.w;
        out.push_back(l);
    }

    void create_params(ParamStore<Scalar>& store, Prng* prng) override
    {
        main_->create_params(store, prng);
        if (shortcut_) shortcut_->create_params(store, prng);
    }

    NodeId forward(Tape<Scalar>& t, NodeId x, Mode mode) const override
    {
        const NodeId a = main_->forward(t, x, mode);
        const NodeId b = shortcut_ ? shortcut_->forward(t, x, mode) : x;
        return autograd::add(t, a, b);
    }

private:
    LayerPtr<Scalar> main_;
    LayerPtr<Scalar> shortcut_;
    FeatureShape out_;
};

} // namespace compactnet::zoo

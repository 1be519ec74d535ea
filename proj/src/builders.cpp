// SPDX-License-Identifier: Apache-2.0
#include "compactnet/zoo/builders.hpp"

#include <array>

namespace compactnet::zoo {

namespace {

using nn::ConvKind;

template <typename Scalar>
struct Stack {
    std::vector<LayerPtr<Scalar>> layers;

    template <typename L, typename... Args>
    void add(Args&&... args)
    {
        layers.push_back(std::make_unique<L>(std::forward<Args>(args)...));
    }

    void conv_bn_relu(const std::string& name, Index kernel, Index c_out, Index stride, bool bias)
    {
        add<Conv2dLayer<Scalar>>(name, ConvKind::standard, kernel, c_out, stride, bias);
        add<BatchNormLayer<Scalar>>(name + ".bn");
        add<ReluLayer<Scalar>>(name + ".relu");
    }

    /// unit (separable or compact) followed by BN and ReLU on its output.
    void unit_bn_relu(const std::string& name, Index c_out, Index stride, DepthwiseConvention dw, bool pw_bias,
                      std::optional<nn::PoolSpec> pool)
    {
        add<DepthwiseUnitLayer<Scalar>>(name, 3, c_out, stride, dw, pw_bias, pool);
        add<BatchNormLayer<Scalar>>(name + ".bn");
        add<ReluLayer<Scalar>>(name + ".relu");
    }

    void head(Index classes)
    {
        add<GlobalAvgPoolLayer<Scalar>>("head.gap");
        add<DenseLayer<Scalar>>("head.dense", classes, true);
    }
};

Index scaled(Index c, double multiplier) { return std::max<Index>(1, static_cast<Index>(c * multiplier)); }

} // namespace

template <typename Scalar>
Model<Scalar> build_vgg8(const ModelSpec& spec)
{
    spec.validate();
    if (!is_vgg(spec.family)) throw ArgumentError("build_vgg8: not a VGG family");
    constexpr std::array<Index, 8> kWidths{64, 64, 128, 128, 256, 256, 512, 512};
    Stack<Scalar> s;
    for (int i = 0; i < 8; ++i) {
        const int block = i / 2 + 1;
        const std::string name = "block" + std::to_string(block) + ".conv" + std::to_string(i % 2 + 1);
        const Index width = std::max<Index>(1, kWidths[i] / spec.width_divisor);
        if (i < 2 || spec.family == Family::vgg8)
            s.conv_bn_relu(name, 3, width, 1, true);
        else if (spec.family == Family::xvgg8)
            s.unit_bn_relu(name, width, 1, DepthwiseConvention{false, false, false}, true, std::nullopt);
        else
            s.unit_bn_relu(name, width, 1, DepthwiseConvention{true, true, spec.dw_relu}, true, spec.pool_spec());
        if (i % 2 == 1)
            s.template add<MaxPoolLayer<Scalar>>("block" + std::to_string(block) + ".pool",
                                                 nn::MaxPoolSpec{2, 2, nn::Padding::valid});
    }
    s.head(spec.classes);
    return Model<Scalar>(to_string(spec.family), spec.input, std::move(s.layers));
}

template <typename Scalar>
Model<Scalar> build_mobilenet(const ModelSpec& spec)
{
    spec.validate();
    if (spec.family != Family::mobilenet_v1 && spec.family != Family::mobilenet_compact)
        throw ArgumentError("build_mobilenet: not a MobileNet family");
    constexpr std::array<Index, 13> kWidths{64, 128, 128, 256, 256, 512, 512, 512, 512, 512, 512, 1024, 1024};
    constexpr std::array<Index, 13> kStrides{1, 2, 1, 2, 1, 2, 1, 1, 1, 1, 1, 2, 1};
    const double alpha = spec.width_multiplier;
    Stack<Scalar> s;
    s.conv_bn_relu("stem.conv", 3, scaled(32, alpha), 2, false);
    for (std::size_t i = 0; i < kWidths.size(); ++i) {
        const std::string name = "block" + std::to_string(i + 1);
        if (spec.family == Family::mobilenet_v1)
            s.unit_bn_relu(name, scaled(kWidths[i], alpha), kStrides[i], DepthwiseConvention{false, true, true}, false,
                           std::nullopt);
        else
            s.unit_bn_relu(name, kWidths[i], kStrides[i], DepthwiseConvention{false, true, spec.dw_relu}, false,
                           spec.pool_spec());
    }
    s.head(spec.classes);
    return Model<Scalar>(spec.family == Family::mobilenet_v1 ? "mobilenet_v1" : "mobilenet_compact", spec.input,
                         std::move(s.layers));
}

template <typename Scalar>
Model<Scalar> build_resnet_like(const ModelSpec& spec)
{
    spec.validate();
    if (spec.family != Family::resnet_like && spec.family != Family::resnet_compact)
        throw ArgumentError("build_resnet_like: not a ResNet family");
    struct StageDef {
        Index width, blocks, stride;
    };
    constexpr std::array<StageDef, 4> kStages{{{64, 3, 1}, {128, 4, 2}, {256, 6, 2}, {512, 3, 2}}};
    constexpr Index kExpansion = 4;
    const bool compact = spec.family == Family::resnet_compact;

    Stack<Scalar> s;
    s.conv_bn_relu("stem.conv", 7, 64, 2, true);
    s.template add<MaxPoolLayer<Scalar>>("stem.pool", nn::MaxPoolSpec{3, 2, nn::Padding::same});

    for (std::size_t st = 0; st < kStages.size(); ++st) {
        const auto [width, blocks, stride] = kStages[st];
        const Index out = width * kExpansion;
        for (Index b = 0; b < blocks; ++b) {
            const std::string name = "stage" + std::to_string(st + 2) + ".block" + std::to_string(b + 1);
            const Index block_stride = b == 0 ? stride : 1;
            auto main = std::make_unique<SequentialLayer<Scalar>>(name + ".main");
            main->push(std::make_unique<Conv2dLayer<Scalar>>(name + ".conv1", ConvKind::pointwise, 1, width,
                                                             block_stride, true));
            main->push(std::make_unique<BatchNormLayer<Scalar>>(name + ".conv1.bn"));
            main->push(std::make_unique<ReluLayer<Scalar>>(name + ".conv1.relu"));
            if (compact) {
                main->push(std::make_unique<DepthwiseUnitLayer<Scalar>>(
                    name + ".compact", 3, out, 1, DepthwiseConvention{true, true, spec.dw_relu}, true,
                    spec.pool_spec()));
                main->push(std::make_unique<BatchNormLayer<Scalar>>(name + ".compact.bn"));
            } else {
                main->push(std::make_unique<Conv2dLayer<Scalar>>(name + ".conv2", ConvKind::standard, 3, width, 1, true));
                main->push(std::make_unique<BatchNormLayer<Scalar>>(name + ".conv2.bn"));
                main->push(std::make_unique<ReluLayer<Scalar>>(name + ".conv2.relu"));
                main->push(std::make_unique<Conv2dLayer<Scalar>>(name + ".conv3", ConvKind::pointwise, 1, out, 1, true));
                main->push(std::make_unique<BatchNormLayer<Scalar>>(name + ".conv3.bn"));
            }
            LayerPtr<Scalar> shortcut;
            if (b == 0) {
                auto sc = std::make_unique<SequentialLayer<Scalar>>(name + ".shortcut");
                sc->push(std::make_unique<Conv2dLayer<Scalar>>(name + ".shortcut.conv", ConvKind::pointwise, 1, out,
                                                               block_stride, true));
                sc->push(std::make_unique<BatchNormLayer<Scalar>>(name + ".shortcut.bn"));
                shortcut = std::move(sc);
            }
            s.layers.push_back(std::make_unique<ResidualLayer<Scalar>>(name, std::move(main), std::move(shortcut)));
            s.template add<ReluLayer<Scalar>>(name + ".relu");
        }
    }
    s.head(spec.classes);
    return Model<Scalar>(compact ? "resnet_compact" : "resnet_like", spec.input, std::move(s.layers));
}

template <typename Scalar>
Model<Scalar> build_model(const ModelSpec& spec)
{
    switch (spec.family) {
    case Family::vgg8:
    case Family::xvgg8:
    case Family::vgg_compact: return build_vgg8<Scalar>(spec);
    case Family::mobilenet_v1:
    case Family::mobilenet_compact: return build_mobilenet<Scalar>(spec);
    case Family::resnet_like:
    case Family::resnet_compact: return build_resnet_like<Scalar>(spec);
    }
    throw ArgumentError("unknown family");
}

#define COMPACTNET_INSTANTIATE(S)                                                                                      \
    template Model<S> build_vgg8<S>(const ModelSpec&);                                                                 \
    template Model<S> build_mobilenet<S>(const ModelSpec&);                                                            \
    template Model<S> build_resnet_like<S>(const ModelSpec&);                                                          \
    template Model<S> build_model<S>(const ModelSpec&);

COMPACTNET_INSTANTIATE(float)
COMPACTNET_INSTANTIATE(double)

#undef COMPACTNET_INSTANTIATE

} // namespace compactnet::zoo

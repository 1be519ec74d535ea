// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "compactnet/zoo/model.hpp"
#include "compactnet/zoo/model_spec.hpp"

namespace compactnet::zoo {

/// Eight 3x3 convolutions in four two-layer blocks (64, 64, 128, 128, 256,
/// 256, 512, 512), each followed by BN and ReLU, a 2x2 max pool after every
/// block, then global average pooling and a dense classifier. All
/// convolutions carry a bias. Layers 3-8 become depthwise separable units
/// (xvgg8: depthwise without bias or BN) or compact units (vgg_compact:
/// depthwise with bias + BN + ReLU).
template <typename Scalar>
Model<Scalar> build_vgg8(const ModelSpec& spec);

/// MobileNet v1: 3x3/2 stem to 32 channels, 13 depthwise separable blocks,
/// no convolution biases, BN after every convolution. The compact family
/// swaps each separable block for a compact unit at width multiplier 1.
template <typename Scalar>
Model<Scalar> build_mobilenet(const ModelSpec& spec);

/// 50-layer bottleneck network (stages of 3, 4, 6, 3 blocks). The compact
/// family replaces each bottleneck's 3x3 and trailing 1x1 with one compact
/// unit.
template <typename Scalar>
Model<Scalar> build_resnet_like(const ModelSpec& spec);

template <typename Scalar>
Model<Scalar> build_model(const ModelSpec& spec);

} // namespace compactnet::zoo

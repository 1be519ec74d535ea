// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "compactnet/tensor.hpp"
#include "compactnet/zoo/layer_spec.hpp"

namespace compactnet::data {

/// Samples (n, c, h, w) and their labels.
struct Split {
    TensorF x;
    std::vector<int> y;

    Index size() const { return static_cast<Index>(y.size()); }
    zoo::FeatureShape sample_shape() const { return {x.shape().c(), x.shape().h(), x.shape().w()}; }
};

enum class ZScoreAxis { global, per_channel };

struct ZScoreStats {
    ZScoreAxis axis = ZScoreAxis::per_channel;
    std::vector<double> mean;
    std::vector<double> stddev; // already eps-guarded
};

/// Zero-variance features get unit scale, so a constant input maps to zeros.
inline constexpr double kZScoreMinStd = 1e-8;

ZScoreStats fit_zscore(const TensorF& x, ZScoreAxis axis);
TensorF apply_zscore(const TensorF& x, const ZScoreStats& stats);
/// Fits on `x` and applies to `x`.
TensorF zscore(const TensorF& x, ZScoreAxis axis = ZScoreAxis::per_channel);

struct Dataset {
    Split train;
    Split val;
    Index classes = 0;
    ZScoreStats stats; // fitted on train, applied to both

    void validate() const;
};

/// Normalizes both splits with statistics of the training split.
void normalize(Dataset& ds, ZScoreAxis axis = ZScoreAxis::per_channel);

/// Oriented sinusoidal gratings: class k has orientation pi * (k mod 5) / 5
/// and 3 * (1 + k / 5) cycles per image, with amplitude and phase jitter plus
/// gaussian pixel noise (sigma 0.5). Classes are balanced and interleaved.
Split synth_split(Index classes, Index n_per_class, const zoo::FeatureShape& shape, std::uint64_t seed);

/// Train and val drawn from independent streams of `seed`, then z-scored.
Dataset synth_dataset(Index classes, Index train_per_class, Index val_per_class, const zoo::FeatureShape& shape,
                      std::uint64_t seed);

inline constexpr Index kCifarRecordBytes = 3073;
inline constexpr Index kCifarClasses = 10;

/// One CIFAR-10 binary batch file, pixels scaled to [0, 1].
Split load_cifar10_batch(const std::string& path);

/// data_batch_1..5.bin as train and test_batch.bin as val. With
/// subset_fraction < 1 each split is reduced to a seeded random subset
/// (original file order kept). Both splits are z-scored per channel with
/// train statistics.
Dataset load_cifar10(const std::string& dir, double subset_fraction = 1.0, std::uint64_t seed = 0);

/// Copies the samples at `indices` into a contiguous batch.
Split gather(const Split& s, std::span<const Index> indices);

/// Writes a split in the CIFAR-10 binary layout (test fixtures).
void write_cifar10_batch(const std::string& path, const Split& s);

} // namespace compactnet::data

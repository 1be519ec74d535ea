// SPDX-License-Identifier: Apache-2.0
#include "compactnet/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "compactnet/prng.hpp"

namespace compactnet::data {

namespace {

struct Axis {
    Index groups;      // number of statistics
    Index inner;       // contiguous run per (sample, group)
    Index samples;
};

Axis axis_layout(const TensorF& x, ZScoreAxis axis)
{
    if (x.empty()) throw ArgumentError("zscore of an empty tensor");
    if (axis == ZScoreAxis::global) return {1, x.size(), 1};
    if (x.shape().rank() != 4) throw ShapeError("per-channel zscore needs a rank-4 tensor, got " + x.shape().str());
    return {x.shape().c(), x.shape().h() * x.shape().w(), x.shape().n()};
}

std::vector<Index> seeded_subset(Index n, double fraction, Prng& prng)
{
    std::vector<Index> idx(n);
    for (Index i = 0; i < n; ++i) idx[i] = i;
    if (fraction >= 1.0) return idx;
    for (Index i = n - 1; i > 0; --i) std::swap(idx[i], idx[prng.below(static_cast<std::uint64_t>(i) + 1)]);
    const Index keep = std::max<Index>(1, static_cast<Index>(std::llround(fraction * static_cast<double>(n))));
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    return idx;
}

Split concat(std::vector<Split>& parts)
{
    Index n = 0;
    for (const auto& p : parts) n += p.size();
    const auto fs = parts.front().sample_shape();
    Split out{TensorF(Shape{n, fs.c, fs.h, fs.w}), {}};
    Index offset = 0;
    for (auto& p : parts) {
        std::copy(p.x.span().begin(), p.x.span().end(), out.x.data() + offset);
        offset += p.x.size();
        out.y.insert(out.y.end(), p.y.begin(), p.y.end());
    }
    return out;
}

} // namespace

ZScoreStats fit_zscore(const TensorF& x, ZScoreAxis axis)
{
    const Axis a = axis_layout(x, axis);
    ZScoreStats st{axis, std::vector<double>(a.groups, 0.0), std::vector<double>(a.groups, 0.0)};
    const double count = static_cast<double>(a.samples * a.inner);
    for (Index g = 0; g < a.groups; ++g) {
        double sum = 0.0;
        for (Index n = 0; n < a.samples; ++n) {
            const float* p = x.data() + (n * a.groups + g) * a.inner;
            for (Index i = 0; i < a.inner; ++i) sum += p[i];
        }
        const double mean = sum / count;
        double sq = 0.0;
        for (Index n = 0; n < a.samples; ++n) {
            const float* p = x.data() + (n * a.groups + g) * a.inner;
            for (Index i = 0; i < a.inner; ++i) {
                const double d = p[i] - mean;
                sq += d * d;
            }
        }
        const double sd = std::sqrt(sq / count);
        st.mean[g] = mean;
        st.stddev[g] = sd < kZScoreMinStd ? 1.0 : sd;
    }
    return st;
}

TensorF apply_zscore(const TensorF& x, const ZScoreStats& stats)
{
    const Axis a = axis_layout(x, stats.axis);
    if (static_cast<Index>(stats.mean.size()) != a.groups)
        throw ShapeError("zscore statistics cover " + std::to_string(stats.mean.size()) + " features, input has " +
                         std::to_string(a.groups));
    TensorF out(x.shape());
    for (Index n = 0; n < a.samples; ++n)
        for (Index g = 0; g < a.groups; ++g) {
            const Index base = (n * a.groups + g) * a.inner;
            const double m = stats.mean[g], s = stats.stddev[g];
            for (Index i = 0; i < a.inner; ++i)
                out[base + i] = static_cast<float>((x[base + i] - m) / s);
        }
    return out;
}

TensorF zscore(const TensorF& x, ZScoreAxis axis) { return apply_zscore(x, fit_zscore(x, axis)); }

void Dataset::validate() const
{
    if (classes < 1) throw ArgumentError("dataset needs at least one class");
    for (const Split* s : {&train, &val}) {
        if (s->size() == 0) throw ArgumentError("dataset split is empty");
        if (s->x.shape().rank() != 4 || s->x.shape().n() != s->size())
            throw ShapeError("samples " + s->x.shape().str() + " do not match " + std::to_string(s->size()) +
                             " labels");
        for (int y : s->y)
            if (y < 0 || y >= classes)
                throw ArgumentError("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
    if (!(train.sample_shape() == val.sample_shape())) throw ShapeError("train and val sample shapes differ");
}

void normalize(Dataset& ds, ZScoreAxis axis)
{
    ds.stats = fit_zscore(ds.train.x, axis);
    ds.train.x = apply_zscore(ds.train.x, ds.stats);
    ds.val.x = apply_zscore(ds.val.x, ds.stats);
}

Split synth_split(Index classes, Index n_per_class, const zoo::FeatureShape& shape, std::uint64_t seed)
{
    if (classes < 1 || n_per_class < 1) throw ArgumentError("synthetic dataset needs classes >= 1 and n_per_class >= 1");
    if (shape.c < 1 || shape.h < 1 || shape.w < 1) throw ShapeError("bad sample shape " + shape.str());
    constexpr double pi = std::numbers::pi;
    const Index n = classes * n_per_class;
    Split s{TensorF(Shape{n, shape.c, shape.h, shape.w}), std::vector<int>(n)};
    Prng prng(seed);
    for (Index i = 0; i < n; ++i) {
        const int k = static_cast<int>(i % classes);
        s.y[i] = k;
        const double theta = pi * (k % 5) / 5.0;
        const double cycles = 3.0 * (1 + k / 5);
        const double phase = prng.uniform(-pi / 4, pi / 4);
        const double amp = prng.uniform(0.8, 1.2);
        const double cx = std::cos(theta) * cycles / static_cast<double>(shape.w);
        const double cy = std::sin(theta) * cycles / static_cast<double>(shape.h);
        for (Index c = 0; c < shape.c; ++c) {
            float* p = s.x.plane(i, c);
            for (Index r = 0; r < shape.h; ++r)
                for (Index q = 0; q < shape.w; ++q)
                    p[r * shape.w + q] = static_cast<float>(
                        amp * std::sin(2 * pi * (cx * q + cy * r) + phase) + 0.5 * prng.normal());
        }
    }
    return s;
}

Dataset synth_dataset(Index classes, Index train_per_class, Index val_per_class, const zoo::FeatureShape& shape,
                      std::uint64_t seed)
{
    Prng root(seed);
    Prng train_stream = root.split();
    Prng val_stream = root.split();
    Dataset ds{synth_split(classes, train_per_class, shape, train_stream.next_u64()),
               synth_split(classes, val_per_class, shape, val_stream.next_u64()), classes, {}};
    normalize(ds);
    return ds;
}

Split load_cifar10_batch(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open CIFAR-10 batch '" + path + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const Index size = static_cast<Index>(bytes.size());
    if (size == 0 || size % kCifarRecordBytes != 0)
        throw FormatError("CIFAR-10 batch '" + path + "' has " + std::to_string(size) +
                          " bytes, not a positive multiple of " + std::to_string(kCifarRecordBytes));
    const Index n = size / kCifarRecordBytes;
    Split s{TensorF(Shape{n, 3, 32, 32}), std::vector<int>(n)};
    for (Index i = 0; i < n; ++i) {
        const unsigned char* rec = bytes.data() + i * kCifarRecordBytes;
        if (rec[0] >= kCifarClasses)
            throw FormatError("CIFAR-10 batch '" + path + "' record " + std::to_string(i) + " has label byte " +
                              std::to_string(rec[0]));
        s.y[i] = rec[0];
        float* dst = s.x.data() + i * 3072;
        for (Index j = 0; j < 3072; ++j) dst[j] = static_cast<float>(rec[1 + j]) / 255.0f;
    }
    return s;
}

Dataset load_cifar10(const std::string& dir, double subset_fraction, std::uint64_t seed)
{
    if (!(subset_fraction > 0.0 && subset_fraction <= 1.0)) throw ArgumentError("subset_fraction must be in (0, 1]");
    namespace fs = std::filesystem;
    std::vector<Split> parts;
    for (int b = 1; b <= 5; ++b) parts.push_back(load_cifar10_batch((fs::path(dir) / ("data_batch_" + std::to_string(b) + ".bin")).string()));
    Split train = concat(parts);
    Split val = load_cifar10_batch((fs::path(dir) / "test_batch.bin").string());

    Prng prng(seed);
    Prng train_stream = prng.split();
    Prng val_stream = prng.split();
    const auto ti = seeded_subset(train.size(), subset_fraction, train_stream);
    const auto vi = seeded_subset(val.size(), subset_fraction, val_stream);
    Dataset ds{gather(train, ti), gather(val, vi), kCifarClasses, {}};
    normalize(ds);
    return ds;
}

Split gather(const Split& s, std::span<const Index> indices)
{
    if (indices.empty()) throw ArgumentError("gather of an empty index set");
    const auto fs = s.sample_shape();
    const Index stride = fs.c * fs.h * fs.w;
    Split out{TensorF(Shape{static_cast<Index>(indices.size()), fs.c, fs.h, fs.w}), {}};
    out.y.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const Index j = indices[i];
        if (j < 0 || j >= s.size()) throw ArgumentError("gather index " + std::to_string(j) + " out of range");
        std::copy_n(s.x.data() + j * stride, stride, out.x.data() + static_cast<Index>(i) * stride);
        out.y.push_back(s.y[j]);
    }
    return out;
}

void write_cifar10_batch(const std::string& path, const Split& s)
{
    if (!(s.sample_shape() == zoo::FeatureShape{3, 32, 32})) throw ShapeError("CIFAR-10 samples are 3x32x32");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ArgumentError("cannot open '" + path + "'");
    std::vector<unsigned char> rec(kCifarRecordBytes);
    for (Index i = 0; i < s.size(); ++i) {
        rec[0] = static_cast<unsigned char>(s.y[i]);
        const float* src = s.x.data() + i * 3072;
        for (Index j = 0; j < 3072; ++j)
            rec[1 + j] = static_cast<unsigned char>(std::clamp(std::lround(src[j] * 255.0f), 0l, 255l));
        out.write(reinterpret_cast<const char*>(rec.data()), kCifarRecordBytes);
    }
}

} // namespace compactnet::data

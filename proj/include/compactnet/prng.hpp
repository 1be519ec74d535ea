// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "compactnet/tensor.hpp"

namespace compactnet {

/// SplitMix64 (Steele, Lea & Flood 2014), version 1 of the engine's stream.
///
/// The integer sequence is fully specified by the seed and is identical on
/// every platform. `split()` derives an independent child stream, so each
/// consumer (initializer, shuffler, data synthesizer) can own a generator
/// without perturbing the others.
class Prng {
public:
    static constexpr int kVersion = 1;

    explicit Prng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64()
    {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    Prng split() { return Prng(next_u64() ^ 0x632BE59BD9B4E019ull); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, bound). Lemire-style rejection keeps it unbiased.
    std::uint64_t below(std::uint64_t bound)
    {
        if (bound == 0) throw ArgumentError("Prng::below: bound must be positive");
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// I.i.d. N(0, 2 / fan_in) entries.
template <typename Scalar>
Tensor<Scalar> he_init(Prng& prng, const Shape& shape, Index fan_in)
{
    if (fan_in < 1) throw ArgumentError("he_init: fan_in must be >= 1");
    Tensor<Scalar> t(shape);
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(stddev * prng.normal());
    return t;
}

template <typename Scalar>
Tensor<Scalar> uniform_tensor(Prng& prng, const Shape& shape, double lo = -1.0, double hi = 1.0)
{
    Tensor<Scalar> t(shape);
    for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(prng.uniform(lo, hi));
    return t;
}

template <typename Scalar>
Tensor<Scalar> normal_tensor(Prng& prng, const Shape& shape)
{
    Tensor<Scalar> t(shape);
    for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(prng.normal());
    return t;
}

} // namespace compactnet

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <span>
#include <string>

#include "compactnet/error.hpp"

namespace compactnet {

using Index = std::int64_t;

/// Up to four extents, outermost first. Rank-4 shapes are read as
/// (batch, channels, height, width).
class Shape {
public:
    static constexpr int kMaxRank = 4;

    Shape() = default;

    Shape(std::initializer_list<Index> extents)
    {
        if (extents.size() == 0 || extents.size() > kMaxRank)
            throw ShapeError("shape rank must be in [1, 4], got " + std::to_string(extents.size()));
        for (Index e : extents) dims_[rank_++] = e;
        validate();
    }

    static Shape from_span(std::span<const Index> extents)
    {
        if (extents.empty() || extents.size() > kMaxRank)
            throw ShapeError("shape rank must be in [1, 4], got " + std::to_string(extents.size()));
        Shape s;
        for (Index e : extents) s.dims_[s.rank_++] = e;
        s.validate();
        return s;
    }

    int rank() const { return rank_; }
    Index operator[](int axis) const { return dims_[axis]; }

    Index size() const
    {
        if (rank_ == 0) return 0;
        Index p = 1;
        for (int i = 0; i < rank_; ++i) p *= dims_[i];
        return p;
    }

    Index n() const { return at4(0); }
    Index c() const { return at4(1); }
    Index h() const { return at4(2); }
    Index w() const { return at4(3); }

    bool operator==(const Shape& o) const
    {
        if (rank_ != o.rank_) return false;
        return std::equal(dims_.begin(), dims_.begin() + rank_, o.dims_.begin());
    }

    std::string str() const
    {
        std::string s = "(";
        for (int i = 0; i < rank_; ++i) {
            if (i) s += ",";
            s += std::to_string(dims_[i]);
        }
        return s + ")";
    }

private:
    void validate() const
    {
        for (int i = 0; i < rank_; ++i)
            if (dims_[i] < 1) throw ShapeError("extent must be >= 1 in shape " + str());
    }

    Index at4(int axis) const
    {
        if (rank_ != 4) throw ShapeError("expected a rank-4 shape, got " + str());
        return dims_[axis];
    }

    std::array<Index, kMaxRank> dims_{};
    int rank_ = 0;
};

/// Dense row-major tensor, width fastest. A default-constructed tensor is an
/// empty placeholder (rank 0, no data); every other tensor has extents >= 1.
template <typename Scalar_>
class Tensor {
public:
    using Scalar = Scalar_;
    using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    Tensor() = default;

    explicit Tensor(const Shape& shape, Scalar fill = Scalar(0)) : shape_(shape)
    {
        if (shape.rank() == 0) throw ShapeError("tensor shape must have rank >= 1");
        data_ = Storage::Constant(shape.size(), fill);
    }

    Tensor(const Shape& shape, std::span<const Scalar> values) : Tensor(shape)
    {
        if (static_cast<Index>(values.size()) != shape.size())
            throw ShapeError("value count " + std::to_string(values.size()) +
                             " does not match shape " + shape.str());
        std::copy(values.begin(), values.end(), data_.data());
    }

    Tensor(const Shape& shape, std::initializer_list<Scalar> values)
        : Tensor(shape, std::span<const Scalar>(values.begin(), values.size()))
    {
    }

    const Shape& shape() const { return shape_; }
    Index size() const { return data_.size(); }
    bool empty() const { return data_.size() == 0; }

    Scalar* data() { return data_.data(); }
    const Scalar* data() const { return data_.data(); }
    std::span<Scalar> span() { return {data_.data(), static_cast<std::size_t>(data_.size())}; }
    std::span<const Scalar> span() const
    {
        return {data_.data(), static_cast<std::size_t>(data_.size())};
    }

    Storage& array() { return data_; }
    const Storage& array() const { return data_; }

    Index offset(Index n, Index c, Index h, Index w) const
    {
        return ((n * shape_.c() + c) * shape_.h() + h) * shape_.w() + w;
    }

    Scalar& operator()(Index n, Index c, Index h, Index w) { return data_[offset(n, c, h, w)]; }
    Scalar operator()(Index n, Index c, Index h, Index w) const
    {
        return data_[offset(n, c, h, w)];
    }

    Scalar& operator[](Index i) { return data_[i]; }
    Scalar operator[](Index i) const { return data_[i]; }

    /// Start of the (n, c) feature plane of a rank-4 tensor.
    Scalar* plane(Index n, Index c) { return data_.data() + (n * shape_.c() + c) * shape_.h() * shape_.w(); }
    const Scalar* plane(Index n, Index c) const
    {
        return data_.data() + (n * shape_.c() + c) * shape_.h() * shape_.w();
    }

    void fill(Scalar v) { data_.setConstant(v); }

    template <typename Other>
    Tensor<Other> cast() const
    {
        Tensor<Other> out(shape_);
        out.array() = data_.template cast<Other>();
        return out;
    }

    /// Reinterpret with a new shape of equal size.
    Tensor reshaped(const Shape& shape) const
    {
        if (shape.size() != size())
            throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
        Tensor out = *this;
        out.shape_ = shape;
        return out;
    }

    bool bitwise_equal(const Tensor& o) const
    {
        return shape_ == o.shape_ &&
               std::equal(span().begin(), span().end(), o.span().begin(),
                          [](Scalar a, Scalar b) {
                              return std::memcmp(&a, &b, sizeof(Scalar)) == 0;
                          });
    }

private:
    Shape shape_;
    Storage data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename Scalar>
Tensor<Scalar> tensor_new(const Shape& shape, Scalar fill)
{
    return Tensor<Scalar>(shape, fill);
}

enum class BinaryOp { add, sub, mul };

inline void require_same_shape(const Shape& a, const Shape& b, const char* what)
{
    if (!(a == b)) throw ShapeError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
}

template <typename Scalar>
Tensor<Scalar> ew_binary(const Tensor<Scalar>& a, const Tensor<Scalar>& b, BinaryOp op)
{
    require_same_shape(a.shape(), b.shape(), "ew_binary");
    Tensor<Scalar> out(a.shape());
    switch (op) {
    case BinaryOp::add: out.array() = a.array() + b.array(); break;
    case BinaryOp::sub: out.array() = a.array() - b.array(); break;
    case BinaryOp::mul: out.array() = a.array() * b.array(); break;
    }
    return out;
}

template <typename Scalar>
Tensor<Scalar> ew_scale(const Tensor<Scalar>& a, Scalar s)
{
    Tensor<Scalar> out(a.shape());
    out.array() = a.array() * s;
    return out;
}

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b)
{
    return ew_binary(a, b, BinaryOp::add);
}

template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b)
{
    return ew_binary(a, b, BinaryOp::sub);
}

template <typename Scalar>
Tensor<Scalar> operator*(const Tensor<Scalar>& a, const Tensor<Scalar>& b)
{
    return ew_binary(a, b, BinaryOp::mul);
}

template <typename Scalar>
Tensor<Scalar> operator*(const Tensor<Scalar>& a, Scalar s)
{
    return ew_scale(a, s);
}

/// In-place a += b.
template <typename Scalar>
void accumulate(Tensor<Scalar>& a, const Tensor<Scalar>& b)
{
    require_same_shape(a.shape(), b.shape(), "accumulate");
    a.array() += b.array();
}

} // namespace compactnet

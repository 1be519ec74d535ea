// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "compactnet/autograd/param_store.hpp"
#include "compactnet/tensor.hpp"

// Little-endian binary formats.
//   tensor file : "CTF1", u8 dtype (0 = f32, 1 = f64), u32 rank,
//                 rank x u32 extents, payload
//   model file  : "CTM1", u32 entry count, then per entry
//                 u32 name length, name bytes, one tensor record

namespace compactnet::io {

using AnyTensor = std::variant<TensorF, TensorD>;

void write_tensor(std::ostream& os, const TensorF& t);
void write_tensor(std::ostream& os, const TensorD& t);
AnyTensor read_tensor(std::istream& is);

/// Reads a tensor and converts it to the requested precision.
template <typename Scalar>
Tensor<Scalar> read_tensor_as(std::istream& is)
{
    return std::visit([](auto&& t) { return t.template cast<Scalar>(); }, read_tensor(is));
}

void save_tensor(const std::string& path, const AnyTensor& t);
AnyTensor load_tensor(const std::string& path);

using NamedTensors = std::vector<std::pair<std::string, AnyTensor>>;

void write_model(std::ostream& os, const NamedTensors& entries);
NamedTensors read_model(std::istream& is);

/// Writes every entry of the store (trainable or not) in store order.
template <typename Scalar>
void save_params(const std::string& path, const autograd::ParamStore<Scalar>& store);

/// Loads by name. Every store entry must be present with a matching shape;
/// extra file entries are an error as well.
template <typename Scalar>
void load_params(const std::string& path, autograd::ParamStore<Scalar>& store);

} // namespace compactnet::io

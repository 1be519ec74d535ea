// SPDX-License-Identifier: Apache-2.0
#include "compactnet/data/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <unordered_set>

namespace compactnet::io {

namespace {

constexpr char kTensorMagic[4] = {'C', 'T', 'F', '1'};
constexpr char kModelMagic[4] = {'C', 'T', 'M', '1'};
constexpr std::uint32_t kMaxNameLength = 1u << 16;

void put_u32(std::ostream& os, std::uint32_t v)
{
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v)
{
    put_u32(os, static_cast<std::uint32_t>(v));
    put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

void read_exact(std::istream& is, void* dst, std::size_t n, const char* what)
{
    is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) throw FormatError(std::string("truncated input reading ") + what);
}

std::uint32_t get_u32(std::istream& is, const char* what)
{
    unsigned char b[4];
    read_exact(is, b, 4, what);
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

std::uint64_t get_u64(std::istream& is, const char* what)
{
    const std::uint64_t lo = get_u32(is, what);
    const std::uint64_t hi = get_u32(is, what);
    return lo | hi << 32;
}

template <typename Scalar>
void write_impl(std::ostream& os, const Tensor<Scalar>& t, std::uint8_t dtype)
{
    if (t.empty()) throw ArgumentError("cannot serialize an empty tensor");
    os.write(kTensorMagic, 4);
    os.put(static_cast<char>(dtype));
    put_u32(os, static_cast<std::uint32_t>(t.shape().rank()));
    for (int i = 0; i < t.shape().rank(); ++i) {
        if (t.shape()[i] > std::numeric_limits<std::uint32_t>::max()) throw ArgumentError("extent exceeds u32");
        put_u32(os, static_cast<std::uint32_t>(t.shape()[i]));
    }
    for (Scalar v : t.span()) {
        if constexpr (sizeof(Scalar) == 4)
            put_u32(os, std::bit_cast<std::uint32_t>(v));
        else
            put_u64(os, std::bit_cast<std::uint64_t>(v));
    }
    if (!os) throw Error("write failed");
}

template <typename Scalar>
Tensor<Scalar> read_payload(std::istream& is, const Shape& shape)
{
    Tensor<Scalar> t(shape);
    for (Scalar& v : t.span()) {
        if constexpr (sizeof(Scalar) == 4)
            v = std::bit_cast<float>(get_u32(is, "tensor payload"));
        else
            v = std::bit_cast<double>(get_u64(is, "tensor payload"));
    }
    return t;
}

template <typename Stream>
Stream open_or_throw(const std::string& path, std::ios::openmode mode)
{
    Stream s(path, mode | std::ios::binary);
    if (!s) throw ArgumentError("cannot open '" + path + "'");
    return s;
}

} // namespace

void write_tensor(std::ostream& os, const TensorF& t) { write_impl(os, t, 0); }
void write_tensor(std::ostream& os, const TensorD& t) { write_impl(os, t, 1); }

AnyTensor read_tensor(std::istream& is)
{
    char magic[4];
    read_exact(is, magic, 4, "tensor magic");
    if (std::memcmp(magic, kTensorMagic, 4) != 0) throw FormatError("bad tensor magic (expected CTF1)");
    std::uint8_t dtype = 0;
    read_exact(is, &dtype, 1, "tensor dtype");
    if (dtype > 1) throw FormatError("unknown tensor dtype " + std::to_string(dtype));
    const std::uint32_t rank = get_u32(is, "tensor rank");
    if (rank < 1 || rank > static_cast<std::uint32_t>(Shape::kMaxRank))
        throw FormatError("tensor rank " + std::to_string(rank) + " outside [1, 4]");
    std::vector<Index> extents;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const std::uint32_t e = get_u32(is, "tensor extents");
        if (e == 0) throw FormatError("tensor extent of zero");
        extents.push_back(e);
    }
    const Shape shape = Shape::from_span(extents);
    if (dtype == 0) return read_payload<float>(is, shape);
    return read_payload<double>(is, shape);
}

void save_tensor(const std::string& path, const AnyTensor& t)
{
    auto os = open_or_throw<std::ofstream>(path, std::ios::out | std::ios::trunc);
    std::visit([&](const auto& v) { write_tensor(os, v); }, t);
}

AnyTensor load_tensor(const std::string& path)
{
    auto is = open_or_throw<std::ifstream>(path, std::ios::in);
    return read_tensor(is);
}

void write_model(std::ostream& os, const NamedTensors& entries)
{
    os.write(kModelMagic, 4);
    put_u32(os, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, t] : entries) {
        if (name.size() > kMaxNameLength) throw ArgumentError("tensor name too long");
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        std::visit([&](const auto& v) { write_tensor(os, v); }, t);
    }
    if (!os) throw Error("write failed");
}

NamedTensors read_model(std::istream& is)
{
    char magic[4];
    read_exact(is, magic, 4, "model magic");
    if (std::memcmp(magic, kModelMagic, 4) != 0) throw FormatError("bad model magic (expected CTM1)");
    const std::uint32_t count = get_u32(is, "entry count");
    NamedTensors out;
    std::unordered_set<std::string> seen;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t len = get_u32(is, "name length");
        if (len > kMaxNameLength) throw FormatError("tensor name length " + std::to_string(len) + " too large");
        std::string name(len, '\0');
        read_exact(is, name.data(), len, "tensor name");
        if (!seen.insert(name).second) throw FormatError("duplicate tensor name '" + name + "'");
        out.emplace_back(std::move(name), read_tensor(is));
    }
    return out;
}

template <typename Scalar>
void save_params(const std::string& path, const autograd::ParamStore<Scalar>& store)
{
    NamedTensors entries;
    for (std::size_t i = 0; i < store.size(); ++i) entries.emplace_back(store[i].name, store[i].value);
    auto os = open_or_throw<std::ofstream>(path, std::ios::out | std::ios::trunc);
    write_model(os, entries);
}

template <typename Scalar>
void load_params(const std::string& path, autograd::ParamStore<Scalar>& store)
{
    auto is = open_or_throw<std::ifstream>(path, std::ios::in);
    NamedTensors entries = read_model(is);
    if (entries.size() != store.size())
        throw FormatError("checkpoint has " + std::to_string(entries.size()) + " tensors, model has " +
                          std::to_string(store.size()));
    std::vector<Tensor<Scalar>> values(store.size());
    for (auto& [name, t] : entries) {
        auto* p = store.find(name);
        if (!p) throw FormatError("checkpoint tensor '" + name + "' is not a model parameter");
        Tensor<Scalar> v = std::visit([](auto&& x) { return x.template cast<Scalar>(); }, t);
        if (!(v.shape() == p->value.shape()))
            throw FormatError("checkpoint tensor '" + name + "' has shape " + v.shape().str() + ", expected " +
                              p->value.shape().str());
        for (std::size_t i = 0; i < store.size(); ++i)
            if (&store[i] == p) values[i] = std::move(v);
    }
    store.restore(values);
}

template void save_params(const std::string&, const autograd::ParamStore<float>&);
template void save_params(const std::string&, const autograd::ParamStore<double>&);
template void load_params(const std::string&, autograd::ParamStore<float>&);
template void load_params(const std::string&, autograd::ParamStore<double>&);

} // namespace compactnet::io

// SPDX-License-Identifier: Apache-2.0
#include "compactnet/zoo/model_spec.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace compactnet::zoo {

const char* to_string(LayerKind k)
{
    switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::separable: return "separable";
    case LayerKind::compact: return "compact";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::global_avg_pool: return "global_avg_pool";
    case LayerKind::dense: return "dense";
    case LayerKind::add: return "add";
    }
    return "?";
}

const char* to_string(Family f)
{
    switch (f) {
    case Family::vgg8: return "vgg8";
    case Family::xvgg8: return "xvgg8";
    case Family::vgg_compact: return "vgg_compact";
    case Family::resnet_like: return "resnet_like";
    case Family::resnet_compact: return "resnet_compact";
    case Family::mobilenet_v1: return "mobilenet_v1";
    case Family::mobilenet_compact: return "mobilenet_compact";
    }
    return "?";
}

Family parse_family(const std::string& s)
{
    for (Family f : {Family::vgg8, Family::xvgg8, Family::vgg_compact, Family::resnet_like, Family::resnet_compact,
                     Family::mobilenet_v1, Family::mobilenet_compact})
        if (s == to_string(f)) return f;
    throw ArgumentError("unknown architecture '" + s +
                        "' (expected vgg8, xvgg8, vgg_compact, resnet_like, resnet_compact, mobilenet_v1, "
                        "mobilenet_compact)");
}

bool is_compact(Family f)
{
    return f == Family::vgg_compact || f == Family::resnet_compact || f == Family::mobilenet_compact;
}

bool is_vgg(Family f) { return f == Family::vgg8 || f == Family::xvgg8 || f == Family::vgg_compact; }

namespace {

Index parse_index(const std::string& key, const std::string& value)
{
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || value.empty()) throw ArgumentError(key + ": expected an integer, got '" + value + "'");
    return static_cast<Index>(v);
}

double parse_double(const std::string& key, const std::string& value)
{
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || value.empty()) throw ArgumentError(key + ": expected a number, got '" + value + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value)
{
    if (value == "1" || value == "true" || value == "yes") return true;
    if (value == "0" || value == "false" || value == "no") return false;
    throw ArgumentError(key + ": expected a boolean, got '" + value + "'");
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

FeatureShape parse_feature_shape(const std::string& s)
{
    FeatureShape f;
    Index* dims[3] = {&f.c, &f.h, &f.w};
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
        const std::size_t next = i < 2 ? s.find('x', pos) : s.size();
        if (next == std::string::npos) throw ArgumentError("input shape must look like CxHxW, got '" + s + "'");
        *dims[i] = parse_index("input", s.substr(pos, next - pos));
        if (*dims[i] < 1) throw ArgumentError("input extents must be >= 1, got '" + s + "'");
        pos = next + 1;
    }
    return f;
}

void ModelSpec::validate() const
{
    if (compact_factor < 1) throw ArgumentError("compact factor C must be >= 1");
    if (!is_compact(family) && compact_factor != 1)
        throw ArgumentError(std::string("compact factor only applies to compact families, not ") + to_string(family));
    if (classes < 1) throw ArgumentError("classes must be >= 1");
    if (!(width_multiplier > 0 && width_multiplier <= 1))
        throw ArgumentError("width multiplier must be in (0, 1]");
    if (width_multiplier != 1.0 && family != Family::mobilenet_v1)
        throw ArgumentError("width multiplier applies to mobilenet_v1 only");
    if (width_divisor < 1) throw ArgumentError("width divisor must be >= 1");
    if (width_divisor != 1 && !is_vgg(family)) throw ArgumentError("width divisor applies to VGG families only");
    if (input.c < 1 || input.h < 1 || input.w < 1) throw ArgumentError("input extents must be >= 1");
}

std::string ModelSpec::describe() const
{
    std::ostringstream os;
    os << "arch=" << to_string(family) << " C=" << compact_factor << " pool=" << nn::to_string(pool)
       << " width_multiplier=" << width_multiplier << " width_divisor=" << width_divisor << " classes=" << classes
       << " input=" << input.str() << " dw_relu=" << (dw_relu ? 1 : 0);
    return os.str();
}

KeyValues parse_key_values(std::istream& in, const std::string& source)
{
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw FormatError(source + ":" + std::to_string(lineno) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

KeyValues load_key_values(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open config file '" + path + "'");
    return parse_key_values(in, path);
}

bool apply_model_key(ModelSpec& spec, const std::string& key, const std::string& value)
{
    if (key == "family" || key == "arch") spec.family = parse_family(value);
    else if (key == "C" || key == "compact_factor") spec.compact_factor = parse_index(key, value);
    else if (key == "pool") spec.pool = nn::parse_pool_variant(value);
    else if (key == "width_multiplier") spec.width_multiplier = parse_double(key, value);
    else if (key == "width_divisor") spec.width_divisor = parse_index(key, value);
    else if (key == "classes") spec.classes = parse_index(key, value);
    else if (key == "input") spec.input = parse_feature_shape(value);
    else if (key == "dw_relu") spec.dw_relu = parse_bool(key, value);
    else return false;
    return true;
}

ModelSpec model_spec_from(const KeyValues& kv)
{
    ModelSpec spec;
    for (const auto& [k, v] : kv)
        if (!apply_model_key(spec, k, v)) throw ArgumentError("unknown model key '" + k + "'");
    spec.validate();
    return spec;
}

} // namespace compactnet::zoo

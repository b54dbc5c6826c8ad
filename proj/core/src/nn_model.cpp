// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "lsic/audio.hpp"
#include "lsic/error.hpp"
#include "lsic/half.hpp"
#include "lsic/labels.hpp"
#include "lsic/nn/model.hpp"

namespace lsic::nn {

namespace {

constexpr std::pair<LayerKind, std::string_view> kLayerNames[] = {
    {LayerKind::Conv2d, "conv2d"},
    {LayerKind::BatchNorm, "batchnorm"},
    {LayerKind::Relu, "relu"},
    {LayerKind::MaxPool2x2, "maxpool2x2"},
    {LayerKind::GlobalMaxPool, "global_max_pool"},
    {LayerKind::Flatten, "flatten"},
    {LayerKind::Dropout, "dropout"},
    {LayerKind::Dense, "dense"},
    {LayerKind::Softmax, "softmax"},
};

// Uniform [0, 1) from a 64-bit draw, independent of the standard library's
// distribution implementations.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<float> he_uniform(std::size_t count, std::size_t fan_in, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<float> w(count);
    for (float& v : w) v = static_cast<float>((2.0 * unit_uniform(rng) - 1.0) * limit);
    return w;
}

}  // namespace

std::string_view to_string(LayerKind kind) {
    for (const auto& [k, name] : kLayerNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

std::optional<LayerKind> parse_layer_kind(std::string_view s) {
    for (const auto& [k, name] : kLayerNames) {
        if (name == s) return k;
    }
    return std::nullopt;
}

std::string_view to_string(ArchVariant v) { return v == ArchVariant::Gmp ? "gmp" : "flatten"; }
std::string_view to_string(HeadKind v) { return v == HeadKind::SingleIntent ? "single_intent" : "slots"; }

std::string_view to_string(QuantMode v) {
    switch (v) {
        case QuantMode::Fp32: return "fp32_baseline";
        case QuantMode::Fp16Weights: return "fp16_weights";
        case QuantMode::Int8Weights: return "int8_weights";
        case QuantMode::Int8Full: return "int8_full";
    }
    return "unknown";
}

std::string_view to_string(DType v) {
    switch (v) {
        case DType::F32: return "f32";
        case DType::F16: return "f16";
        case DType::I8: return "i8";
    }
    return "unknown";
}

std::optional<ArchVariant> parse_arch(std::string_view s) {
    if (s == "gmp") return ArchVariant::Gmp;
    if (s == "flatten") return ArchVariant::Flatten;
    return std::nullopt;
}

std::optional<HeadKind> parse_head_kind(std::string_view s) {
    if (s == "single_intent" || s == "single") return HeadKind::SingleIntent;
    if (s == "slots") return HeadKind::Slots;
    return std::nullopt;
}

std::optional<QuantMode> parse_quant_mode(std::string_view s) {
    for (auto m : {QuantMode::Fp32, QuantMode::Fp16Weights, QuantMode::Int8Weights, QuantMode::Int8Full}) {
        if (to_string(m) == s) return m;
    }
    if (s == "fp32") return QuantMode::Fp32;
    if (s == "fp16") return QuantMode::Fp16Weights;
    if (s == "int8") return QuantMode::Int8Weights;
    return std::nullopt;
}

WeightTensor WeightTensor::from_f32(std::vector<std::size_t> shape, std::vector<float> values) {
    WeightTensor t;
    t.shape = std::move(shape);
    t.f32 = std::move(values);
    return t;
}

std::size_t WeightTensor::elements() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::size_t WeightTensor::payload_bytes() const {
    switch (dtype) {
        case DType::F32: return f32.size() * 4;
        case DType::F16: return f16.size() * 2;
        case DType::I8: return i8.size();
    }
    return 0;
}

std::vector<float> WeightTensor::values() const {
    switch (dtype) {
        case DType::F32: return f32;
        case DType::F16: {
            std::vector<float> out(f16.size());
            for (std::size_t i = 0; i < f16.size(); ++i) out[i] = half_bits_to_float(f16[i]);
            return out;
        }
        case DType::I8: {
            std::vector<float> out(i8.size());
            for (std::size_t i = 0; i < i8.size(); ++i) {
                out[i] = scale * static_cast<float>(static_cast<int>(i8[i]) - zero_point);
            }
            return out;
        }
    }
    return {};
}

const WeightTensor& ModelGraph::weight(const std::string& name) const {
    auto it = weights.find(name);
    if (it == weights.end()) throw Error(ErrorCode::ShapeMismatch, "missing weight " + name);
    return it->second;
}

bool is_trainable_weight(std::string_view name) {
    return !name.ends_with("/moving_mean") && !name.ends_with("/moving_var");
}

std::size_t count_params(const ModelGraph& model) {
    std::size_t total = 0;
    for (const auto& [name, t] : model.weights) {
        if (is_trainable_weight(name)) total += t.elements();
    }
    return total;
}

std::size_t min_input_frames(const ModelGraph& model) {
    std::size_t need = 1;
    for (const auto& l : model.layers) {
        if (l.kind == LayerKind::MaxPool2x2) need *= 2;
    }
    return need;
}

ModelGraph build_model(ArchVariant arch, std::size_t n_mfcc, HeadKind heads, const ModelOptions& options) {
    if (n_mfcc != 10 && n_mfcc != 13) {
        throw Error(ErrorCode::ConfigInvalid, "n_mfcc must be 10 or 13, got " + std::to_string(n_mfcc));
    }
    if (options.block_filters.empty()) throw Error(ErrorCode::ConfigInvalid, "need at least one conv block");
    if (options.dense_units <= 0) throw Error(ErrorCode::ConfigInvalid, "dense_units must be positive");
    if (!(options.dropout >= 0.0f && options.dropout < 1.0f)) {
        throw Error(ErrorCode::ConfigInvalid, "dropout rate must be in [0, 1)");
    }

    ModelGraph g;
    g.arch = arch;
    g.head_kind = heads;
    g.frontend = options.frontend;
    g.frontend.n_mfcc = n_mfcc;
    g.frontend.validate();
    g.n_mfcc = n_mfcc;
    g.input_frames = options.input_frames != 0 ? options.input_frames : g.frontend.frames_for(kWindowSamples);

    std::mt19937_64 rng(options.seed);
    std::size_t h = g.input_frames;
    std::size_t w = n_mfcc;
    std::size_t c = 1;
    int block = 1;
    for (int filters : options.block_filters) {
        if (filters <= 0) throw Error(ErrorCode::ConfigInvalid, "filter count must be positive");
        if (h < 2 || w < 2) throw Error(ErrorCode::ConfigInvalid, "input too small for another pooling block");
        const std::string b = std::to_string(block++);
        const auto f = static_cast<std::size_t>(filters);
        g.layers.push_back({LayerKind::Conv2d, "conv" + b, filters});
        g.weights["conv" + b + "/kernel"] = WeightTensor::from_f32({3, 3, c, f}, he_uniform(9 * c * f, 9 * c, rng));
        g.weights["conv" + b + "/bias"] = WeightTensor::from_f32({f}, std::vector<float>(f, 0.0f));
        g.layers.push_back({LayerKind::BatchNorm, "bn" + b});
        g.weights["bn" + b + "/gamma"] = WeightTensor::from_f32({f}, std::vector<float>(f, 1.0f));
        g.weights["bn" + b + "/beta"] = WeightTensor::from_f32({f}, std::vector<float>(f, 0.0f));
        g.weights["bn" + b + "/moving_mean"] = WeightTensor::from_f32({f}, std::vector<float>(f, 0.0f));
        g.weights["bn" + b + "/moving_var"] = WeightTensor::from_f32({f}, std::vector<float>(f, 1.0f));
        g.layers.push_back({LayerKind::Relu, "relu" + b});
        g.layers.push_back({LayerKind::MaxPool2x2, "pool" + b});
        c = f;
        h /= 2;
        w /= 2;
    }

    std::size_t features = 0;
    if (arch == ArchVariant::Gmp) {
        g.layers.push_back({LayerKind::GlobalMaxPool, "gmp"});
        features = c;
    } else {
        g.layers.push_back({LayerKind::Flatten, "flatten"});
        features = h * w * c;
    }
    g.layers.push_back({LayerKind::Dropout, "dropout", 0, 0, options.dropout});

    const auto units = static_cast<std::size_t>(options.dense_units);
    g.layers.push_back({LayerKind::Dense, "dense", 0, options.dense_units});
    g.weights["dense/kernel"] = WeightTensor::from_f32({features, units}, he_uniform(features * units, features, rng));
    g.weights["dense/bias"] = WeightTensor::from_f32({units}, std::vector<float>(units, 0.0f));
    g.layers.push_back({LayerKind::Relu, "dense_relu"});

    const auto& maps = LabelMaps::standard();
    if (heads == HeadKind::SingleIntent) {
        g.heads.push_back({"intent", maps.intents()});
    } else {
        g.heads.push_back({"action", maps.actions()});
        g.heads.push_back({"object", maps.objects()});
    }
    for (const auto& head : g.heads) {
        const std::size_t k = head.labels.size();
        g.weights[head.name + "/kernel"] = WeightTensor::from_f32({units, k}, he_uniform(units * k, units, rng));
        g.weights[head.name + "/bias"] = WeightTensor::from_f32({k}, std::vector<float>(k, 0.0f));
    }
    return g;
}

}  // namespace lsic::nn

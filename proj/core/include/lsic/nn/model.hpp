// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lsic/mfcc.hpp"

namespace lsic::nn {

enum class LayerKind : std::uint8_t {
    Conv2d,
    BatchNorm,
    Relu,
    MaxPool2x2,
    GlobalMaxPool,
    Flatten,
    Dropout,
    Dense,
    Softmax,
};

std::string_view to_string(LayerKind kind);
std::optional<LayerKind> parse_layer_kind(std::string_view s);

// conv2d is always 3x3, stride 1, same padding.
struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    std::string name;
    int filters = 0;    // conv2d
    int units = 0;      // dense
    float rate = 0.0f;  // dropout

    bool operator==(const LayerSpec&) const = default;
};

enum class ArchVariant : std::uint8_t { Gmp, Flatten };
enum class HeadKind : std::uint8_t { SingleIntent, Slots };
enum class QuantMode : std::uint8_t { Fp32, Fp16Weights, Int8Weights, Int8Full };
enum class DType : std::uint8_t { F32 = 0, F16 = 1, I8 = 2 };

std::string_view to_string(ArchVariant v);
std::string_view to_string(HeadKind v);
std::string_view to_string(QuantMode v);
std::string_view to_string(DType v);
std::optional<ArchVariant> parse_arch(std::string_view s);
std::optional<HeadKind> parse_head_kind(std::string_view s);
std::optional<QuantMode> parse_quant_mode(std::string_view s);

// A stored weight tensor. Exactly one payload vector is populated, chosen by
// dtype. For I8, value = scale * (q - zero_point).
struct WeightTensor {
    std::vector<std::size_t> shape;
    DType dtype = DType::F32;
    float scale = 1.0f;
    std::int32_t zero_point = 0;
    std::vector<float> f32;
    std::vector<std::uint16_t> f16;
    std::vector<std::int8_t> i8;

    static WeightTensor from_f32(std::vector<std::size_t> shape, std::vector<float> values);

    std::size_t elements() const;
    std::size_t payload_bytes() const;
    std::vector<float> values() const;

    bool operator==(const WeightTensor&) const = default;
};

struct ActRange {
    float min = 0.0f;
    float max = 0.0f;

    bool operator==(const ActRange&) const = default;
};

// Each head is a dense layer (units = labels.size()) followed by softmax.
struct HeadSpec {
    std::string name;
    std::vector<std::string> labels;

    bool operator==(const HeadSpec&) const = default;
};

struct ModelGraph {
    ArchVariant arch = ArchVariant::Gmp;
    HeadKind head_kind = HeadKind::SingleIntent;
    std::size_t input_frames = 0;
    std::size_t n_mfcc = 0;
    FrontendConfig frontend;
    float bn_epsilon = 1e-3f;
    std::vector<LayerSpec> layers;  // shared trunk
    std::vector<HeadSpec> heads;
    std::map<std::string, WeightTensor> weights;
    QuantMode quant = QuantMode::Fp32;
    // Populated for Int8Full: keyed by "input", a trunk relu layer name or a
    // head name (logits).
    std::map<std::string, ActRange> activation_ranges;

    const WeightTensor& weight(const std::string& name) const;
    bool operator==(const ModelGraph&) const = default;
};

// Trunk hyperparameters. The defaults are the reference architecture:
// three conv/bn/relu/pool blocks of 16/32/64 filters and a 64-unit dense.
struct ModelOptions {
    std::vector<int> block_filters{16, 32, 64};
    int dense_units = 64;
    float dropout = 0.3f;
    std::size_t input_frames = 0;  // 0: derive from frontend and the 2 s window
    FrontendConfig frontend;       // n_mfcc is overridden by build_model's argument
    std::uint64_t seed = 0;
};

/// Builds and He-uniform initializes a model. Throws ConfigInvalid.
ModelGraph build_model(ArchVariant arch, std::size_t n_mfcc, HeadKind heads,
                       const ModelOptions& options = {});

std::size_t count_params(const ModelGraph& model);

bool is_trainable_weight(std::string_view name);

// Smallest frame count the trunk accepts.
std::size_t min_input_frames(const ModelGraph& model);

}  // namespace lsic::nn

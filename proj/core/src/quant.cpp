// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "lsic/quant.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lsic/error.hpp"
#include "lsic/half.hpp"
#include "lsic/model_store.hpp"
#include "lsic/nn/infer.hpp"

namespace lsic::quant {

using nn::DType;
using nn::LayerKind;
using nn::ModelGraph;

QuantTensor quantize_tensor(std::span<const float> values, std::vector<std::size_t> shape, DType target) {
    for (float v : values) {
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "cannot quantize non-finite values");
    }
    QuantTensor t;
    t.shape = std::move(shape);
    t.dtype = target;
    switch (target) {
        case DType::F32:
            t.f32.assign(values.begin(), values.end());
            break;
        case DType::F16:
            t.f16.reserve(values.size());
            for (float v : values) t.f16.push_back(float_to_half_bits(v));
            break;
        case DType::I8: {
            float peak = 0.0f;
            for (float v : values) peak = std::max(peak, std::abs(v));
            t.scale = peak > 0.0f ? peak / 127.0f : 1.0f;
            t.zero_point = 0;
            t.i8.reserve(values.size());
            for (float v : values) {
                const double q = std::round(static_cast<double>(v) / static_cast<double>(t.scale));
                t.i8.push_back(static_cast<std::int8_t>(std::clamp(q, -127.0, 127.0)));
            }
            break;
        }
    }
    return t;
}

RangeMap calibrate_activations(const ModelGraph& model, const nn::FeatureSet& calib) {
    if (calib.size() == 0) throw Error(ErrorCode::EmptyCalibrationSet, "no calibration samples");
    const auto params = nn::materialize<float>(model);
    RangeMap ranges;
    auto observe = [&ranges](const std::string& key, std::span<const float> values) {
        auto [lo, hi] = std::minmax_element(values.begin(), values.end());
        auto it = ranges.find(key);
        if (it == ranges.end()) {
            ranges.emplace(key, ActRange{*lo, *hi});
        } else {
            it->second.min = std::min(it->second.min, *lo);
            it->second.max = std::max(it->second.max, *hi);
        }
    };
    for (std::size_t i = 0; i < calib.size(); ++i) {
        nn::Executor<float> exec(model, params);
        exec.forward(calib.sample(i), 1, calib.frames, false);
        const auto& acts = exec.activations();
        observe("input", acts[0].v);
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            if (model.layers[l].kind == LayerKind::Relu) observe(model.layers[l].name, acts[l + 1].v);
        }
        for (std::size_t h = 0; h < model.heads.size(); ++h) observe(model.heads[h].name, exec.logits()[h].v);
    }
    return ranges;
}

RangeMap calibrate_activations(const ModelGraph& model, std::span<const AudioClip> calib) {
    nn::FeatureSet set;
    for (const auto& clip : calib) set.add(nn::features_for_model(model, clip), {});
    return calibrate_activations(model, set);
}

ModelGraph fold_batchnorm(const ModelGraph& model) {
    ModelGraph out = model;
    out.layers.clear();
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& spec = model.layers[l];
        if (spec.kind == LayerKind::BatchNorm) {
            if (out.layers.empty() || out.layers.back().kind != LayerKind::Conv2d) {
                throw Error(ErrorCode::ConfigInvalid, "batchnorm " + spec.name + " does not follow a conv2d");
            }
            const std::string conv = out.layers.back().name;
            auto kernel = out.weights.at(conv + "/kernel").values();
            auto bias = out.weights.at(conv + "/bias").values();
            const auto gamma = model.weight(spec.name + "/gamma").values();
            const auto beta = model.weight(spec.name + "/beta").values();
            const auto mean = model.weight(spec.name + "/moving_mean").values();
            const auto var = model.weight(spec.name + "/moving_var").values();
            const std::size_t cout = bias.size();
            std::vector<double> factor(cout);
            for (std::size_t c = 0; c < cout; ++c) {
                factor[c] = static_cast<double>(gamma[c]) / std::sqrt(static_cast<double>(var[c]) + model.bn_epsilon);
            }
            for (std::size_t i = 0; i < kernel.size(); ++i) {
                kernel[i] = static_cast<float>(kernel[i] * factor[i % cout]);
            }
            for (std::size_t c = 0; c < cout; ++c) {
                bias[c] = static_cast<float>(beta[c] + (static_cast<double>(bias[c]) - mean[c]) * factor[c]);
            }
            auto shape = out.weights.at(conv + "/kernel").shape;
            out.weights[conv + "/kernel"] = nn::WeightTensor::from_f32(shape, std::move(kernel));
            out.weights[conv + "/bias"] = nn::WeightTensor::from_f32({cout}, std::move(bias));
            for (const char* suffix : {"/gamma", "/beta", "/moving_mean", "/moving_var"}) {
                out.weights.erase(spec.name + suffix);
            }
            continue;
        }
        out.layers.push_back(spec);
    }
    return out;
}

ModelGraph quantize_model(const ModelGraph& model, QuantMode mode, const std::optional<RangeMap>& calibration) {
    if (model.quant != QuantMode::Fp32) throw Error(ErrorCode::ConfigInvalid, "model is already quantized");
    if (mode == QuantMode::Fp32) return model;

    if (mode == QuantMode::Fp16Weights) {
        ModelGraph out = model;
        out.quant = mode;
        for (auto& [name, t] : out.weights) t = quantize_tensor(t.values(), t.shape, DType::F16);
        return out;
    }

    if (mode == QuantMode::Int8Full && !calibration) {
        throw Error(ErrorCode::MissingCalibration, "int8_full requires calibration ranges");
    }
    ModelGraph out = fold_batchnorm(model);
    out.quant = mode;
    for (auto& [name, t] : out.weights) {
        if (name.ends_with("/kernel")) t = quantize_tensor(t.values(), t.shape, DType::I8);
    }
    if (mode == QuantMode::Int8Full) out.activation_ranges = *calibration;
    return out;
}

std::size_t payload_bytes(const ModelGraph& model) {
    std::size_t total = 0;
    for (const auto& [name, t] : model.weights) total += t.payload_bytes();
    return total;
}

const SizeRow* SizeReport::find(QuantMode mode) const {
    for (const auto& r : rows) {
        if (r.mode == mode) return &r;
    }
    return nullptr;
}

std::string SizeReport::to_table() const {
    std::ostringstream os;
    os << std::left << std::setw(16) << "Mode" << std::right << std::setw(14) << "Payload(B)" << std::setw(14)
       << "Size(KB)" << std::setw(12) << "Accuracy" << std::setw(12) << "Change" << std::setw(14) << "Reduction%"
       << "\n";
    os << std::fixed;
    for (const auto& r : rows) {
        os << std::left << std::setw(16) << nn::to_string(r.mode) << std::right << std::setw(14) << r.payload_bytes
           << std::setw(14) << std::setprecision(3) << static_cast<double>(r.file_bytes) / 1024.0 << std::setw(12)
           << std::setprecision(2) << r.accuracy << std::setw(12) << std::showpos << r.accuracy_delta
           << std::noshowpos << std::setw(14) << std::setprecision(3) << r.reduction_percent << "\n";
    }
    return os.str();
}

std::string SizeReport::to_records() const {
    std::string out;
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["mode"] = nn::to_string(r.mode);
        j["payload_bytes"] = r.payload_bytes;
        j["file_bytes"] = r.file_bytes;
        j["size_kb"] = static_cast<double>(r.file_bytes) / 1024.0;
        j["accuracy"] = r.accuracy;
        j["accuracy_delta"] = r.accuracy_delta;
        j["reduction_percent"] = r.reduction_percent;
        out += j.dump();
        out += '\n';
    }
    return out;
}

SizeReport size_report(const std::map<QuantMode, ModelGraph>& models, const nn::FeatureSet& eval_set) {
    auto base = models.find(QuantMode::Fp32);
    if (base == models.end()) throw Error(ErrorCode::ConfigInvalid, "size report needs an fp32 baseline");

    SizeReport report;
    for (const auto& [mode, model] : models) {
        SizeRow row;
        row.mode = mode;
        row.payload_bytes = payload_bytes(model);
        row.file_bytes = store::serialize(model).size();
        row.accuracy = eval_set.size() > 0 ? 100.0 * nn::accuracy(model, eval_set) : 0.0;
        report.rows.push_back(row);
    }
    const SizeRow baseline = *report.find(QuantMode::Fp32);
    for (auto& row : report.rows) {
        row.accuracy_delta = row.accuracy - baseline.accuracy;
        row.reduction_percent =
            100.0 * (1.0 - static_cast<double>(row.file_bytes) / static_cast<double>(baseline.file_bytes));
    }
    return report;
}

}  // namespace lsic::quant

// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lsic/audio.hpp"
#include "lsic/nn/engine.hpp"
#include "lsic/nn/model.hpp"
#include "lsic/nn/train.hpp"

namespace lsic::quant {

using nn::ActRange;
using nn::QuantMode;

// Quantized tensors share the stored-weight representation.
using QuantTensor = nn::WeightTensor;

/// Int8 symmetric per-tensor (scale = max|t|/127, or 1 for an all-zero
/// tensor; q = clamp(round(t/scale), -127, 127)) or IEEE half. Throws
/// NonFiniteInput.
QuantTensor quantize_tensor(std::span<const float> values, std::vector<std::size_t> shape, nn::DType target);

using RangeMap = std::map<std::string, ActRange>;

/// Running min/max of the input, every relu output and every head's logits
/// over the calibration set, eval mode. Throws EmptyCalibrationSet.
RangeMap calibrate_activations(const nn::ModelGraph& model, const nn::FeatureSet& calib);
RangeMap calibrate_activations(const nn::ModelGraph& model, std::span<const AudioClip> calib);

/// Conv weights absorb the following batchnorm; the batchnorm layers are
/// removed from the returned graph.
nn::ModelGraph fold_batchnorm(const nn::ModelGraph& model);

/// Throws MissingCalibration when mode is Int8Full and no calibration
/// ranges are supplied.
nn::ModelGraph quantize_model(const nn::ModelGraph& model, QuantMode mode,
                              const std::optional<RangeMap>& calibration = std::nullopt);

// Bytes of all stored tensor payloads.
std::size_t payload_bytes(const nn::ModelGraph& model);

struct SizeRow {
    QuantMode mode = QuantMode::Fp32;
    std::size_t payload_bytes = 0;
    std::size_t file_bytes = 0;
    double accuracy = 0.0;        // percent
    double accuracy_delta = 0.0;  // percentage points vs fp32
    double reduction_percent = 0.0;
};

struct SizeReport {
    std::vector<SizeRow> rows;

    const SizeRow* find(QuantMode mode) const;
    std::string to_table() const;
    std::string to_records() const;  // one JSON object per line
};

/// Throws ConfigInvalid when no fp32 baseline is present.
SizeReport size_report(const std::map<QuantMode, nn::ModelGraph>& models, const nn::FeatureSet& eval_set);

}  // namespace lsic::quant

// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lsic/mfcc.hpp"
#include "lsic/nn/engine.hpp"
#include "lsic/nn/model.hpp"

namespace lsic::nn {

struct SampleLabels {
    int intent = 0;
    int action = 0;
    int object = 0;
};

// Dense training matrix: every sample has the same frames x n_mfcc shape.
struct FeatureSet {
    std::size_t frames = 0;
    std::size_t n_mfcc = 0;
    std::vector<float> data;
    std::vector<SampleLabels> labels;

    std::size_t size() const { return labels.size(); }
    std::size_t sample_size() const { return frames * n_mfcc; }
    std::span<const float> sample(std::size_t i) const {
        return std::span<const float>(data).subspan(i * sample_size(), sample_size());
    }
    void add(const MfccMatrix& features, SampleLabels label);
};

HeadLabels head_labels(const ModelGraph& model, std::span<const SampleLabels> labels);

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t batch_size = 32;
    int max_epochs = 300;
    int patience = 20;  // epochs without validation-accuracy improvement
    float dropout = 0.3f;
    double bn_momentum = 0.9;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
};

// {"epoch":..,"train_loss":..,"train_acc":..,"val_acc":..}
std::string to_record(const EpochRecord& r);

struct TrainResult {
    ModelGraph model;  // weights of the best-validation epoch
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    int stopped_epoch = 0;
    double best_val_acc = 0.0;
};

/// Adam + mini-batch cross-entropy with early stopping on validation
/// accuracy. Throws EmptyDataset, ConfigInvalid.
TrainResult train(ModelGraph model, const FeatureSet& train_set, const FeatureSet& val_set,
                  const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch = {});

// Fraction of samples where every head's argmax matches its label.
double accuracy(const ModelGraph& model, const FeatureSet& set);

}  // namespace lsic::nn

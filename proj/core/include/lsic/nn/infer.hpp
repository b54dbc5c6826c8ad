// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lsic/audio.hpp"
#include "lsic/mfcc.hpp"
#include "lsic/nn/engine.hpp"
#include "lsic/nn/model.hpp"

namespace lsic::nn {

struct HeadOutput {
    std::string name;
    std::vector<std::string> labels;
    std::vector<double> probs;
    int argmax = 0;
    std::string label;
    double max_prob = 0.0;
};

// confidence is the top probability for a single-intent model and the
// smaller of the two head maxima for a slots model. For slots the intent is
// composed from the head labels and may be an invalid pair.
struct Prediction {
    std::vector<HeadOutput> heads;
    std::string intent;
    std::string object;
    std::string action;
    double confidence = 0.0;
    bool valid_pair = false;

    // (label, prob) of the k most probable labels of head 0, best first.
    std::vector<std::pair<std::string, double>> top_k(std::size_t k) const;
};

Prediction make_prediction(const ModelGraph& model, const std::vector<std::vector<double>>& head_probs);

std::vector<float> to_input(const MfccMatrix& features);

// Holds dequantized parameters so repeated inference skips materialization.
class InferenceSession {
public:
    explicit InferenceSession(ModelGraph model);

    const ModelGraph& model() const { return model_; }

    Prediction run(const MfccMatrix& features) const;
    // Eval-mode batch; inputs holds n samples of frames x n_mfcc.
    std::vector<Prediction> run_batch(std::span<const float> inputs, std::size_t n, std::size_t frames) const;
    Prediction predict(const AudioClip& clip) const;

private:
    ModelGraph model_;
    ParamMap<float> params_;
};

Prediction forward(const ModelGraph& model, const MfccMatrix& features, bool train_mode = false,
                   std::uint64_t dropout_seed = 0);

/// fit_length(2 s) -> mfcc(model frontend) -> eval-mode forward.
Prediction predict(const ModelGraph& model, const AudioClip& clip);

MfccMatrix features_for_model(const ModelGraph& model, const AudioClip& clip);

struct LossAndGrad {
    double loss = 0.0;
    std::map<std::string, std::vector<float>> grads;
};

/// Train-mode cross-entropy (summed over heads) and its gradients.
LossAndGrad loss_and_grad(const ModelGraph& model, std::span<const float> batch, std::size_t n,
                          std::size_t frames, const HeadLabels& labels, std::uint64_t dropout_seed = 0);

}  // namespace lsic::nn

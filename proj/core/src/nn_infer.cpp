// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "lsic/nn/infer.hpp"

#include <algorithm>
#include <numeric>

#include "lsic/labels.hpp"

namespace lsic::nn {

std::vector<std::pair<std::string, double>> Prediction::top_k(std::size_t k) const {
    std::vector<std::pair<std::string, double>> out;
    if (heads.empty()) return out;
    const auto& head = heads.front();
    std::vector<std::size_t> order(head.probs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return head.probs[a] > head.probs[b]; });
    for (std::size_t i = 0; i < std::min(k, order.size()); ++i) {
        out.emplace_back(head.labels[order[i]], head.probs[order[i]]);
    }
    return out;
}

Prediction make_prediction(const ModelGraph& model, const std::vector<std::vector<double>>& head_probs) {
    Prediction p;
    for (std::size_t h = 0; h < model.heads.size(); ++h) {
        HeadOutput out;
        out.name = model.heads[h].name;
        out.labels = model.heads[h].labels;
        out.probs = head_probs[h];
        auto best = std::max_element(out.probs.begin(), out.probs.end());
        out.argmax = static_cast<int>(best - out.probs.begin());
        out.max_prob = *best;
        out.label = model.heads[h].labels[static_cast<std::size_t>(out.argmax)];
        p.heads.push_back(std::move(out));
    }

    const auto& maps = LabelMaps::standard();
    if (model.head_kind == HeadKind::SingleIntent) {
        p.intent = p.heads[0].label;
        p.confidence = p.heads[0].max_prob;
        if (auto idx = maps.intent_index(p.intent)) {
            p.object = maps.objects()[static_cast<std::size_t>(maps.object_of(*idx))];
            p.action = maps.actions()[static_cast<std::size_t>(maps.action_of(*idx))];
            p.valid_pair = true;
        }
    } else {
        for (const auto& head : p.heads) {
            if (head.name == "action") p.action = head.label;
            if (head.name == "object") p.object = head.label;
        }
        p.intent = LabelMaps::join(p.object, p.action);
        p.confidence = std::min(p.heads[0].max_prob, p.heads[1].max_prob);
        p.valid_pair = maps.is_valid_pair(p.object, p.action);
    }
    return p;
}

std::vector<float> to_input(const MfccMatrix& features) {
    return std::vector<float>(features.values.data.begin(), features.values.data.end());
}

InferenceSession::InferenceSession(ModelGraph model)
    : model_(std::move(model)), params_(materialize<float>(model_)) {}

std::vector<Prediction> InferenceSession::run_batch(std::span<const float> inputs, std::size_t n,
                                                    std::size_t frames) const {
    Executor<float> exec(model_, params_);
    exec.forward(inputs, n, frames, false);
    std::vector<Prediction> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::vector<double>> probs;
        for (const auto& head : exec.probs()) {
            const float* row = head.v.data() + i * head.c;
            probs.emplace_back(row, row + head.c);
        }
        out.push_back(make_prediction(model_, probs));
    }
    return out;
}

Prediction InferenceSession::run(const MfccMatrix& features) const {
    if (features.n_mfcc() != model_.n_mfcc) {
        throw Error(ErrorCode::ShapeMismatch, "model expects " + std::to_string(model_.n_mfcc) + " MFCCs, got " +
                                                  std::to_string(features.n_mfcc()));
    }
    auto input = to_input(features);
    return run_batch(input, 1, features.frames()).front();
}

MfccMatrix features_for_model(const ModelGraph& model, const AudioClip& clip) {
    return mfcc(fit_length(clip, kWindowSamples), model.frontend);
}

Prediction InferenceSession::predict(const AudioClip& clip) const { return run(features_for_model(model_, clip)); }

Prediction forward(const ModelGraph& model, const MfccMatrix& features, bool train_mode, std::uint64_t dropout_seed) {
    if (features.n_mfcc() != model.n_mfcc) throw Error(ErrorCode::ShapeMismatch, "MFCC count mismatch");
    auto params = materialize<float>(model);
    auto input = to_input(features);
    Executor<float> exec(model, params);
    exec.forward(input, 1, features.frames(), train_mode, dropout_seed);
    std::vector<std::vector<double>> probs;
    for (const auto& head : exec.probs()) probs.emplace_back(head.v.begin(), head.v.end());
    return make_prediction(model, probs);
}

Prediction predict(const ModelGraph& model, const AudioClip& clip) {
    return InferenceSession(model).predict(clip);
}

LossAndGrad loss_and_grad(const ModelGraph& model, std::span<const float> batch, std::size_t n,
                          std::size_t frames, const HeadLabels& labels, std::uint64_t dropout_seed) {
    if (n == 0) throw Error(ErrorCode::ShapeMismatch, "empty batch");
    auto params = materialize<float>(model);
    Executor<float> exec(model, params);
    exec.forward(batch, n, frames, true, dropout_seed);
    LossAndGrad out;
    out.loss = exec.loss(labels);
    ParamMap<float> grads;
    exec.backward(labels, grads);
    out.grads = std::move(grads);
    return out;
}

}  // namespace lsic::nn

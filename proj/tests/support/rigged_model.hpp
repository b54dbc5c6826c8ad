// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//
// Models whose output ignores the input: head kernels are zeroed and the
// bias alone fixes the softmax, so tests can dictate label and confidence.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "lsic/nn/model.hpp"

namespace lsic::testing {

// Sets head `name` to emit `label` with probability `prob`.
inline void rig_head(nn::ModelGraph& m, const std::string& name, const std::string& label, double prob) {
    const nn::HeadSpec* head = nullptr;
    for (const auto& h : m.heads) {
        if (h.name == name) head = &h;
    }
    const auto k = static_cast<double>(head->labels.size());
    const auto idx = static_cast<std::size_t>(
        std::find(head->labels.begin(), head->labels.end(), label) - head->labels.begin());
    auto& kernel = m.weights.at(name + "/kernel").f32;
    std::fill(kernel.begin(), kernel.end(), 0.0f);
    auto& bias = m.weights.at(name + "/bias").f32;
    std::fill(bias.begin(), bias.end(), 0.0f);
    bias[idx] = static_cast<float>(std::log((k - 1.0) * prob / (1.0 - prob)));
}

inline nn::ModelGraph rigged_intent_model(const std::string& intent, double prob, std::size_t n_mfcc = 13) {
    auto m = nn::build_model(nn::ArchVariant::Gmp, n_mfcc, nn::HeadKind::SingleIntent);
    rig_head(m, "intent", intent, prob);
    return m;
}

inline nn::ModelGraph rigged_slots_model(const std::string& object, const std::string& action, double prob) {
    auto m = nn::build_model(nn::ArchVariant::Gmp, 13, nn::HeadKind::Slots);
    rig_head(m, "object", object, prob);
    rig_head(m, "action", action, prob);
    return m;
}

}  // namespace lsic::testing

// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "lsic/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "lsic/error.hpp"

namespace lsic::nn {

void FeatureSet::add(const MfccMatrix& features, SampleLabels label) {
    if (labels.empty() && data.empty()) {
        frames = features.frames();
        n_mfcc = features.n_mfcc();
    } else if (features.frames() != frames || features.n_mfcc() != n_mfcc) {
        throw Error(ErrorCode::ShapeMismatch, "feature shape differs from the rest of the set");
    }
    for (double v : features.values.data) data.push_back(static_cast<float>(v));
    labels.push_back(label);
}

HeadLabels head_labels(const ModelGraph& model, std::span<const SampleLabels> labels) {
    HeadLabels out(model.heads.size());
    for (std::size_t h = 0; h < model.heads.size(); ++h) {
        const std::string& name = model.heads[h].name;
        out[h].reserve(labels.size());
        for (const auto& l : labels) {
            out[h].push_back(name == "action" ? l.action : name == "object" ? l.object : l.intent);
        }
    }
    return out;
}

void TrainConfig::validate() const {
    if (patience < 1) throw Error(ErrorCode::ConfigInvalid, "patience must be >= 1");
    if (max_epochs < 1) throw Error(ErrorCode::ConfigInvalid, "max_epochs must be >= 1");
    if (batch_size == 0) throw Error(ErrorCode::ConfigInvalid, "batch_size must be positive");
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::ConfigInvalid, "learning rate must be positive");
    if (!(dropout >= 0.0f && dropout < 1.0f)) throw Error(ErrorCode::ConfigInvalid, "dropout must be in [0, 1)");
    if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) throw Error(ErrorCode::ConfigInvalid, "bn_momentum in [0, 1)");
}

std::string to_record(const EpochRecord& r) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    j["train_acc"] = r.train_acc;
    j["val_acc"] = r.val_acc;
    return j.dump();
}

namespace {

constexpr std::size_t kEvalBatch = 64;

// Exact-match accuracy with explicit parameters (used mid-training).
double accuracy_with(const ModelGraph& model, const ParamMap<float>& params, const FeatureSet& set) {
    if (set.size() == 0) return 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < set.size(); start += kEvalBatch) {
        const std::size_t n = std::min(kEvalBatch, set.size() - start);
        Executor<float> exec(model, params);
        exec.forward(std::span<const float>(set.data).subspan(start * set.sample_size(), n * set.sample_size()), n,
                     set.frames, false);
        auto labels = head_labels(model, std::span<const SampleLabels>(set.labels).subspan(start, n));
        for (std::size_t i = 0; i < n; ++i) {
            bool all = true;
            for (std::size_t h = 0; h < exec.probs().size(); ++h) {
                const auto& p = exec.probs()[h];
                const float* row = p.v.data() + i * p.c;
                const auto arg = static_cast<int>(std::max_element(row, row + p.c) - row);
                all = all && arg == labels[h][i];
            }
            correct += all ? 1 : 0;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(set.size());
}

void write_back(ModelGraph& model, const ParamMap<float>& params) {
    for (auto& [name, tensor] : model.weights) tensor.f32 = params.at(name);
}

}  // namespace

double accuracy(const ModelGraph& model, const FeatureSet& set) {
    return accuracy_with(model, materialize<float>(model), set);
}

TrainResult train(ModelGraph model, const FeatureSet& train_set, const FeatureSet& val_set, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
    cfg.validate();
    if (train_set.size() == 0) throw Error(ErrorCode::EmptyDataset, "training set is empty");
    if (val_set.size() == 0) throw Error(ErrorCode::EmptyDataset, "validation set is empty");
    if (model.quant != QuantMode::Fp32) throw Error(ErrorCode::ConfigInvalid, "only fp32 models can be trained");
    if (train_set.n_mfcc != model.n_mfcc || val_set.n_mfcc != model.n_mfcc) {
        throw Error(ErrorCode::ShapeMismatch, "feature MFCC count does not match the model");
    }
    for (auto& layer : model.layers) {
        if (layer.kind == LayerKind::Dropout) layer.rate = cfg.dropout;
    }

    ParamMap<float> params = materialize<float>(model);
    ParamMap<float> adam_m, adam_v;
    for (const auto& [name, p] : params) {
        if (!is_trainable_weight(name)) continue;
        adam_m[name].assign(p.size(), 0.0f);
        adam_v[name].assign(p.size(), 0.0f);
    }

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<float> batch;
    std::vector<SampleLabels> batch_labels;
    std::uint64_t step = 0;

    TrainResult result;
    ParamMap<float> best_params = params;
    double best_val = -1.0;
    const auto momentum = static_cast<float>(cfg.bn_momentum);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        // Fisher-Yates with raw 64-bit draws keeps shuffles identical across
        // standard library implementations.
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, order.size() - start);
            batch.clear();
            batch_labels.clear();
            for (std::size_t i = 0; i < n; ++i) {
                auto s = train_set.sample(order[start + i]);
                batch.insert(batch.end(), s.begin(), s.end());
                batch_labels.push_back(train_set.labels[order[start + i]]);
            }
            const HeadLabels labels = head_labels(model, batch_labels);

            Executor<float> exec(model, params);
            exec.forward(batch, n, train_set.frames, true, rng());
            loss_sum += exec.loss(labels) * static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                bool all = true;
                for (std::size_t h = 0; h < exec.probs().size(); ++h) {
                    const auto& p = exec.probs()[h];
                    const float* row = p.v.data() + i * p.c;
                    all = all && static_cast<int>(std::max_element(row, row + p.c) - row) == labels[h][i];
                }
                correct += all ? 1 : 0;
            }
            ParamMap<float> grads;
            exec.backward(labels, grads);
            const std::vector<BnBatchStats> stats = exec.bn_stats();

            ++step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (auto& [name, g] : grads) {
                auto& p = params.at(name);
                auto& m = adam_m.at(name);
                auto& v = adam_v.at(name);
                for (std::size_t i = 0; i < p.size(); ++i) {
                    m[i] = static_cast<float>(cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i]);
                    v[i] = static_cast<float>(cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i]);
                    const double mhat = m[i] / bc1;
                    const double vhat = v[i] / bc2;
                    p[i] -= static_cast<float>(cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon));
                }
            }
            for (const auto& s : stats) {
                auto& mm = params.at(s.layer + "/moving_mean");
                auto& mv = params.at(s.layer + "/moving_var");
                for (std::size_t c = 0; c < mm.size(); ++c) {
                    mm[c] = momentum * mm[c] + (1.0f - momentum) * static_cast<float>(s.mean[c]);
                    mv[c] = momentum * mv[c] + (1.0f - momentum) * static_cast<float>(s.var[c]);
                }
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(train_set.size());
        rec.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
        rec.val_acc = accuracy_with(model, params, val_set);
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        result.stopped_epoch = epoch;

        if (rec.val_acc > best_val) {
            best_val = rec.val_acc;
            result.best_epoch = epoch;
            best_params = params;
        } else if (epoch - result.best_epoch >= cfg.patience) {
            break;
        }
    }

    write_back(model, best_params);
    result.best_val_acc = best_val;
    result.model = std::move(model);
    return result;
}

}  // namespace lsic::nn

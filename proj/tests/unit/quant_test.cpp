// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <cmath>
#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "lsic/error.hpp"
#include "lsic/half.hpp"
#include "lsic/nn/engine.hpp"
#include "lsic/nn/infer.hpp"
#include "lsic/nn/train.hpp"
#include "lsic/quant.hpp"

namespace {

using lsic::nn::DType;
using lsic::nn::QuantMode;

TEST(QuantizeTensor, ZeroTensor) {
    std::vector<float> z(10, 0.0f);
    auto t = lsic::quant::quantize_tensor(z, {10}, DType::I8);
    EXPECT_EQ(t.scale, 1.0f);
    for (auto q : t.i8) EXPECT_EQ(q, 0);
}

TEST(QuantizeTensor, ScaleArithmetic) {
    std::vector<float> v{1.27f, 0.5f, -1.27f};
    auto t = lsic::quant::quantize_tensor(v, {3}, DType::I8);
    EXPECT_NEAR(t.scale, 0.01f, 1e-9);
    EXPECT_EQ(t.i8[0], 127);
    EXPECT_EQ(t.i8[1], 50);
    EXPECT_EQ(t.i8[2], -127);
}

// Bound checked in double against the scale actually stored.
TEST(QuantizeTensor, RoundTripBound) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        std::normal_distribution<float> nd(0.0f, 0.1f * static_cast<float>(trial + 1));
        std::vector<float> v(777);
        for (auto& x : v) x = nd(rng);
        auto t = lsic::quant::quantize_tensor(v, {777}, DType::I8);
        const double s = t.scale;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double deq = s * static_cast<double>(t.i8[i]);
            ASSERT_LE(std::abs(deq - static_cast<double>(v[i])), s / 2 + 1e-12) << trial << " " << i;
        }
    }
}

TEST(QuantizeTensor, Half) {
    std::vector<float> v{1.0f, -2.5f, 65504.0f, 1e-8f, 0.1f};
    auto t = lsic::quant::quantize_tensor(v, {5}, DType::F16);
    EXPECT_EQ(t.f16[0], 0x3C00);
    EXPECT_EQ(t.f16[1], 0xC100);
    EXPECT_EQ(t.f16[2], 0x7BFF);
    auto back = t.values();
    EXPECT_EQ(back[0], 1.0f);
    EXPECT_EQ(back[2], 65504.0f);
    EXPECT_NEAR(back[4], 0.1f, 0.1f * std::ldexp(1.0f, -11));
    EXPECT_EQ(t.payload_bytes(), 10u);
}

TEST(QuantizeTensor, NonFinite) {
    std::vector<float> v{1.0f, std::nanf("")};
    try {
        lsic::quant::quantize_tensor(v, {2}, DType::I8);
        FAIL();
    } catch (const lsic::Error& e) {
        EXPECT_EQ(e.code(), lsic::ErrorCode::NonFiniteInput);
    }
}

TEST(AffineParams, Rules) {
    auto d = lsic::nn::affine_from_range(2.0, 2.0);
    EXPECT_EQ(d.scale, 1.0);
    EXPECT_EQ(d.zero_point, 0);
    auto r = lsic::nn::affine_from_range(0.0, 25.5);
    EXPECT_NEAR(r.scale, 0.1, 1e-12);
    EXPECT_EQ(r.zero_point, 0);
    auto s = lsic::nn::affine_from_range(-1.0, 1.0);
    EXPECT_EQ(s.zero_point, 128);
    auto p = lsic::nn::affine_from_range(3.0, 5.1);  // range widened to contain 0
    EXPECT_NEAR(p.scale, 5.1 / 255.0, 1e-12);
    EXPECT_EQ(p.zero_point, 0);
}

lsic::nn::ModelGraph toy_model() {
    lsic::nn::ModelOptions o;
    o.block_filters = {4, 8};
    o.dense_units = 16;
    o.input_frames = 16;
    o.seed = 2;
    auto m = lsic::nn::build_model(lsic::nn::ArchVariant::Gmp, 10, lsic::nn::HeadKind::SingleIntent, o);
    // non-trivial batchnorm so folding is exercised
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<float> u(0.5f, 1.5f);
    for (auto& [name, t] : m.weights) {
        if (name.find("bn") == 0) {
            for (auto& v : t.f32) v = name.ends_with("mean") || name.ends_with("beta") ? u(rng) - 1.0f : u(rng);
        }
    }
    return m;
}

lsic::nn::FeatureSet toy_features(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    lsic::nn::FeatureSet set;
    for (std::size_t i = 0; i < n; ++i) {
        lsic::MfccMatrix m;
        m.values = lsic::Matrix(16, 10);
        for (auto& v : m.values.data) v = nd(rng);
        set.add(m, {static_cast<int>(i % 20), 0, 0});
    }
    return set;
}

std::vector<float> eval_probs(const lsic::nn::ModelGraph& m, const lsic::nn::FeatureSet& set) {
    auto params = lsic::nn::materialize<float>(m);
    lsic::nn::Executor<float> ex(m, params);
    ex.forward(set.data, set.size(), set.frames, false);
    return ex.probs()[0].v;
}

TEST(FoldBatchnorm, PreservesEvalOutputs) {
    auto m = toy_model();
    auto folded = lsic::quant::fold_batchnorm(m);
    for (const auto& l : folded.layers) EXPECT_NE(l.kind, lsic::nn::LayerKind::BatchNorm);
    EXPECT_FALSE(folded.weights.count("bn1/gamma"));
    auto set = toy_features(6, 1);
    auto a = eval_probs(m, set);
    auto b = eval_probs(folded, set);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-5);
}

TEST(Calibrate, RangesAndMonotonicity) {
    auto m = toy_model();
    auto one = toy_features(1, 3);
    auto ranges = lsic::quant::calibrate_activations(m, one);
    ASSERT_TRUE(ranges.count("input"));
    ASSERT_TRUE(ranges.count("intent"));
    float lo = 1e9f, hi = -1e9f;
    for (float v : one.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    EXPECT_EQ(ranges["input"].min, lo);
    EXPECT_EQ(ranges["input"].max, hi);
    // relu outputs recorded too
    int relus = 0;
    for (const auto& [k, r] : ranges) relus += k.find("relu") != std::string::npos;
    EXPECT_EQ(relus, 3);

    auto more = toy_features(5, 4);
    more.data.insert(more.data.begin(), one.data.begin(), one.data.end());
    more.labels.insert(more.labels.begin(), one.labels.front());
    auto wider = lsic::quant::calibrate_activations(m, more);
    for (const auto& [k, r] : ranges) {
        EXPECT_LE(wider[k].min, r.min) << k;
        EXPECT_GE(wider[k].max, r.max) << k;
    }
    try {
        lsic::quant::calibrate_activations(m, lsic::nn::FeatureSet{});
        FAIL();
    } catch (const lsic::Error& e) {
        EXPECT_EQ(e.code(), lsic::ErrorCode::EmptyCalibrationSet);
    }
}

TEST(QuantizeModel, ModesAndPayloads) {
    auto m = toy_model();
    auto ranges = lsic::quant::calibrate_activations(m, toy_features(8, 5));
    const auto p32 = static_cast<double>(lsic::quant::payload_bytes(m));
    auto f16 = lsic::quant::quantize_model(m, QuantMode::Fp16Weights);
    auto i8 = lsic::quant::quantize_model(m, QuantMode::Int8Weights);
    auto full = lsic::quant::quantize_model(m, QuantMode::Int8Full, ranges);
    EXPECT_EQ(lsic::quant::payload_bytes(f16) / p32, 0.5);
    for (const auto& [name, t] : f16.weights) EXPECT_EQ(t.dtype, DType::F16) << name;
    for (const auto& [name, t] : i8.weights) {
        EXPECT_EQ(t.dtype, name.ends_with("/kernel") ? DType::I8 : DType::F32) << name;
    }
    EXPECT_TRUE(i8.activation_ranges.empty());
    EXPECT_EQ(full.activation_ranges, ranges);
    EXPECT_EQ(lsic::quant::payload_bytes(full), lsic::quant::payload_bytes(i8));
    EXPECT_LT(lsic::quant::payload_bytes(i8) / p32, 0.5);

    try {
        lsic::quant::quantize_model(m, QuantMode::Int8Full);
        FAIL();
    } catch (const lsic::Error& e) {
        EXPECT_EQ(e.code(), lsic::ErrorCode::MissingCalibration);
    }
    EXPECT_THROW(lsic::quant::quantize_model(f16, QuantMode::Int8Weights), lsic::Error);
    EXPECT_EQ(lsic::quant::quantize_model(m, QuantMode::Fp32), m);
}

TEST(QuantizeModel, ReferencePayloadRatios) {
    auto m = lsic::nn::build_model(lsic::nn::ArchVariant::Gmp, 13, lsic::nn::HeadKind::SingleIntent);
    const auto p32 = static_cast<double>(lsic::quant::payload_bytes(m));
    const auto p16 = static_cast<double>(lsic::quant::payload_bytes(lsic::quant::quantize_model(m, QuantMode::Fp16Weights)));
    const auto p8 = static_cast<double>(lsic::quant::payload_bytes(lsic::quant::quantize_model(m, QuantMode::Int8Weights)));
    EXPECT_LE(p16 / p32, 0.51);
    EXPECT_LE(p8 / p32, 0.26);
}

TEST(QuantizeModel, OutputsStayClose) {
    auto m = toy_model();
    auto set = toy_features(10, 6);
    auto ranges = lsic::quant::calibrate_activations(m, set);
    auto ref = eval_probs(m, set);
    auto f16 = eval_probs(lsic::quant::quantize_model(m, QuantMode::Fp16Weights), set);
    auto i8 = eval_probs(lsic::quant::quantize_model(m, QuantMode::Int8Weights), set);
    auto full = eval_probs(lsic::quant::quantize_model(m, QuantMode::Int8Full, ranges), set);
    for (std::size_t i = 0; i < ref.size(); ++i) {
        EXPECT_NEAR(f16[i], ref[i], 1e-2);
        EXPECT_NEAR(i8[i], ref[i], 5e-2);
        EXPECT_NEAR(full[i], ref[i], 1e-1);
    }
}

TEST(SizeReport, BaselineAndOrdering) {
    auto m = lsic::nn::build_model(lsic::nn::ArchVariant::Gmp, 13, lsic::nn::HeadKind::SingleIntent);
    std::map<QuantMode, lsic::nn::ModelGraph> models;
    models[QuantMode::Fp32] = m;
    models[QuantMode::Fp16Weights] = lsic::quant::quantize_model(m, QuantMode::Fp16Weights);
    models[QuantMode::Int8Weights] = lsic::quant::quantize_model(m, QuantMode::Int8Weights);
    lsic::nn::FeatureSet empty;
    auto report = lsic::quant::size_report(models, empty);
    ASSERT_EQ(report.rows.size(), 3u);
    EXPECT_EQ(report.find(QuantMode::Fp32)->reduction_percent, 0.0);
    EXPECT_EQ(report.find(QuantMode::Fp32)->accuracy_delta, 0.0);
    EXPECT_LT(report.find(QuantMode::Fp16Weights)->reduction_percent,
              report.find(QuantMode::Int8Weights)->reduction_percent);
    EXPECT_NE(report.to_table().find("fp16_weights"), std::string::npos);
    models.erase(QuantMode::Fp32);
    EXPECT_THROW(lsic::quant::size_report(models, empty), lsic::Error);
}

}  // namespace

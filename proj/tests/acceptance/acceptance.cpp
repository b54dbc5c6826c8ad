// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance checks. Prints one PASS / FAIL / SKIPPED line per
// criterion and exits non-zero when any criterion fails.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <tuple>

#include <nlohmann/json.hpp>

#include "grad_check.hpp"
#include "lsic/audio.hpp"
#include "lsic/bus.hpp"
#include "lsic/dataset.hpp"
#include "lsic/devices.hpp"
#include "lsic/error.hpp"
#include "lsic/labels.hpp"
#include "lsic/mfcc.hpp"
#include "lsic/model_store.hpp"
#include "lsic/nn/infer.hpp"
#include "lsic/nn/train.hpp"
#include "lsic/quant.hpp"
#include "lsic/serve.hpp"
#include "lsic/synth.hpp"
#include "mfcc_oracle.hpp"
#include "rigged_model.hpp"

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

enum class Status { Pass, Fail, Skipped };

struct Outcome {
    Status status = Status::Fail;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::Pass : Status::Fail, std::move(detail)}; }

// Shared state: corpus on disk and the model trained by criterion 3.
struct Context {
    fs::path dir;
    lsic::data::Manifest manifest;
    std::optional<lsic::nn::ModelGraph> overfit;
    lsic::nn::FeatureSet train_set;
    lsic::nn::FeatureSet all_set;
};

// 1. Pipeline MFCCs vs an independent naive-DFT implementation.
Outcome mfcc_oracle(Context&) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20260101);
    std::uniform_real_distribution<double> freq(40.0, 7900.0), amp(0.01, 0.4), phase(0.0, 6.28);
    std::normal_distribution<double> nd;
    double worst = 0.0;
    const int clips = 12;
    for (int c = 0; c < clips; ++c) {
        lsic::AudioClip clip;
        clip.samples.resize(32000);
        const double noise = amp(rng) * 0.2;
        std::vector<std::array<double, 3>> tones(1 + static_cast<std::size_t>(c % 3));
        for (auto& t : tones) t = {freq(rng), amp(rng), phase(rng)};
        for (std::size_t i = 0; i < clip.samples.size(); ++i) {
            double v = noise * nd(rng);
            for (const auto& t : tones) v += t[1] * std::sin(2.0 * M_PI * t[0] * static_cast<double>(i) / 16000.0 + t[2]);
            // a silent stretch exercises the log floor on some clips
            if (c % 4 == 0 && i > 12000 && i < 16000) v = 0.0;
            clip.samples[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
        }
        const std::size_t n = c % 2 == 0 ? 13 : 10;
        auto m = lsic::mfcc(clip, lsic::FrontendConfig::with_mfcc(n));
        lsic::testing::OracleParams op;
        op.ncep = n;
        auto ref = lsic::testing::oracle_mfcc(clip.samples, op);
        if (ref.size() != m.frames()) return {Status::Fail, "frame count mismatch"};
        for (std::size_t t = 0; t < ref.size(); ++t) {
            for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(ref[t][k] - m.values(t, k)));
        }
    }
    const double secs = seconds_since(t0);
    return verdict(worst <= 1e-4 && secs < 10.0, std::to_string(clips) + " clips, max_abs_err=" + fmt("%.2e", worst) +
                                                    ", " + fmt("%.2f", secs) + " s");
}

// 2. Analytic vs central finite-difference gradients.
Outcome gradients(Context&) {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::size_t tensors = 0;
    for (auto [arch, heads, dropout] :
         {std::tuple{lsic::nn::ArchVariant::Gmp, lsic::nn::HeadKind::SingleIntent, 0.3f},
          std::tuple{lsic::nn::ArchVariant::Flatten, lsic::nn::HeadKind::Slots, 0.0f}}) {
        for (const auto& [name, err] : lsic::testing::gradient_errors(lsic::testing::make_grad_toy(arch, heads, dropout))) {
            worst = std::max(worst, err);
            ++tensors;
        }
    }
    const double secs = seconds_since(t0);
    return verdict(tensors > 0 && worst <= 1e-3 && secs < 60.0,
                   std::to_string(tensors) + " tensors, max_rel_err=" + fmt("%.2e", worst) + ", " + fmt("%.2f", secs) +
                       " s");
}

// 3. Overfit the 40-clip corpus; validation is the training set itself.
Outcome overfit(Context& ctx) {
    const auto t0 = Clock::now();
    auto clips = lsic::data::load_split(ctx.manifest, lsic::data::Split::Train);
    if (clips.size() != 40) return {Status::Fail, "expected 40 training clips, got " + std::to_string(clips.size())};
    const auto fe = lsic::FrontendConfig::with_mfcc(13);
    ctx.train_set = lsic::data::extract_features(clips, fe);
    lsic::nn::ModelOptions mo;
    mo.frontend = fe;
    auto model = lsic::nn::build_model(lsic::nn::ArchVariant::Gmp, 13, lsic::nn::HeadKind::SingleIntent, mo);
    lsic::nn::TrainConfig cfg;  // max 300 epochs, patience 20
    auto r = lsic::nn::train(std::move(model), ctx.train_set, ctx.train_set, cfg);
    const double acc = lsic::nn::accuracy(r.model, ctx.train_set);
    ctx.overfit = r.model;
    const double secs = seconds_since(t0);
    const bool ok = acc == 1.0 && r.best_epoch <= cfg.max_epochs && r.stopped_epoch == r.best_epoch + cfg.patience &&
                    secs < 300.0;
    return verdict(ok, "train_acc=" + fmt("%.3f", acc) + ", best_epoch=" + std::to_string(r.best_epoch) +
                           ", stopped_epoch=" + std::to_string(r.stopped_epoch) + ", " + fmt("%.1f", secs) + " s");
}

std::vector<lsic::nn::Prediction> predict_all(const lsic::nn::ModelGraph& m, const lsic::nn::FeatureSet& set) {
    lsic::nn::InferenceSession s(m);
    return s.run_batch(set.data, set.size(), set.frames);
}

// 4. Post-training quantization fidelity on the toy corpus.
Outcome quantization(Context& ctx) {
    if (!ctx.overfit) return {Status::Fail, "needs the criterion 3 model"};
    const auto& fp32 = *ctx.overfit;
    std::vector<lsic::data::LoadedClip> every;
    for (auto split : {lsic::data::Split::Train, lsic::data::Split::Val, lsic::data::Split::Test}) {
        auto part = lsic::data::load_split(ctx.manifest, split);
        every.insert(every.end(), part.begin(), part.end());
    }
    ctx.all_set = lsic::data::extract_features(every, fp32.frontend);
    const auto ranges = lsic::quant::calibrate_activations(fp32, ctx.train_set);
    const auto f16 = lsic::quant::quantize_model(fp32, lsic::nn::QuantMode::Fp16Weights);
    const auto i8w = lsic::quant::quantize_model(fp32, lsic::nn::QuantMode::Int8Weights);
    const auto i8f = lsic::quant::quantize_model(fp32, lsic::nn::QuantMode::Int8Full, ranges);

    const auto ref = predict_all(fp32, ctx.all_set);
    const auto p16 = predict_all(f16, ctx.all_set);
    const auto p8 = predict_all(i8f, ctx.all_set);
    std::size_t agree16 = 0, agree8 = 0;
    double dev16 = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        agree16 += p16[i].intent == ref[i].intent;
        agree8 += p8[i].intent == ref[i].intent;
        for (std::size_t k = 0; k < ref[i].heads[0].probs.size(); ++k) {
            dev16 = std::max(dev16, std::abs(p16[i].heads[0].probs[k] - ref[i].heads[0].probs[k]));
        }
    }
    const double n = static_cast<double>(ref.size());
    const double base = static_cast<double>(lsic::quant::payload_bytes(fp32));
    const double r16 = static_cast<double>(lsic::quant::payload_bytes(f16)) / base;
    const double r8 = static_cast<double>(lsic::quant::payload_bytes(i8f)) / base;
    auto report = lsic::quant::size_report({{lsic::nn::QuantMode::Fp32, fp32},
                                            {lsic::nn::QuantMode::Fp16Weights, f16},
                                            {lsic::nn::QuantMode::Int8Weights, i8w},
                                            {lsic::nn::QuantMode::Int8Full, i8f}},
                                           lsic::nn::FeatureSet{});
    const double red16 = report.find(lsic::nn::QuantMode::Fp16Weights)->reduction_percent;
    const double red8 = report.find(lsic::nn::QuantMode::Int8Full)->reduction_percent;
    const bool ok = agree16 == ref.size() && dev16 <= 1e-2 && agree8 >= 0.95 * n && r8 <= 0.26 && r16 <= 0.51 &&
                    red16 < red8;
    return verdict(ok, "fp16 agree=" + fmt("%.3f", agree16 / n) + " max_dev=" + fmt("%.1e", dev16) +
                           ", int8_full agree=" + fmt("%.3f", agree8 / n) + ", payload fp16=" + fmt("%.3f", r16) +
                           " int8=" + fmt("%.3f", r8) + ", reduction fp16=" + fmt("%.2f", red16) +
                           "% < int8_full=" + fmt("%.2f", red8) + "%");
}

// 5. Grid shape, column schema and the augmentation triplet.
Outcome grid(Context& ctx) {
    lsic::nn::TrainConfig cfg;
    cfg.max_epochs = 1;
    const std::vector<std::string> schema{"exp",      "mfccs",     "augmentation", "architecture",
                                          "accuracy", "test_loss", "parameters"};
    std::string detail;
    bool ok = true;
    for (const auto& [id, rows_expected] : {std::pair<std::string, std::size_t>{"rpi", 8}, {"wio", 4}}) {
        auto rows = lsic::data::run_experiment_grid(id, ctx.manifest, cfg);
        ok = ok && rows.size() == rows_expected;
        std::istringstream recs(lsic::data::grid_records(rows));
        std::string line;
        while (std::getline(recs, line)) {
            auto j = nlohmann::ordered_json::parse(line);
            std::vector<std::string> keys;
            for (auto it = j.begin(); it != j.end() && keys.size() < schema.size(); ++it) keys.push_back(it.key());
            ok = ok && keys == schema;
        }
        for (const auto& a : rows) {
            if (!a.spec.augment) continue;
            for (const auto& b : rows) {
                if (!b.spec.augment && b.spec.n_mfcc == a.spec.n_mfcc && b.spec.arch == a.spec.arch) {
                    ok = ok && a.train_features == 3 * b.train_features;
                }
            }
        }
        const auto table = lsic::data::grid_table(rows);
        const auto header = table.substr(0, table.find('\n'));
        std::istringstream cols(header);
        std::vector<std::string> words;
        for (std::string w; cols >> w;) words.push_back(w);
        ok = ok && words == std::vector<std::string>{"Exp", "MFCCs", "Augmentation", "Architecture", "Accuracy(%)",
                                                     "Test", "Loss", "Parameters"};
        detail += id + "=" + std::to_string(rows.size()) + " rows ";
    }
    return verdict(ok, detail + "(7-column schema, augmented features 3x)");
}

// 6. Speaker-disjoint splits.
Outcome split_hygiene(Context&) {
    auto ref = lsic::data::split_check(lsic::data::make_reference_manifest());
    std::istringstream bad(
        R"({"path":"a.wav","intent":"tv_on","action":"on","object":"tv","speaker_id":"x","split":"train"})"
        "\n"
        R"({"path":"b.wav","intent":"tv_on","action":"on","object":"tv","speaker_id":"y","split":"val"})"
        "\n"
        R"({"path":"c.wav","intent":"tv_on","action":"on","object":"tv","speaker_id":"x","split":"test"})"
        "\n");
    auto violation = lsic::data::split_check(lsic::data::parse_manifest(bad));
    const bool ok = ref.ok() && ref.train_test_overlap.empty() && ref.speakers[lsic::data::Split::Test].size() == 7 &&
                    !violation.ok() && violation.train_test_overlap.count("x") == 1;
    return verdict(ok, "reference: " + std::to_string(ref.speakers[lsic::data::Split::Test].size()) +
                           " test speakers, overlap " + std::to_string(ref.train_test_overlap.size()) +
                           "; violating manifest flagged=" + (violation.ok() ? "no" : "yes"));
}

// 7. WAV -> predict -> gate -> publish -> device, all in-process.
Outcome loopback(Context& ctx) {
    if (!ctx.overfit) return {Status::Fail, "needs the criterion 3 model"};
    const lsic::nn::InferenceSession session(*ctx.overfit);
    auto bus = std::make_shared<lsic::bus::LoopbackBus>();
    bus->connect();
    std::size_t traffic = 0;
    auto tap = bus->subscribe("#", [&](const std::string& topic, const std::string&) {
        traffic += topic == lsic::bus::kCommandTopic;
    });
    auto fleet = lsic::devices::run_fleet(bus);
    lsic::bus::CommandPublisher pub(*bus, "hub");
    const lsic::bus::GateConfig gate{0.75};

    // The most confident training clip whose command changes a device from
    // its initial state (power on or door open) drives the timed run.
    const auto preds = predict_all(*ctx.overfit, ctx.train_set);
    std::optional<std::size_t> pick;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i].action != "on" && preds[i].action != "open") continue;
        if (!pick || preds[i].confidence > preds[*pick].confidence) pick = i;
    }
    if (!pick) return {Status::Fail, "no power-on or open prediction on the corpus"};
    const std::size_t best = *pick;
    const auto* rec = ctx.manifest.split(lsic::data::Split::Train)[best];
    const auto t0 = Clock::now();
    auto clip = lsic::read_wav(ctx.manifest.resolve(*rec));
    auto out = lsic::serve::process_clip(session, clip, gate, pub);
    const double ms = seconds_since(t0) * 1000.0;
    const auto kind = lsic::devices::parse_kind(out.prediction.object);
    bool changed = false;
    if (kind) {
        auto node = fleet->node("node-" + out.prediction.object);
        changed = node && node->handled == 1 && !(node->state == lsic::devices::DeviceState::initial(*kind));
    }
    const bool e2e = out.decision.accepted && out.receipt && changed && traffic == 1 && ms < 100.0;

    const std::size_t before = traffic;
    const lsic::nn::InferenceSession low(lsic::testing::rigged_intent_model("lights_on", 0.74));
    auto quiet = lsic::serve::process_clip(low, clip, gate, pub);
    const bool silent = !quiet.decision.accepted && quiet.prediction.confidence < 0.75 && traffic == before;

    const lsic::nn::InferenceSession bad(lsic::testing::rigged_slots_model("lights", "decrease_volume", 0.99));
    auto invalid = lsic::serve::process_clip(bad, clip, gate, pub);
    const bool rejected = !invalid.decision.accepted &&
                          invalid.decision.reason == lsic::bus::RejectReason::InvalidPair && traffic == before;

    return verdict(e2e && silent && rejected,
                   out.prediction.intent + " @" + fmt("%.3f", out.prediction.confidence) + " -> " +
                       (changed ? "device changed" : "no device change") + " in " + fmt("%.1f", ms) + " ms; 0.74 " +
                       (silent ? "silent" : "published") + "; lights+decrease_volume " +
                       (rejected ? "rejected" : "accepted"));
}

// 8. Replay determinism and state bounds.
Outcome devices(Context&) {
    const auto& maps = lsic::LabelMaps::standard();
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> pick(0, 19);
    std::uniform_int_distribution<std::size_t> length(1, 60);
    bool ok = true;
    for (int s = 0; s < 1000 && ok; ++s) {
        std::vector<lsic::bus::CommandMsg> log(length(rng));
        for (std::size_t i = 0; i < log.size(); ++i) {
            const int k = pick(rng);
            auto& m = log[i];
            m.object = maps.objects()[static_cast<std::size_t>(maps.object_of(k))];
            m.action = maps.actions()[static_cast<std::size_t>(maps.action_of(k))];
            m.intent = maps.intents()[static_cast<std::size_t>(k)];
            m.source = "hub";
            m.seq = i + 1;
        }
        const auto a = lsic::devices::replay(log);
        const auto b = lsic::devices::replay(log);
        ok = a == b && a.size() == 8;
        auto states = a;
        for (auto& [kind, st] : states) st = lsic::devices::DeviceState::initial(kind);
        for (const auto& m : log) {
            auto& st = states.at(*lsic::devices::parse_kind(m.object));
            st = lsic::devices::apply_command(st, m).state;
            ok = ok && st.within_bounds();
        }
        ok = ok && states == a;
    }
    return verdict(ok, "1000 sequences replayed twice, bounds held");
}

// 9. Model store round trip and corruption detection.
Outcome store(Context& ctx) {
    if (!ctx.overfit) return {Status::Fail, "needs the criterion 3 model"};
    const auto& m = *ctx.overfit;
    const auto ranges = lsic::quant::calibrate_activations(m, ctx.train_set);
    bool ok = true;
    std::string detail;
    for (auto mode : {lsic::nn::QuantMode::Fp32, lsic::nn::QuantMode::Fp16Weights, lsic::nn::QuantMode::Int8Weights,
                      lsic::nn::QuantMode::Int8Full}) {
        const auto q = lsic::quant::quantize_model(m, mode, ranges);
        const auto path = ctx.dir / ("model_" + std::string(lsic::nn::to_string(mode)) + ".lsic");
        const auto bytes = lsic::store::serialize(q);
        lsic::store::save(q, path);
        const auto loaded = lsic::store::load(path);
        ok = ok && loaded == q && lsic::store::serialize(loaded) == bytes;
        detail += std::string(lsic::nn::to_string(mode)) + "=" + std::to_string(bytes.size()) + "B ";
    }
    auto bytes = lsic::store::serialize(m);
    bytes[bytes.size() / 2] ^= 0x40;
    bool corrupt = false;
    try {
        lsic::store::deserialize(bytes);
    } catch (const lsic::Error& e) {
        corrupt = e.code() == lsic::ErrorCode::CorruptFile;
    }
    return verdict(ok && corrupt, detail + "bit-identical; flipped byte -> " + (corrupt ? "CorruptFile" : "accepted"));
}

// 10. Full-corpus run of experiment 6, only with a real dataset.
Outcome stretch(Context&) {
    const char* path = std::getenv("LSIC_DATASET_MANIFEST");
    if (!path || !*path) return {Status::Skipped, "set LSIC_DATASET_MANIFEST to run (multi-hour)"};
    auto manifest = lsic::data::load_manifest(path);
    const auto fe = lsic::FrontendConfig::with_mfcc(13);
    lsic::AugmentParams aug;
    auto train_set = lsic::data::extract_features(lsic::data::load_split(manifest, lsic::data::Split::Train), fe, &aug);
    auto val_set = lsic::data::extract_features(lsic::data::load_split(manifest, lsic::data::Split::Val), fe);
    lsic::nn::ModelOptions mo;
    mo.frontend = fe;
    auto r = lsic::nn::train(lsic::nn::build_model(lsic::nn::ArchVariant::Gmp, 13, lsic::nn::HeadKind::SingleIntent, mo),
                             train_set, val_set, {});
    auto m = lsic::data::evaluate(r.model, manifest, lsic::data::Split::Test);
    return verdict(m.accuracy >= 0.80, "exp 6 test accuracy " + fmt("%.2f", 100.0 * m.accuracy) + "%");
}

}  // namespace

int main() {
    Context ctx;
    ctx.dir = fs::temp_directory_path() / "lsic_acceptance";
    fs::remove_all(ctx.dir);
    ctx.manifest = lsic::synth::write_corpus(ctx.dir / "corpus");

    const std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> criteria{
        {"mfcc oracle equivalence", mfcc_oracle},   {"gradient correctness", gradients},
        {"overfit sanity", overfit},                {"quantization fidelity", quantization},
        {"experiment grid mechanics", grid},        {"split hygiene", split_hygiene},
        {"end-to-end loopback", loopback},          {"device determinism", devices},
        {"model store", store},                     {"full-corpus stretch run", stretch},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second(ctx);
        } catch (const std::exception& e) {
            o = {Status::Fail, std::string("exception: ") + e.what()};
        }
        const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIPPED";
        failures += o.status == Status::Fail;
        std::printf("criterion %zu (%s): %s - %s\n", i + 1, criteria[i].first.c_str(), tag, o.detail.c_str());
        std::fflush(stdout);
    }
    fs::remove_all(ctx.dir);
    return failures == 0 ? 0 : 1;
}

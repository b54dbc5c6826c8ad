// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "lsic/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "lsic/error.hpp"
#include "lsic/labels.hpp"

namespace lsic::synth {

namespace {

double tone_hz(int slot) { return 300.0 * std::pow(2.0, slot / 8.0); }

}  // namespace

AudioClip intent_clip(int intent, int speaker, std::uint64_t seed, double duration_s) {
    if (intent < 0 || intent >= kNumIntents) throw Error(ErrorCode::ConfigInvalid, "intent index out of range");
    std::mt19937_64 rng(seed ^ (static_cast<std::uint64_t>(speaker) * 0x9E3779B97F4A7C15ull) ^
                        static_cast<std::uint64_t>(intent));
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Speaker traits: +-2% pitch, loudness, pace.
    const double pitch = 1.0 + 0.02 * std::sin(1.7 * speaker + 0.3);
    const double gain = 0.35 + 0.15 * (0.5 + 0.5 * std::cos(2.3 * speaker));
    const double pace = 1.0 + 0.05 * jitter(rng);

    const double f1 = tone_hz(intent) * pitch;
    const double f2 = tone_hz((intent * 7 + 3) % kNumIntents) * pitch;
    const auto n = static_cast<std::size_t>(duration_s * pace * kSampleRate);
    const std::size_t split = n / 2;

    AudioClip clip;
    clip.samples.resize(n);
    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = i < split ? f1 : f2;
        phase += 2.0 * std::numbers::pi * f / kSampleRate;
        const double t = static_cast<double>(i) / static_cast<double>(n);
        const double envelope = std::sin(std::numbers::pi * t);
        const double v = gain * envelope * (std::sin(phase) + 0.3 * std::sin(2.0 * phase)) + 0.003 * gauss(rng);
        clip.samples[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
    }
    clip.source_id = "synth:" + LabelMaps::standard().intents()[static_cast<std::size_t>(intent)] + ":spk" +
                     std::to_string(speaker);
    return clip;
}

data::Manifest write_corpus(const std::filesystem::path& dir, const CorpusOptions& options) {
    std::filesystem::create_directories(dir / "audio");
    const auto& maps = LabelMaps::standard();
    data::Manifest m;
    m.base_dir = dir;

    // Speaker ids: train 0..9, val 0..9 (shared), test 100.. (held out).
    int counter = 0;
    auto emit = [&](data::Split split, int per_class, int speaker_base, int speaker_count) {
        for (int k = 0; k < kNumIntents; ++k) {
            for (int j = 0; j < per_class; ++j) {
                const int speaker = speaker_base + (k + j * 3) % speaker_count;
                const AudioClip clip = intent_clip(k, speaker, options.seed + static_cast<std::uint64_t>(counter));
                data::ManifestRecord r;
                r.intent = maps.intents()[static_cast<std::size_t>(k)];
                r.object = maps.objects()[static_cast<std::size_t>(maps.object_of(k))];
                r.action = maps.actions()[static_cast<std::size_t>(maps.action_of(k))];
                r.speaker_id = "spk" + std::to_string(speaker);
                r.split = split;
                r.duration_s = clip.duration_s();
                r.path = "audio/" + std::string(data::to_string(split)) + "_" + std::to_string(counter) + ".wav";
                write_wav(dir / r.path, clip);
                m.records.push_back(std::move(r));
                ++counter;
            }
        }
    };
    emit(data::Split::Train, options.train_per_class, 0, 10);
    emit(data::Split::Val, options.val_per_class, 0, 10);
    emit(data::Split::Test, options.test_per_class, 100, 4);
    data::save_manifest(m, dir / "manifest.jsonl");
    return m;
}

}  // namespace lsic::synth

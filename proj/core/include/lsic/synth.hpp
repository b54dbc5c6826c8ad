// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <filesystem>

#include "lsic/audio.hpp"
#include "lsic/dataset.hpp"

namespace lsic::synth {

// Stand-in audio for the 20 intents: each intent is a two-segment tone
// pattern; speakers perturb pitch, loudness, timing and add a little noise.
AudioClip intent_clip(int intent, int speaker, std::uint64_t seed, double duration_s = 1.4);

struct CorpusOptions {
    int train_per_class = 2;
    int val_per_class = 1;
    int test_per_class = 1;
    std::uint64_t seed = 7;
};

/// Writes WAVs plus manifest.jsonl under dir and returns the manifest.
/// Train/val speakers are disjoint from test speakers.
data::Manifest write_corpus(const std::filesystem::path& dir, const CorpusOptions& options = {});

}  // namespace lsic::synth

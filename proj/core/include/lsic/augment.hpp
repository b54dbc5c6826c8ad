// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstdint>

#include "lsic/audio.hpp"

namespace lsic {

struct AugmentParams {
    double snr_db = 20.0;
    double semitones = 2.0;
    std::uint64_t seed = 0;

    // Throws ConfigInvalid.
    void validate() const;
};

/// clip + sigma * N(0,1) with sigma = rms(clip) / 10^(snr_db/20), clipped to
/// [-1, 1]. Throws SignalSilent for a zero-RMS clip.
AudioClip add_white_noise(const AudioClip& clip, double snr_db, std::uint64_t seed);

/// Linear-interpolation resample by 2^(semitones/12), then fit back to the
/// input length. Positive semitones raise pitch (and shorten the content).
AudioClip pitch_scale(const AudioClip& clip, double semitones);

/// {original, white-noise, pitch-scaled}.
std::array<AudioClip, 3> augment_triplet(const AudioClip& clip, const AugmentParams& params);

}  // namespace lsic

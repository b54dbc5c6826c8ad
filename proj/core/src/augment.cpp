// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "lsic/augment.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lsic/error.hpp"

namespace lsic {

void AugmentParams::validate() const {
    if (!std::isfinite(snr_db)) throw Error(ErrorCode::ConfigInvalid, "snr_db must be finite");
    if (!(std::abs(semitones) <= 12.0)) throw Error(ErrorCode::ConfigInvalid, "|semitones| must be <= 12");
}

AudioClip add_white_noise(const AudioClip& clip, double snr_db, std::uint64_t seed) {
    const double signal_rms = rms(clip);
    if (signal_rms == 0.0) throw Error(ErrorCode::SignalSilent, "SNR undefined for a silent clip");
    const double sigma = signal_rms / std::pow(10.0, snr_db / 20.0);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    AudioClip out = clip;
    for (float& s : out.samples) {
        s = static_cast<float>(std::clamp(s + sigma * gauss(rng), -1.0, 1.0));
    }
    return out;
}

AudioClip pitch_scale(const AudioClip& clip, double semitones) {
    if (semitones == 0.0) return clip;
    const double ratio = std::pow(2.0, semitones / 12.0);
    const std::size_t n = clip.samples.size();
    if (n == 0) return clip;

    AudioClip resampled;
    resampled.sample_rate_hz = clip.sample_rate_hz;
    resampled.source_id = clip.source_id;
    const auto out_len = static_cast<std::size_t>(std::floor(static_cast<double>(n - 1) / ratio)) + 1;
    resampled.samples.resize(out_len);
    for (std::size_t i = 0; i < out_len; ++i) {
        const double pos = static_cast<double>(i) * ratio;
        const auto idx = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(idx);
        const double a = clip.samples[std::min(idx, n - 1)];
        const double b = clip.samples[std::min(idx + 1, n - 1)];
        resampled.samples[i] = static_cast<float>(a + (b - a) * frac);
    }
    return fit_length(resampled, n);
}

std::array<AudioClip, 3> augment_triplet(const AudioClip& clip, const AugmentParams& params) {
    params.validate();
    return {clip, add_white_noise(clip, params.snr_db, params.seed), pitch_scale(clip, params.semitones)};
}

}  // namespace lsic

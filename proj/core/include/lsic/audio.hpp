// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lsic {

inline constexpr int kSampleRate = 16000;
// Fixed model window: 2 s at 16 kHz.
inline constexpr std::size_t kWindowSamples = 32000;

struct AudioClip {
    std::vector<float> samples;
    int sample_rate_hz = kSampleRate;
    std::optional<std::string> source_id;

    std::size_t size() const { return samples.size(); }
    double duration_s() const {
        return sample_rate_hz > 0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
    }
};

enum class WavEncoding { Pcm16, Float32 };

/// Reads a RIFF/WAVE file (PCM16 or IEEE float32, mono or stereo). Stereo is
/// downmixed by averaging channels. The sample rate is reported verbatim;
/// callers that need 16 kHz use require_sample_rate().
AudioClip read_wav(const std::filesystem::path& path);
AudioClip parse_wav(const std::vector<unsigned char>& bytes);

void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               WavEncoding encoding = WavEncoding::Pcm16);
std::vector<unsigned char> encode_wav(const AudioClip& clip,
                                      WavEncoding encoding = WavEncoding::Pcm16);

// Throws WrongSampleRate unless clip.sample_rate_hz == rate.
void require_sample_rate(const AudioClip& clip, int rate = kSampleRate);

/// Zero-pads symmetrically (odd extra sample goes right) or center-crops to
/// exactly target_samples.
AudioClip fit_length(const AudioClip& clip, std::size_t target_samples);

AudioClip peak_normalize(const AudioClip& clip);

double rms(const AudioClip& clip);

}  // namespace lsic

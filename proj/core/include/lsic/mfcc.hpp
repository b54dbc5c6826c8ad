// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "lsic/audio.hpp"

namespace lsic {

struct FrontendConfig {
    std::size_t frame_len = 400;  // 25 ms
    std::size_t hop_len = 160;    // 10 ms
    std::size_t n_fft = 512;
    std::size_t n_mels = 40;
    double fmin_hz = 20.0;
    double fmax_hz = 8000.0;
    std::size_t n_mfcc = 13;
    double log_floor = 1e-10;

    static FrontendConfig with_mfcc(std::size_t n) {
        FrontendConfig cfg;
        cfg.n_mfcc = n;
        return cfg;
    }

    // Throws ConfigInvalid.
    void validate(int sample_rate = kSampleRate) const;

    // Frame count for a clip of n samples (0 when shorter than one frame).
    std::size_t frames_for(std::size_t n) const {
        return n < frame_len ? 0 : 1 + (n - frame_len) / hop_len;
    }

    bool operator==(const FrontendConfig&) const = default;
};

// Row-major real matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct MfccMatrix {
    Matrix values;  // frames x n_mfcc
    FrontendConfig config;

    std::size_t frames() const { return values.rows; }
    std::size_t n_mfcc() const { return values.cols; }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Frame t covers samples [t*hop, t*hop + frame_len). Throws ClipTooShort.
Matrix frame_signal(const AudioClip& clip, const FrontendConfig& cfg);

/// Periodic-Hann windowed |FFT|^2, bins 0..n_fft/2.
Matrix power_spectrum(const Matrix& frames, const FrontendConfig& cfg);

std::vector<double> periodic_hann(std::size_t n);

/// Filter centre frequencies (n_mels + 2 edge points, including fmin/fmax).
std::vector<double> mel_edge_frequencies(const FrontendConfig& cfg);

/// n_mels x (n_fft/2+1) triangular filters with unit peak.
Matrix mel_filterbank(const FrontendConfig& cfg, int sample_rate = kSampleRate);

/// Orthonormal DCT-II of each row, keeping the first `keep` coefficients.
Matrix dct2_orthonormal(const Matrix& in, std::size_t keep);

MfccMatrix mfcc(const AudioClip& clip, const FrontendConfig& cfg);

// Feature cache: "MFCC" | u16 version | u32 T | u16 n | f32 row-major data.
void save_feature_cache(const std::filesystem::path& path, const MfccMatrix& m);
MfccMatrix load_feature_cache(const std::filesystem::path& path);

}  // namespace lsic

// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "lsic/mfcc.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "lsic/error.hpp"
#include "lsic/fft.hpp"

namespace lsic {

void FrontendConfig::validate(int sample_rate) const {
    auto fail = [](const char* why) { throw Error(ErrorCode::ConfigInvalid, why); };
    if (frame_len == 0 || hop_len == 0) fail("frame_len and hop_len must be positive");
    if (!is_power_of_two(n_fft)) fail("n_fft must be a power of two");
    if (frame_len > n_fft) fail("frame_len must not exceed n_fft");
    if (n_mels == 0) fail("n_mels must be positive");
    if (n_mfcc == 0 || n_mfcc > n_mels) fail("n_mfcc must be in [1, n_mels]");
    if (!(fmin_hz >= 0.0) || !(fmin_hz < fmax_hz)) fail("need 0 <= fmin_hz < fmax_hz");
    if (fmax_hz > sample_rate / 2.0) fail("fmax_hz above Nyquist");
    if (!(log_floor > 0.0)) fail("log_floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Matrix frame_signal(const AudioClip& clip, const FrontendConfig& cfg) {
    const std::size_t frames = cfg.frames_for(clip.samples.size());
    if (frames == 0) {
        throw Error(ErrorCode::ClipTooShort, std::to_string(clip.samples.size()) +
                                                 " samples, need at least " + std::to_string(cfg.frame_len));
    }
    Matrix out(frames, cfg.frame_len);
    for (std::size_t t = 0; t < frames; ++t) {
        const float* src = clip.samples.data() + t * cfg.hop_len;
        double* dst = &out(t, 0);
        for (std::size_t i = 0; i < cfg.frame_len; ++i) dst[i] = src[i];
    }
    return out;
}

std::vector<double> periodic_hann(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    }
    return w;
}

Matrix power_spectrum(const Matrix& frames, const FrontendConfig& cfg) {
    const std::size_t bins = cfg.n_fft / 2 + 1;
    const Fft fft(cfg.n_fft);
    const auto window = periodic_hann(frames.cols);
    std::vector<std::complex<double>> buf(cfg.n_fft);
    Matrix out(frames.rows, bins);
    for (std::size_t t = 0; t < frames.rows; ++t) {
        std::fill(buf.begin(), buf.end(), std::complex<double>{});
        for (std::size_t i = 0; i < frames.cols; ++i) buf[i] = frames(t, i) * window[i];
        fft.transform(buf);
        for (std::size_t k = 0; k < bins; ++k) out(t, k) = std::norm(buf[k]);
    }
    return out;
}

std::vector<double> mel_edge_frequencies(const FrontendConfig& cfg) {
    const double lo = hz_to_mel(cfg.fmin_hz);
    const double hi = hz_to_mel(cfg.fmax_hz);
    std::vector<double> edges(cfg.n_mels + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        double mel = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1);
        edges[i] = mel_to_hz(mel);
    }
    edges.front() = cfg.fmin_hz;
    edges.back() = cfg.fmax_hz;
    return edges;
}

Matrix mel_filterbank(const FrontendConfig& cfg, int sample_rate) {
    cfg.validate(sample_rate);
    const std::size_t bins = cfg.n_fft / 2 + 1;
    const auto edges = mel_edge_frequencies(cfg);
    Matrix fb(cfg.n_mels, bins);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
        const double left = edges[m];
        const double centre = edges[m + 1];
        const double right = edges[m + 2];
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / static_cast<double>(cfg.n_fft);
            double w = 0.0;
            if (f > left && f <= centre) {
                w = (f - left) / (centre - left);
            } else if (f > centre && f < right) {
                w = (right - f) / (right - centre);
            }
            fb(m, k) = w;
        }
    }
    return fb;
}

Matrix dct2_orthonormal(const Matrix& in, std::size_t keep) {
    const std::size_t m = in.cols;
    Matrix basis(keep, m);
    for (std::size_t k = 0; k < keep; ++k) {
        const double scale = k == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m);
        for (std::size_t j = 0; j < m; ++j) {
            basis(k, j) = scale * std::cos(std::numbers::pi * static_cast<double>(k) *
                                           (2.0 * static_cast<double>(j) + 1.0) / (2.0 * m));
        }
    }
    Matrix out(in.rows, keep);
    for (std::size_t r = 0; r < in.rows; ++r) {
        for (std::size_t k = 0; k < keep; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += basis(k, j) * in(r, j);
            out(r, k) = acc;
        }
    }
    return out;
}

MfccMatrix mfcc(const AudioClip& clip, const FrontendConfig& cfg) {
    require_sample_rate(clip);
    cfg.validate(clip.sample_rate_hz);
    const Matrix frames = frame_signal(clip, cfg);
    const Matrix power = power_spectrum(frames, cfg);
    const Matrix fb = mel_filterbank(cfg, clip.sample_rate_hz);

    Matrix logmel(power.rows, cfg.n_mels);
    for (std::size_t t = 0; t < power.rows; ++t) {
        for (std::size_t m = 0; m < cfg.n_mels; ++m) {
            double e = 0.0;
            for (std::size_t k = 0; k < power.cols; ++k) e += fb(m, k) * power(t, k);
            logmel(t, m) = std::log(std::max(e, cfg.log_floor));
        }
    }
    return MfccMatrix{dct2_orthonormal(logmel, cfg.n_mfcc), cfg};
}

namespace {

constexpr char kCacheMagic[4] = {'M', 'F', 'C', 'C'};
constexpr std::uint16_t kCacheVersion = 1;

template <typename T>
void write_raw(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw Error(ErrorCode::CorruptFile, "feature cache truncated");
    return v;
}

}  // namespace

void save_feature_cache(const std::filesystem::path& path, const MfccMatrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write(kCacheMagic, 4);
    write_raw<std::uint16_t>(out, kCacheVersion);
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(m.frames()));
    write_raw<std::uint16_t>(out, static_cast<std::uint16_t>(m.n_mfcc()));
    for (double v : m.values.data) write_raw<float>(out, static_cast<float>(v));
}

MfccMatrix load_feature_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCacheMagic, 4) != 0) {
        throw Error(ErrorCode::CorruptFile, "bad feature cache magic in " + path.string());
    }
    auto version = read_raw<std::uint16_t>(in);
    if (version > kCacheVersion) {
        throw Error(ErrorCode::UnsupportedVersion, "feature cache version " + std::to_string(version));
    }
    auto frames = read_raw<std::uint32_t>(in);
    auto n = read_raw<std::uint16_t>(in);
    MfccMatrix m;
    m.config.n_mfcc = n;
    m.values = Matrix(frames, n);
    for (double& v : m.values.data) v = read_raw<float>(in);
    return m;
}

}  // namespace lsic

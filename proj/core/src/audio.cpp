// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "lsic/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lsic/error.hpp"

namespace lsic {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const unsigned char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

template <typename T>
void put_le(std::vector<unsigned char>& out, T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.insert(out.end(), buf, buf + sizeof(T));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
    out.insert(out.end(), tag, tag + 4);
}

}  // namespace

AudioClip parse_wav(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw Error(ErrorCode::MalformedWav, "missing RIFF/WAVE header");
    }

    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t rate = 0;
    std::uint16_t bits = 0;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;
    bool have_fmt = false;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        auto size = read_le<std::uint32_t>(chunk + 4);
        if (size > bytes.size() - pos - 8) {
            throw Error(ErrorCode::MalformedWav, "chunk size exceeds file");
        }
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size < 16) throw Error(ErrorCode::MalformedWav, "fmt chunk too small");
            format = read_le<std::uint16_t>(chunk + 8);
            channels = read_le<std::uint16_t>(chunk + 10);
            rate = read_le<std::uint32_t>(chunk + 12);
            bits = read_le<std::uint16_t>(chunk + 22);
            if (format == kFormatExtensible && size >= 40) {
                // Subformat GUID begins with the actual format tag.
                format = read_le<std::uint16_t>(chunk + 32);
            }
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = chunk + 8;
            data_size = size;
        }
        pos += 8 + size + (size & 1u);
    }

    if (!have_fmt) throw Error(ErrorCode::MalformedWav, "no fmt chunk");
    if (!data) throw Error(ErrorCode::MalformedWav, "no data chunk");
    if (channels == 0 || channels > 2) {
        throw Error(ErrorCode::UnsupportedEncoding, "channel count " + std::to_string(channels));
    }
    if (rate == 0) throw Error(ErrorCode::MalformedWav, "zero sample rate");

    bool pcm16 = format == kFormatPcm && bits == 16;
    bool f32 = format == kFormatFloat && bits == 32;
    if (!pcm16 && !f32) {
        throw Error(ErrorCode::UnsupportedEncoding,
                    "format " + std::to_string(format) + " with " + std::to_string(bits) + " bits");
    }

    std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
    std::size_t frames = data_size / frame_bytes;

    AudioClip clip;
    clip.sample_rate_hz = static_cast<int>(rate);
    clip.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        const unsigned char* fp = data + i * frame_bytes;
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) {
            if (pcm16) {
                acc += read_le<std::int16_t>(fp + 2 * c) / 32768.0;
            } else {
                float v = read_le<float>(fp + 4 * c);
                if (!std::isfinite(v)) throw Error(ErrorCode::MalformedWav, "non-finite sample");
                acc += v;
            }
        }
        clip.samples[i] = static_cast<float>(acc / channels);
    }
    return clip;
}

AudioClip read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    try {
        AudioClip clip = parse_wav(bytes);
        clip.source_id = path.string();
        return clip;
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

std::vector<unsigned char> encode_wav(const AudioClip& clip, WavEncoding encoding) {
    const bool pcm = encoding == WavEncoding::Pcm16;
    const std::uint16_t bits = pcm ? 16 : 32;
    const std::uint32_t data_size = static_cast<std::uint32_t>(clip.samples.size() * (bits / 8));
    std::vector<unsigned char> out;
    out.reserve(44 + data_size);
    put_tag(out, "RIFF");
    put_le<std::uint32_t>(out, 36 + data_size);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_le<std::uint32_t>(out, 16);
    put_le<std::uint16_t>(out, pcm ? kFormatPcm : kFormatFloat);
    put_le<std::uint16_t>(out, 1);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate_hz));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate_hz) * (bits / 8));
    put_le<std::uint16_t>(out, bits / 8);
    put_le<std::uint16_t>(out, bits);
    put_tag(out, "data");
    put_le<std::uint32_t>(out, data_size);
    for (float s : clip.samples) {
        if (pcm) {
            double scaled = std::round(static_cast<double>(s) * 32768.0);
            put_le<std::int16_t>(out, static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0)));
        } else {
            put_le<float>(out, s);
        }
    }
    return out;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavEncoding encoding) {
    auto bytes = encode_wav(clip, encoding);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void require_sample_rate(const AudioClip& clip, int rate) {
    if (clip.sample_rate_hz != rate) {
        throw Error(ErrorCode::WrongSampleRate,
                    "expected " + std::to_string(rate) + " Hz, got " +
                        std::to_string(clip.sample_rate_hz) + " Hz" +
                        (clip.source_id ? " (" + *clip.source_id + ")" : ""));
    }
}

AudioClip fit_length(const AudioClip& clip, std::size_t target_samples) {
    AudioClip out;
    out.sample_rate_hz = clip.sample_rate_hz;
    out.source_id = clip.source_id;
    const std::size_t n = clip.samples.size();
    if (n == target_samples) {
        out.samples = clip.samples;
    } else if (n < target_samples) {
        std::size_t left = (target_samples - n) / 2;
        out.samples.assign(target_samples, 0.0f);
        std::copy(clip.samples.begin(), clip.samples.end(), out.samples.begin() + static_cast<std::ptrdiff_t>(left));
    } else {
        std::size_t start = (n - target_samples) / 2;
        auto first = clip.samples.begin() + static_cast<std::ptrdiff_t>(start);
        out.samples.assign(first, first + static_cast<std::ptrdiff_t>(target_samples));
    }
    return out;
}

AudioClip peak_normalize(const AudioClip& clip) {
    float peak = 0.0f;
    for (float s : clip.samples) peak = std::max(peak, std::abs(s));
    AudioClip out = clip;
    if (peak > 0.0f && peak != 1.0f) {
        for (float& s : out.samples) s = std::clamp(s / peak, -1.0f, 1.0f);
    }
    return out;
}

double rms(const AudioClip& clip) {
    if (clip.samples.empty()) return 0.0;
    double acc = 0.0;
    for (float s : clip.samples) acc += static_cast<double>(s) * s;
    return std::sqrt(acc / static_cast<double>(clip.samples.size()));
}

}  // namespace lsic

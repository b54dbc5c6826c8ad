// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "lsic/fft.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "lsic/error.hpp"

namespace lsic {

Fft::Fft(std::size_t n) : n_(n), twiddles_(n / 2), bitrev_(n) {
    if (!is_power_of_two(n)) throw Error(ErrorCode::ConfigInvalid, "FFT size must be a power of two");
    for (std::size_t k = 0; k < n / 2; ++k) {
        double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        twiddles_[k] = {std::cos(angle), std::sin(angle)};
    }
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = 0;
        for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
        bitrev_[i] = r;
    }
}

void Fft::transform(std::span<std::complex<double>> data) const {
    for (std::size_t i = 0; i < n_; ++i) {
        if (i < bitrev_[i]) std::swap(data[i], data[bitrev_[i]]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
        std::size_t half = len / 2;
        std::size_t step = n_ / len;
        for (std::size_t start = 0; start < n_; start += len) {
            for (std::size_t j = 0; j < half; ++j) {
                std::complex<double> t = twiddles_[j * step] * data[start + j + half];
                data[start + j + half] = data[start + j] - t;
                data[start + j] += t;
            }
        }
    }
}

}  // namespace lsic

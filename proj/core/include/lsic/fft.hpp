// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace lsic {

// In-place iterative radix-2 FFT. Holds the twiddle and bit-reversal tables
// for one power-of-two size; transform() is const and reentrant.
class Fft {
public:
    explicit Fft(std::size_t n);

    std::size_t size() const { return n_; }
    void transform(std::span<std::complex<double>> data) const;

private:
    std::size_t n_;
    std::vector<std::complex<double>> twiddles_;
    std::vector<std::size_t> bitrev_;
};

constexpr bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace lsic

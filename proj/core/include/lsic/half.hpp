// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>

namespace lsic {

// IEEE 754 binary16, round-to-nearest-even.
std::uint16_t float_to_half_bits(float v);
float half_bits_to_float(std::uint16_t bits);

}  // namespace lsic

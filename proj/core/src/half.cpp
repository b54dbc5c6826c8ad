// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "lsic/half.hpp"

#include <Eigen/Core>

namespace lsic {

std::uint16_t float_to_half_bits(float v) {
    return Eigen::numext::bit_cast<std::uint16_t>(Eigen::half(v));
}

float half_bits_to_float(std::uint16_t bits) {
    return static_cast<float>(Eigen::numext::bit_cast<Eigen::half>(bits));
}

}  // namespace lsic

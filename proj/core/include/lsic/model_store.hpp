// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "lsic/nn/model.hpp"

namespace lsic::store {

inline constexpr std::uint16_t kFormatVersion = 1;

// Layout (all integers little-endian):
//   "LSIC" | u16 version | u32 header_len | header (JSON text)
//   u32 tensor_count | per tensor, sorted by name:
//     u16 name_len | name | u8 dtype | u8 rank | u32 dims[rank]
//     f32 scale | i32 zero_point | u64 payload_len | payload
//   u32 CRC32 of every preceding byte
std::vector<std::uint8_t> serialize(const nn::ModelGraph& model);

/// Throws CorruptFile, UnsupportedVersion, UnknownLayerKind.
nn::ModelGraph deserialize(const std::vector<std::uint8_t>& bytes);

std::size_t save(const nn::ModelGraph& model, const std::filesystem::path& path);
nn::ModelGraph load(const std::filesystem::path& path);

// Per-tensor record overhead excluding the name and payload bytes.
constexpr std::size_t tensor_record_overhead(std::size_t rank) { return 2 + 1 + 1 + 4 * rank + 4 + 4 + 8; }

std::uint32_t crc32(const std::uint8_t* data, std::size_t size);

}  // namespace lsic::store

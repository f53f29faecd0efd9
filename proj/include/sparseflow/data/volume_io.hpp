// Copyright 2026 The sparseflow authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sparseflow/volume.hpp"

// SFV1 volume container, little-endian:
//   magic "SFV1" | u32 version | u32 channels | u32 D | u32 H | u32 W |
//   u8 dtype (1 = IEEE-754 binary32) | payload (channel-major, then depth,
//   row-major) | trailing u64 FNV-1a checksum over the payload bytes.

namespace sparseflow {

namespace detail {

inline void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline uint32_t get_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 | static_cast<uint32_t>(p[2]) << 16 |
           static_cast<uint32_t>(p[3]) << 24;
}
inline uint64_t get_u64(const unsigned char* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    return v;
}

}  // namespace detail

inline constexpr uint32_t kVolumeFormatVersion = 1;
inline constexpr uint8_t kVolumeDtypeF32 = 1;

/// Writes a single-channel volume. Returns the payload checksum, which the
/// dataset manifest records for later validation.
inline uint64_t write_volume(const std::filesystem::path& path, const VolumeField& field) {
    std::string buf;
    buf.reserve(25 + static_cast<size_t>(field.numel()) * 4 + 8);
    buf.append("SFV1");
    detail::put_u32(buf, kVolumeFormatVersion);
    detail::put_u32(buf, 1);  // channels
    detail::put_u32(buf, static_cast<uint32_t>(field.d));
    detail::put_u32(buf, static_cast<uint32_t>(field.h));
    detail::put_u32(buf, static_cast<uint32_t>(field.w));
    buf.push_back(static_cast<char>(kVolumeDtypeF32));

    const size_t payload_at = buf.size();
    for (float v : field.values) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        detail::put_u32(buf, bits);
    }
    const uint64_t checksum = fnv1a64(buf.data() + payload_at, buf.size() - payload_at);
    detail::put_u64(buf, checksum);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("write_volume: cannot open '" + path.string() + "' for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("write_volume: short write to '" + path.string() + "'");
    return checksum;
}

/// Reads a single-channel volume, validating magic, version, dtype, declared
/// shape against payload length, and the trailing checksum.
inline VolumeField read_volume(const std::filesystem::path& path, uint64_t* checksum_out = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("read_volume: cannot open '" + path.string() + "'");
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());

    if (buf.size() < 25 + 8 || std::memcmp(p, "SFV1", 4) != 0)
        throw DataError("read_volume: '" + path.string() + "' is not an SFV1 volume");
    const uint32_t version = detail::get_u32(p + 4);
    if (version != kVolumeFormatVersion)
        throw DataError("read_volume: '" + path.string() + "' has unsupported version " + std::to_string(version));
    const uint32_t channels = detail::get_u32(p + 8);
    const uint32_t d = detail::get_u32(p + 12), h = detail::get_u32(p + 16), w = detail::get_u32(p + 20);
    const uint8_t dtype = p[24];
    if (channels != 1) throw DataError("read_volume: expected a single channel, got " + std::to_string(channels));
    if (dtype != kVolumeDtypeF32)
        throw DataError("read_volume: '" + path.string() + "' has unsupported dtype tag " + std::to_string(dtype));
    if (d == 0 || h == 0 || w == 0) throw DataError("read_volume: zero extent in '" + path.string() + "'");

    const size_t expected = static_cast<size_t>(d) * h * w * 4;
    if (buf.size() != 25 + expected + 8)
        throw DataError("read_volume: '" + path.string() + "' payload does not match declared shape " +
                        std::to_string(d) + "x" + std::to_string(h) + "x" + std::to_string(w));
    const uint64_t stored = detail::get_u64(p + 25 + expected);
    const uint64_t actual = fnv1a64(p + 25, expected);
    if (stored != actual) throw DataError("read_volume: checksum mismatch in '" + path.string() + "'");

    VolumeField field(d, h, w);
    for (size_t i = 0; i < field.values.size(); ++i) {
        const uint32_t bits = detail::get_u32(p + 25 + i * 4);
        std::memcpy(&field.values[i], &bits, 4);
    }
    if (checksum_out) *checksum_out = actual;
    return field;
}

}  // namespace sparseflow

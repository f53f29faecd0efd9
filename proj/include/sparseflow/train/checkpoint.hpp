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

#include <filesystem>
#include <fstream>

#include "sparseflow/data/volume_io.hpp"

// SFCK checkpoint container, little-endian:
//   magic "SFCK" | u32 version | u64 config fingerprint |
//   u32 array count | per array: u32 name length, name bytes, u64 element
//   count, IEEE-754 binary32 data | trailing u64 FNV-1a checksum over
//   everything after the 16-byte header.

namespace sparseflow {

inline constexpr uint32_t kCheckpointFormatVersion = 1;

struct Checkpoint {
    uint64_t fingerprint = 0;
    std::vector<std::pair<std::string, std::vector<float>>> arrays;

    const std::vector<float>& array(const std::string& name) const {
        for (const auto& [n, a] : arrays)
            if (n == name) return a;
        throw DataError("checkpoint: missing array '" + name + "'");
    }
    bool has(const std::string& name) const {
        for (const auto& [n, a] : arrays)
            if (n == name) return true;
        return false;
    }
};

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    std::string buf;
    buf.append("SFCK");
    detail::put_u32(buf, kCheckpointFormatVersion);
    detail::put_u64(buf, ck.fingerprint);
    const size_t body_at = buf.size();
    detail::put_u32(buf, static_cast<uint32_t>(ck.arrays.size()));
    for (const auto& [name, data] : ck.arrays) {
        detail::put_u32(buf, static_cast<uint32_t>(name.size()));
        buf.append(name);
        detail::put_u64(buf, data.size());
        for (float v : data) {
            uint32_t bits;
            std::memcpy(&bits, &v, 4);
            detail::put_u32(buf, bits);
        }
    }
    detail::put_u64(buf, fnv1a64(buf.data() + body_at, buf.size() - body_at));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("save_checkpoint: cannot open '" + path.string() + "'");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("save_checkpoint: short write to '" + path.string() + "'");
}

/// Loads and fully validates a checkpoint. When expected_fingerprint is
/// nonzero it must match the stored one, so states never cross run
/// configurations.
inline Checkpoint load_checkpoint(const std::filesystem::path& path, uint64_t expected_fingerprint = 0) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_checkpoint: cannot open '" + path.string() + "'");
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
    if (buf.size() < 16 + 4 + 8 || std::memcmp(p, "SFCK", 4) != 0)
        throw DataError("load_checkpoint: '" + path.string() + "' is not an SFCK checkpoint");
    const uint32_t version = detail::get_u32(p + 4);
    if (version != kCheckpointFormatVersion)
        throw DataError("load_checkpoint: unsupported version " + std::to_string(version));

    Checkpoint ck;
    ck.fingerprint = detail::get_u64(p + 8);
    if (expected_fingerprint != 0 && ck.fingerprint != expected_fingerprint)
        throw DataError("load_checkpoint: '" + path.string() +
                        "' was written under a different configuration (fingerprint mismatch)");

    const size_t body_at = 16;
    const uint64_t stored = detail::get_u64(p + buf.size() - 8);
    if (stored != fnv1a64(p + body_at, buf.size() - body_at - 8))
        throw DataError("load_checkpoint: checksum mismatch in '" + path.string() + "'");

    size_t off = body_at;
    auto need = [&](size_t n) {
        if (off + n > buf.size() - 8) throw DataError("load_checkpoint: truncated '" + path.string() + "'");
    };
    need(4);
    const uint32_t count = detail::get_u32(p + off);
    off += 4;
    for (uint32_t i = 0; i < count; ++i) {
        need(4);
        const uint32_t name_len = detail::get_u32(p + off);
        off += 4;
        need(name_len + 8);
        std::string name(reinterpret_cast<const char*>(p + off), name_len);
        off += name_len;
        const uint64_t n = detail::get_u64(p + off);
        off += 8;
        need(n * 4);
        std::vector<float> data(n);
        for (uint64_t k = 0; k < n; ++k) {
            const uint32_t bits = detail::get_u32(p + off + k * 4);
            std::memcpy(&data[k], &bits, 4);
        }
        off += n * 4;
        ck.arrays.emplace_back(std::move(name), std::move(data));
    }
    if (off != buf.size() - 8) throw DataError("load_checkpoint: trailing garbage in '" + path.string() + "'");
    return ck;
}

}  // namespace sparseflow

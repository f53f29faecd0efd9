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

#include "sparseflow/volume.hpp"

namespace sparseflow {

/// Mid-plane 2-D slice of a volume, normal to `axis` (0 = d, 1 = h, 2 = w).
struct Slice2D {
    int64_t rows = 0, cols = 0;
    std::vector<float> values;  // row-major
};

inline Slice2D extract_slice(const VolumeField& f, int axis, int64_t index) {
    Slice2D s;
    if (axis == 0) {
        s.rows = f.h;
        s.cols = f.w;
        for (int64_t h = 0; h < f.h; ++h)
            for (int64_t w = 0; w < f.w; ++w) s.values.push_back(f.at(index, h, w));
    } else if (axis == 1) {
        s.rows = f.d;
        s.cols = f.w;
        for (int64_t d = 0; d < f.d; ++d)
            for (int64_t w = 0; w < f.w; ++w) s.values.push_back(f.at(d, index, w));
    } else {
        s.rows = f.d;
        s.cols = f.h;
        for (int64_t d = 0; d < f.d; ++d)
            for (int64_t h = 0; h < f.h; ++h) s.values.push_back(f.at(d, h, index));
    }
    return s;
}

/// Blue (low) through green to yellow (high), matching the usual flow-speed
/// color coding.
inline void speed_colormap(float t, unsigned char rgb[3]) {
    t = std::clamp(t, 0.0f, 1.0f);
    float r, g, b;
    if (t < 0.5f) {
        const float u = t * 2.0f;
        r = 0.0f;
        g = u;
        b = 1.0f - u;
    } else {
        const float u = (t - 0.5f) * 2.0f;
        r = u;
        g = 1.0f;
        b = 0.0f;
    }
    rgb[0] = static_cast<unsigned char>(r * 255.0f + 0.5f);
    rgb[1] = static_cast<unsigned char>(g * 255.0f + 0.5f);
    rgb[2] = static_cast<unsigned char>(b * 255.0f + 0.5f);
}

/// Binary P6 image of a slice, values mapped over [vmin, vmax].
inline void write_slice_ppm(const std::filesystem::path& path, const Slice2D& s, float vmin, float vmax) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("write_slice_ppm: cannot open '" + path.string() + "'");
    out << "P6\n" << s.cols << ' ' << s.rows << "\n255\n";
    const float span = vmax > vmin ? vmax - vmin : 1.0f;
    for (float v : s.values) {
        unsigned char rgb[3];
        speed_colormap((v - vmin) / span, rgb);
        out.write(reinterpret_cast<const char*>(rgb), 3);
    }
}

/// Raw slice values as CSV, one image row per line.
inline void write_slice_csv(const std::filesystem::path& path, const Slice2D& s) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("write_slice_csv: cannot open '" + path.string() + "'");
    for (int64_t r = 0; r < s.rows; ++r) {
        for (int64_t c = 0; c < s.cols; ++c) {
            if (c) out << ',';
            char buf[24];
            std::snprintf(buf, sizeof(buf), "%.6e", static_cast<double>(s.values[static_cast<size_t>(r * s.cols + c)]));
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace sparseflow

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

#include <cstdint>
#include <vector>

#include "sparseflow/common.hpp"

namespace sparseflow {

/// Dense scalar voxel grid, row-major in (d, h, w). One velocity component,
/// an RDF, or a mask — the universal currency of the pipeline.
struct VolumeField {
    int64_t d = 0, h = 0, w = 0;
    std::vector<float> values;

    VolumeField() = default;
    VolumeField(int64_t d_, int64_t h_, int64_t w_, float fill = 0.0f)
        : d(d_), h(h_), w(w_), values(static_cast<size_t>(d_ * h_ * w_), fill) {
        if (d_ <= 0 || h_ <= 0 || w_ <= 0) throw std::invalid_argument("VolumeField: extents must be positive");
    }

    int64_t numel() const { return d * h * w; }
    int64_t index(int64_t dd, int64_t hh, int64_t ww) const { return (dd * h + hh) * w + ww; }
    float& at(int64_t dd, int64_t hh, int64_t ww) { return values[static_cast<size_t>(index(dd, hh, ww))]; }
    float at(int64_t dd, int64_t hh, int64_t ww) const { return values[static_cast<size_t>(index(dd, hh, ww))]; }

    bool same_extents(const VolumeField& o) const { return d == o.d && h == o.h && w == o.w; }

    bool operator==(const VolumeField& o) const = default;
};

}  // namespace sparseflow

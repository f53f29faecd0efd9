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

#include <cmath>
#include <limits>

#include "sparseflow/volume.hpp"

namespace sparseflow {

namespace detail {
inline void check_same_extents(const VolumeField& a, const VolumeField& b, const char* op) {
    if (!a.same_extents(b))
        throw std::invalid_argument(std::string(op) + ": extents disagree (" + std::to_string(a.d) + "x" +
                                    std::to_string(a.h) + "x" + std::to_string(a.w) + " vs " + std::to_string(b.d) +
                                    "x" + std::to_string(b.h) + "x" + std::to_string(b.w) + ")");
}
}  // namespace detail

/// Accumulates voxelwise errors across any number of fields; the evaluation
/// domain is the full grid unless a mask restricts it.
struct MetricAccumulator {
    double sq_sum = 0.0, abs_sum = 0.0;
    int64_t count = 0;

    void add(const VolumeField& pred, const VolumeField& truth, const VolumeField* domain = nullptr) {
        detail::check_same_extents(pred, truth, "metrics");
        if (domain) detail::check_same_extents(pred, *domain, "metrics");
        for (int64_t i = 0; i < pred.numel(); ++i) {
            if (domain && domain->values[static_cast<size_t>(i)] == 0.0f) continue;
            const double e = static_cast<double>(pred.values[static_cast<size_t>(i)]) -
                             static_cast<double>(truth.values[static_cast<size_t>(i)]);
            sq_sum += e * e;
            abs_sum += std::abs(e);
            ++count;
        }
    }

    double mse() const { return count ? sq_sum / static_cast<double>(count) : 0.0; }
    double mae() const { return count ? abs_sum / static_cast<double>(count) : 0.0; }
    double rmse() const { return std::sqrt(mse()); }
};

inline double mse(const VolumeField& pred, const VolumeField& truth) {
    MetricAccumulator acc;
    acc.add(pred, truth);
    return acc.mse();
}

inline double mae(const VolumeField& pred, const VolumeField& truth) {
    MetricAccumulator acc;
    acc.add(pred, truth);
    return acc.mae();
}

inline double rmse(const VolumeField& pred, const VolumeField& truth) {
    MetricAccumulator acc;
    acc.add(pred, truth);
    return acc.rmse();
}

/// 10*log10(peak^2 / mse), in dB. A zero MSE is reported as the +infinity
/// sentinel rather than a number.
inline double psnr_from_mse(double mse_value, double peak = 1.0) {
    if (peak <= 0.0) throw std::invalid_argument("psnr: peak must be positive");
    if (mse_value <= 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse_value);
}

inline double psnr(const VolumeField& pred, const VolumeField& truth, double peak = 1.0) {
    return psnr_from_mse(mse(pred, truth), peak);
}

/// Per-voxel sqrt(vx^2 + vy^2 + vz^2).
inline VolumeField velocity_magnitude(const VolumeField& vx, const VolumeField& vy, const VolumeField& vz) {
    detail::check_same_extents(vx, vy, "velocity_magnitude");
    detail::check_same_extents(vx, vz, "velocity_magnitude");
    VolumeField out(vx.d, vx.h, vx.w);
    for (int64_t i = 0; i < out.numel(); ++i) {
        const double a = vx.values[static_cast<size_t>(i)], b = vy.values[static_cast<size_t>(i)],
                     c = vz.values[static_cast<size_t>(i)];
        out.values[static_cast<size_t>(i)] = static_cast<float>(std::sqrt(a * a + b * b + c * c));
    }
    return out;
}

}  // namespace sparseflow

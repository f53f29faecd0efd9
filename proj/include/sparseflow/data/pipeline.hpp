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

#include <string>
#include <vector>

#include "sparseflow/flow/solver.hpp"
#include "sparseflow/tensor/tensor.hpp"
#include "sparseflow/volume.hpp"

namespace sparseflow {

/// One model-ready training example. Velocity components and v_in are stored
/// normalized (peak training magnitude 1, v_in divided by 0.5 m/s).
struct Sample {
    VolumeField vx, vy, vz;
    VolumeField rdf;
    VolumeField ventricle_mask;
    VolumeField sparse_mask;
    double v_in = 0.0;
    std::string geometry_id;
    std::string run_id;
};

struct NormalizationRecord {
    double velocity_scale = 0.0;   // global max |v| over the training geometries
    double v_in_divisor = 0.5;     // the population's inlet maximum, m/s
};

/// Max velocity magnitude over a set of snapshots; the peak-1 normalization
/// constant of a training split.
inline double velocity_scale_of(const std::vector<const FlowSnapshot*>& snaps) {
    double peak = 0.0;
    for (const FlowSnapshot* s : snaps)
        for (size_t i = 0; i < s->vx.values.size(); ++i) {
            const double m2 = static_cast<double>(s->vx.values[i]) * s->vx.values[i] +
                              static_cast<double>(s->vy.values[i]) * s->vy.values[i] +
                              static_cast<double>(s->vz.values[i]) * s->vz.values[i];
            peak = std::max(peak, m2);
        }
    return std::sqrt(peak);
}

inline VolumeField scale_field(const VolumeField& f, double factor) {
    VolumeField out = f;
    for (auto& v : out.values) v = static_cast<float>(v * factor);
    return out;
}

/// Divides velocities by the recorded peak and v_in by the inlet maximum.
inline Sample normalize_snapshot(const FlowSnapshot& snap, const VolumeField& rdf, const VolumeField& sparse_mask,
                                 const NormalizationRecord& norm, std::string run_id) {
    if (norm.velocity_scale <= 0.0)
        throw std::invalid_argument("normalize_snapshot: velocity scale must be positive (all-zero training set?)");
    Sample s;
    const double inv = 1.0 / norm.velocity_scale;
    s.vx = scale_field(snap.vx, inv);
    s.vy = scale_field(snap.vy, inv);
    s.vz = scale_field(snap.vz, inv);
    s.rdf = rdf;
    s.ventricle_mask = snap.mask;
    s.sparse_mask = sparse_mask;
    s.v_in = snap.v_in / norm.v_in_divisor;
    s.geometry_id = snap.geometry_id;
    s.run_id = std::move(run_id);
    return s;
}

inline VolumeField denormalize_component(const VolumeField& f, const NormalizationRecord& norm) {
    return scale_field(f, norm.velocity_scale);
}

/// Uniform without-replacement draw of exactly floor(fraction * N_in) voxels
/// from the ventricle mask. Deterministic under seed; the same mask is shared
/// by all three velocity components of a sample.
inline VolumeField make_sparse_mask(const VolumeField& ventricle_mask, double fraction, uint64_t seed) {
    if (fraction <= 0.0 || fraction >= 1.0)
        throw std::invalid_argument("make_sparse_mask: fraction must lie in (0, 1)");
    std::vector<int64_t> inside;
    for (int64_t i = 0; i < ventricle_mask.numel(); ++i)
        if (ventricle_mask.values[static_cast<size_t>(i)] != 0.0f) inside.push_back(i);
    const int64_t keep = static_cast<int64_t>(static_cast<double>(inside.size()) * fraction);
    if (keep < 1)
        throw std::invalid_argument("make_sparse_mask: floor(" + std::to_string(fraction) + " * " +
                                    std::to_string(inside.size()) + ") voxels is degenerate");
    Rng rng(seed);
    // partial Fisher-Yates: the first `keep` slots end up uniform without replacement
    for (int64_t i = 0; i < keep; ++i) {
        const int64_t j = i + static_cast<int64_t>(rng.index(inside.size() - static_cast<size_t>(i)));
        std::swap(inside[static_cast<size_t>(i)], inside[static_cast<size_t>(j)]);
    }
    VolumeField mask(ventricle_mask.d, ventricle_mask.h, ventricle_mask.w);
    for (int64_t i = 0; i < keep; ++i) mask.values[static_cast<size_t>(inside[static_cast<size_t>(i)])] = 1.0f;
    return mask;
}

template <typename T>
Tensor<T> tensor_from_field(const VolumeField& f) {
    Tensor<T> t = Tensor<T>::zeros({1, f.d, f.h, f.w});
    for (int64_t i = 0; i < f.numel(); ++i) t.data()[i] = static_cast<T>(f.values[static_cast<size_t>(i)]);
    return t;
}

enum class Component { x, y, z };

inline const char* component_name(Component c) {
    switch (c) {
        case Component::x: return "x";
        case Component::y: return "y";
        default: return "z";
    }
}

inline Component component_from_name(const std::string& s) {
    if (s == "x") return Component::x;
    if (s == "y") return Component::y;
    if (s == "z") return Component::z;
    throw std::invalid_argument("unknown velocity component '" + s + "' (expected x, y or z)");
}

inline const VolumeField& component_field(const Sample& s, Component c) {
    switch (c) {
        case Component::x: return s.vx;
        case Component::y: return s.vy;
        default: return s.vz;
    }
}

/// Builds the network input for one directional component: channel 0 carries
/// the masked sparse velocities, channel 1 (when with_rdf) the dense RDF
/// prior. The target is the full-resolution component. Shapes [C,D,H,W] and
/// [1,D,H,W].
template <typename T>
std::pair<Tensor<T>, Tensor<T>> assemble_input(const Sample& s, Component d, bool with_rdf = true) {
    const VolumeField& full = component_field(s, d);
    if (!full.same_extents(s.sparse_mask))
        throw std::invalid_argument("assemble_input: sparse mask extents do not match the component field");
    if (with_rdf && (s.rdf.numel() == 0 || !s.rdf.same_extents(full)))
        throw std::invalid_argument("assemble_input: missing or mismatched RDF field");

    const int64_t channels = with_rdf ? 2 : 1;
    Tensor<T> input = Tensor<T>::zeros({channels, full.d, full.h, full.w});
    Tensor<T> target = Tensor<T>::zeros({1, full.d, full.h, full.w});
    const int64_t n = full.numel();
    for (int64_t i = 0; i < n; ++i) {
        const float keep = s.sparse_mask.values[static_cast<size_t>(i)];
        input.data()[i] = keep != 0.0f ? static_cast<T>(full.values[static_cast<size_t>(i)]) : T(0);
        target.data()[i] = static_cast<T>(full.values[static_cast<size_t>(i)]);
    }
    if (with_rdf)
        for (int64_t i = 0; i < n; ++i) input.data()[n + i] = static_cast<T>(s.rdf.values[static_cast<size_t>(i)]);
    return {std::move(input), std::move(target)};
}

/// Geometry-level cross-validation split. Each fold holds out one test and
/// one validation geometry; assignment is by geometry id so no geometry ever
/// leaks across partitions.
struct FoldSplit {
    int64_t fold = 0;
    std::vector<std::string> train, val, test;
};

inline std::vector<FoldSplit> kfold(std::vector<std::string> geometry_ids, int64_t k, uint64_t seed) {
    if (geometry_ids.size() < 3)
        throw std::invalid_argument("kfold: need at least 3 geometries, got " + std::to_string(geometry_ids.size()));
    if (k < 1 || k > static_cast<int64_t>(geometry_ids.size()))
        throw std::invalid_argument("kfold: fold count " + std::to_string(k) + " exceeds " +
                                    std::to_string(geometry_ids.size()) + " geometries");
    Rng rng(substream(seed, "kfold"));
    rng.shuffle(geometry_ids);
    const int64_t n = static_cast<int64_t>(geometry_ids.size());
    std::vector<FoldSplit> folds;
    for (int64_t f = 0; f < k; ++f) {
        FoldSplit split;
        split.fold = f;
        split.test.push_back(geometry_ids[static_cast<size_t>(f)]);
        split.val.push_back(geometry_ids[static_cast<size_t>((f + 1) % n)]);
        for (int64_t g = 0; g < n; ++g)
            if (g != f && g != (f + 1) % n) split.train.push_back(geometry_ids[static_cast<size_t>(g)]);
        folds.push_back(std::move(split));
    }
    return folds;
}

/// Trilinear resampling onto new extents (exact on affine fields). Samples
/// are taken at voxel centers of the target grid mapped into the source grid.
inline VolumeField resample_trilinear(const VolumeField& src, int64_t nd, int64_t nh, int64_t nw) {
    VolumeField out(nd, nh, nw);
    auto sample_axis = [](int64_t i, int64_t n_out, int64_t n_in) {
        const double x = (static_cast<double>(i) + 0.5) * static_cast<double>(n_in) / static_cast<double>(n_out) - 0.5;
        return std::clamp(x, 0.0, static_cast<double>(n_in - 1));
    };
    for (int64_t d = 0; d < nd; ++d)
        for (int64_t h = 0; h < nh; ++h)
            for (int64_t w = 0; w < nw; ++w) {
                const double fd = sample_axis(d, nd, src.d), fh = sample_axis(h, nh, src.h),
                             fw = sample_axis(w, nw, src.w);
                const int64_t d0 = static_cast<int64_t>(fd), h0 = static_cast<int64_t>(fh),
                              w0 = static_cast<int64_t>(fw);
                const int64_t d1 = std::min(d0 + 1, src.d - 1), h1 = std::min(h0 + 1, src.h - 1),
                              w1 = std::min(w0 + 1, src.w - 1);
                const double td = fd - d0, th = fh - h0, tw = fw - w0;
                double acc = 0.0;
                for (int bd = 0; bd < 2; ++bd)
                    for (int bh = 0; bh < 2; ++bh)
                        for (int bw = 0; bw < 2; ++bw) {
                            const double wgt = (bd ? td : 1.0 - td) * (bh ? th : 1.0 - th) * (bw ? tw : 1.0 - tw);
                            acc += wgt * src.at(bd ? d1 : d0, bh ? h1 : h0, bw ? w1 : w0);
                        }
                out.at(d, h, w) = static_cast<float>(acc);
            }
    return out;
}

}  // namespace sparseflow

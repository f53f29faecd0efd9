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

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "sparseflow/volume.hpp"

namespace sparseflow {

/// Uniform cubic-voxel grid: extents in voxels plus the physical spacing (m).
struct GridSpec {
    int64_t d = 128, h = 128, w = 128;
    double spacing = 0.14 / 128.0;

    static GridSpec cubic(int64_t n, double domain_m = 0.14) { return {n, n, n, domain_m / static_cast<double>(n)}; }
};

using Vec3 = std::array<double, 3>;  // physical (d, h, w) coordinates in meters

struct Disk {
    Vec3 center{};  // on the ellipsoid surface
    double radius = 0.0;
    Vec3 normal{};  // unit, pointing into the fluid for the inlet
};

/// Idealized left ventricle: an axis-aligned ellipsoid determined by the
/// short diameter and the long-axis length, with a mitral inflow disk at the
/// basal pole and an apical cannula disk at the opposite pole.
struct VentricleGeometry {
    std::string id;
    double diameter_mm = 0.0;
    double long_axis_mm = 0.0;
    Vec3 center{};  // ellipsoid center in physical coordinates
    Disk inlet;
    Disk outlet;
};

inline constexpr double kDiameterMinMm = 51.0, kDiameterMaxMm = 87.0;
inline constexpr double kLongAxisMinMm = 74.0, kLongAxisMaxMm = 126.0;

/// Ellipsoid at an explicit center, long axis along d. The basal (mitral)
/// pole sits at +d, the apical cannula at -d; both disks lie on the surface
/// and point inward/outward along the long axis.
inline VentricleGeometry make_ventricle_geometry_at(std::string id, double diameter_mm, double long_axis_mm,
                                                    Vec3 center) {
    if (diameter_mm <= 0.0 || long_axis_mm <= 0.0)
        throw std::invalid_argument("geometry '" + id + "': diameter and long axis must be positive");
    VentricleGeometry g;
    g.id = std::move(id);
    g.diameter_mm = diameter_mm;
    g.long_axis_mm = long_axis_mm;
    g.center = center;
    const double half_long = long_axis_mm * 1e-3 / 2.0;
    g.inlet.center = {g.center[0] + half_long, g.center[1], g.center[2]};
    g.inlet.normal = {-1.0, 0.0, 0.0};
    g.inlet.radius = 0.20 * diameter_mm * 1e-3;
    g.outlet.center = {g.center[0] - half_long, g.center[1], g.center[2]};
    g.outlet.normal = {-1.0, 0.0, 0.0};  // outflow continues toward -d through the apex
    g.outlet.radius = 0.18 * diameter_mm * 1e-3;
    return g;
}

/// Same, placed at the grid center plus an optional positional offset.
inline VentricleGeometry make_ventricle_geometry(std::string id, double diameter_mm, double long_axis_mm,
                                                 const GridSpec& grid, Vec3 center_offset = {0.0, 0.0, 0.0}) {
    const Vec3 center = {grid.d * grid.spacing / 2.0 + center_offset[0],
                         grid.h * grid.spacing / 2.0 + center_offset[1],
                         grid.w * grid.spacing / 2.0 + center_offset[2]};
    return make_ventricle_geometry_at(std::move(id), diameter_mm, long_axis_mm, center);
}

/// Voxelized geometry: the binary inside mask plus tagged inlet/outlet voxel
/// sets, ready for the flow solver.
struct VoxelGeometry {
    std::string id;
    GridSpec grid;
    VolumeField mask;
    std::vector<int64_t> inlet_cells, outlet_cells;
    Vec3 inlet_normal{}, outlet_normal{};
};

/// Rasterizes the ellipsoid onto the grid (voxel centers inside the surface)
/// and tags the fluid voxels within each boundary disk's radius.
inline VoxelGeometry voxelize(const VentricleGeometry& geom, const GridSpec& grid) {
    if (geom.diameter_mm <= 0.0 || geom.long_axis_mm <= 0.0)
        throw std::invalid_argument("voxelize: degenerate geometry '" + geom.id + "'");
    const double a = geom.long_axis_mm * 1e-3 / 2.0;  // semi-axis along d
    const double b = geom.diameter_mm * 1e-3 / 2.0;   // along h and w
    const double hs = grid.spacing;
    if (geom.center[0] - a < 0 || geom.center[0] + a > grid.d * hs || geom.center[1] - b < 0 ||
        geom.center[1] + b > grid.h * hs || geom.center[2] - b < 0 || geom.center[2] + b > grid.w * hs)
        throw std::invalid_argument("voxelize: geometry '" + geom.id + "' exceeds grid bounds");
    if (geom.inlet.radius < 2.0 * hs || geom.outlet.radius < 2.0 * hs)
        throw std::invalid_argument("voxelize: grid spacing does not resolve the inlet/outlet disks of '" + geom.id +
                                    "' (need >= 2 voxels across each radius)");

    VoxelGeometry vg;
    vg.id = geom.id;
    vg.grid = grid;
    vg.mask = VolumeField(grid.d, grid.h, grid.w);
    vg.inlet_normal = geom.inlet.normal;
    vg.outlet_normal = geom.outlet.normal;

    auto dist2 = [](const Vec3& p, const Vec3& q) {
        const double dd = p[0] - q[0], dh = p[1] - q[1], dw = p[2] - q[2];
        return dd * dd + dh * dh + dw * dw;
    };
    const double r_in2 = geom.inlet.radius * geom.inlet.radius;
    const double r_out2 = geom.outlet.radius * geom.outlet.radius;
    if (dist2(geom.inlet.center, geom.outlet.center) <=
        (geom.inlet.radius + geom.outlet.radius) * (geom.inlet.radius + geom.outlet.radius))
        throw std::invalid_argument("voxelize: inlet and outlet disks of '" + geom.id + "' overlap");

    for (int64_t dd = 0; dd < grid.d; ++dd)
        for (int64_t hh = 0; hh < grid.h; ++hh)
            for (int64_t ww = 0; ww < grid.w; ++ww) {
                const Vec3 p = {(dd + 0.5) * hs, (hh + 0.5) * hs, (ww + 0.5) * hs};
                const double fd = (p[0] - geom.center[0]) / a;
                const double fh = (p[1] - geom.center[1]) / b;
                const double fw = (p[2] - geom.center[2]) / b;
                if (fd * fd + fh * fh + fw * fw <= 1.0) {
                    const int64_t idx = vg.mask.index(dd, hh, ww);
                    vg.mask.values[static_cast<size_t>(idx)] = 1.0f;
                    if (dist2(p, geom.inlet.center) <= r_in2) vg.inlet_cells.push_back(idx);
                    if (dist2(p, geom.outlet.center) <= r_out2) vg.outlet_cells.push_back(idx);
                }
            }
    if (vg.inlet_cells.empty() || vg.outlet_cells.empty())
        throw std::invalid_argument("voxelize: geometry '" + geom.id + "' produced no inlet or outlet voxels");
    return vg;
}

/// Radial distance field: Euclidean distance from every voxel center to the
/// centroid of the mask voxels, dense over the whole grid. When normalized
/// (the default) it is scaled to [0,1] by the in-grid maximum.
inline VolumeField compute_rdf(const VolumeField& mask, double spacing, bool normalized = true) {
    double cd = 0.0, ch = 0.0, cw = 0.0;
    int64_t count = 0;
    for (int64_t dd = 0; dd < mask.d; ++dd)
        for (int64_t hh = 0; hh < mask.h; ++hh)
            for (int64_t ww = 0; ww < mask.w; ++ww)
                if (mask.at(dd, hh, ww) != 0.0f) {
                    cd += static_cast<double>(dd);
                    ch += static_cast<double>(hh);
                    cw += static_cast<double>(ww);
                    ++count;
                }
    if (count == 0) throw std::invalid_argument("compute_rdf: empty mask");
    cd /= count;
    ch /= count;
    cw /= count;

    VolumeField rdf(mask.d, mask.h, mask.w);
    float max_v = 0.0f;
    for (int64_t dd = 0; dd < mask.d; ++dd)
        for (int64_t hh = 0; hh < mask.h; ++hh)
            for (int64_t ww = 0; ww < mask.w; ++ww) {
                const double rd = (dd - cd) * spacing, rh = (hh - ch) * spacing, rw = (ww - cw) * spacing;
                const float v = static_cast<float>(std::sqrt(rd * rd + rh * rh + rw * rw));
                rdf.at(dd, hh, ww) = v;
                max_v = std::max(max_v, v);
            }
    if (normalized && max_v > 0.0f)
        for (auto& v : rdf.values) v /= max_v;
    return rdf;
}

}  // namespace sparseflow

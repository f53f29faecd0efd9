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

#include <catch2/catch_amalgamated.hpp>
#include <set>

#include "sparseflow/flow/population.hpp"
#include "test_helpers.hpp"

using namespace sparseflow;

namespace {

// Independent central-difference divergence, recomputed from the emitted
// float fields. Returns the max magnitude over untagged in-mask voxels whose
// six neighbors are in-mask.
double oracle_max_divergence(const FlowSnapshot& s, const VoxelGeometry& vg, double spacing) {
    std::set<int64_t> tagged(vg.inlet_cells.begin(), vg.inlet_cells.end());
    tagged.insert(vg.outlet_cells.begin(), vg.outlet_cells.end());
    const auto& m = s.mask;
    double worst = 0.0;
    for (int64_t d = 1; d + 1 < m.d; ++d)
        for (int64_t h = 1; h + 1 < m.h; ++h)
            for (int64_t w = 1; w + 1 < m.w; ++w) {
                if (m.at(d, h, w) == 0.0f || tagged.count(m.index(d, h, w))) continue;
                if (m.at(d - 1, h, w) == 0.0f || m.at(d + 1, h, w) == 0.0f || m.at(d, h - 1, w) == 0.0f ||
                    m.at(d, h + 1, w) == 0.0f || m.at(d, h, w - 1) == 0.0f || m.at(d, h, w + 1) == 0.0f)
                    continue;
                const double div = (static_cast<double>(s.vz.at(d + 1, h, w)) - s.vz.at(d - 1, h, w) +
                                    static_cast<double>(s.vy.at(d, h + 1, w)) - s.vy.at(d, h - 1, w) +
                                    static_cast<double>(s.vx.at(d, h, w + 1)) - s.vx.at(d, h, w - 1)) /
                                   (2.0 * spacing);
                worst = std::max(worst, std::abs(div));
            }
    return worst;
}

// Straight tube along d with prescribed-velocity slabs at the top and a
// zero-pressure outlet at the bottom.
VoxelGeometry make_tube(int64_t n, double spacing, double radius_vox) {
    VoxelGeometry vg;
    vg.id = "tube";
    vg.grid = GridSpec{n, n, n, spacing};
    vg.mask = VolumeField(n, n, n);
    vg.inlet_normal = {-1.0, 0.0, 0.0};
    vg.outlet_normal = {-1.0, 0.0, 0.0};
    const double c = (n - 1) / 2.0;
    for (int64_t d = 2; d <= n - 3; ++d)
        for (int64_t h = 0; h < n; ++h)
            for (int64_t w = 0; w < n; ++w) {
                const double r2 = (h - c) * (h - c) + (w - c) * (w - c);
                if (r2 > radius_vox * radius_vox) continue;
                const int64_t idx = vg.mask.index(d, h, w);
                vg.mask.values[static_cast<size_t>(idx)] = 1.0f;
                if (d >= n - 4) vg.inlet_cells.push_back(idx);
                if (d <= 3) vg.outlet_cells.push_back(idx);
            }
    return vg;
}

double slab_flux_vz(const FlowSnapshot& s, int64_t d, double spacing) {
    double acc = 0.0;
    for (int64_t h = 0; h < s.mask.h; ++h)
        for (int64_t w = 0; w < s.mask.w; ++w)
            if (s.mask.at(d, h, w) != 0.0f) acc += std::abs(static_cast<double>(s.vz.at(d, h, w)));
    return acc * spacing * spacing;
}

SolverConfig desk_solver(int64_t n, int64_t steps) {
    SolverConfig cfg;
    cfg.grid = GridSpec::cubic(n);
    cfg.steps = steps;
    cfg.dt = 1e-3;
    cfg.inner_iterations = 4000;
    cfg.convergence_tol = 1e-6;
    return cfg;
}

}  // namespace

TEST_CASE("voxelize rasterizes the ellipsoid volume accurately", "[flowgen][voxelize]") {
    // 64-voxel sphere on a 128^3 grid at 1 mm spacing
    GridSpec grid = GridSpec::cubic(128, 0.128);
    auto geom = make_ventricle_geometry("sphere", 64.0, 64.0, grid);
    auto vg = voxelize(geom, grid);
    int64_t count = 0;
    for (float v : vg.mask.values) count += v != 0.0f;
    const double analytic = 4.0 / 3.0 * 3.14159265358979 * 32.0 * 32.0 * 32.0;
    CHECK(std::abs(count - analytic) / analytic < 0.02);
    CHECK_FALSE(vg.inlet_cells.empty());
    CHECK_FALSE(vg.outlet_cells.empty());
}

TEST_CASE("voxelize rejects degenerate or oversized geometry", "[flowgen][voxelize][errors]") {
    GridSpec grid = GridSpec::cubic(32);
    CHECK_THROWS_AS(make_ventricle_geometry("zero", 0.0, 64.0, grid), std::invalid_argument);
    auto big = make_ventricle_geometry("big", 86.0, 200.0, grid);  // long axis exceeds the 0.14 m domain
    CHECK_THROWS_AS(voxelize(big, grid), std::invalid_argument);
}

TEST_CASE("voxelized mask is symmetric under its axial symmetry", "[flowgen][voxelize]") {
    GridSpec grid = GridSpec::cubic(64, 0.128);
    auto geom = make_ventricle_geometry("sym", 60.0, 100.0, grid);
    auto vg = voxelize(geom, grid);
    for (int64_t d = 0; d < 64; ++d)
        for (int64_t h = 0; h < 64; ++h)
            for (int64_t w = 0; w < 64; ++w) {
                const float v = vg.mask.at(d, h, w);
                REQUIRE(vg.mask.at(d, 63 - h, w) == v);  // mirror across the h midplane
                REQUIRE(vg.mask.at(d, h, 63 - w) == v);  // mirror across the w midplane
                REQUIRE(vg.mask.at(d, w, h) == v);       // h/w exchange (equal semi-axes)
            }
}

TEST_CASE("compute_rdf measures distance to the mask centroid", "[flowgen][rdf]") {
    VolumeField mask(9, 9, 9);
    mask.at(4, 4, 4) = 1.0f;  // centroid lands exactly on this voxel center
    auto raw = compute_rdf(mask, 1.0, false);
    CHECK(raw.at(4, 4, 4) == 0.0f);
    CHECK(raw.at(7, 8, 4) == Catch::Approx(5.0));  // 3-4-5 triangle at unit spacing

    auto scaled = compute_rdf(mask, 1.0, true);
    float maxv = 0.0f;
    for (float v : scaled.values) maxv = std::max(maxv, v);
    CHECK(maxv == 1.0f);

    VolumeField empty(4, 4, 4);
    CHECK_THROWS_AS(compute_rdf(empty, 1.0), std::invalid_argument);
}

TEST_CASE("zero inflow yields an all-zero steady field", "[flowgen][solver]") {
    SolverConfig cfg = desk_solver(24, 20);
    auto geom = make_ventricle_geometry("quiet", 70.0, 110.0, cfg.grid);
    auto snaps = simulate(geom, cfg, 0.0);
    REQUIRE(snaps.size() == 1);
    for (float v : snaps[0].vx.values) REQUIRE(v == 0.0f);
    for (float v : snaps[0].vy.values) REQUIRE(v == 0.0f);
    for (float v : snaps[0].vz.values) REQUIRE(v == 0.0f);
    CHECK(snaps[0].converged);
}

TEST_CASE("straight-tube inlet and outlet fluxes balance within 1%", "[flowgen][solver][flux]") {
    const int64_t n = 24;
    const double spacing = 0.004;
    auto tube = make_tube(n, spacing, 7.5);
    SolverConfig cfg = desk_solver(n, 500);
    cfg.grid = tube.grid;
    cfg.dt = 2e-3;
    ProjectionStepper stepper(tube, cfg);
    const double v_in = 0.3;
    for (int64_t t = 0; t < cfg.steps; ++t) stepper.step(v_in);
    auto snap = stepper.snapshot(v_in);
    REQUIRE(snap.converged);

    const double inlet_flux = slab_flux_vz(snap, n - 4, spacing);  // prescribed slab
    const double outlet_flux = slab_flux_vz(snap, 3, spacing);     // outlet slab facing the interior
    CAPTURE(inlet_flux, outlet_flux);
    CHECK(std::abs(outlet_flux - inlet_flux) / inlet_flux < 0.01);
}

TEST_CASE("post-projection divergence meets the stated bound", "[flowgen][solver][divergence]") {
    SolverConfig cfg = desk_solver(32, 150);
    auto geom = make_ventricle_geometry("div", 72.0, 112.0, cfg.grid);
    auto vg = voxelize(geom, cfg.grid);
    ProjectionStepper stepper(vg, cfg);
    const double v_in = 0.4;
    for (int64_t t = 0; t < cfg.steps; ++t) {
        auto stats = stepper.step(v_in);
        REQUIRE(stats.converged);
    }
    auto snap = stepper.snapshot(v_in);
    const double bound = 1e-3 * v_in / cfg.grid.spacing;
    const double div = oracle_max_divergence(snap, vg, cfg.grid.spacing);
    CAPTURE(div, bound);
    CHECK(div < bound);
}

TEST_CASE("kinetic energy decays monotonically with zero inflow", "[flowgen][solver][energy]") {
    SolverConfig cfg = desk_solver(24, 1);
    auto geom = make_ventricle_geometry("decay", 70.0, 108.0, cfg.grid);
    auto vg = voxelize(geom, cfg.grid);
    ProjectionStepper stepper(vg, cfg);

    // seed a smooth in-mask velocity field below the CFL limit
    const int64_t n = cfg.grid.d;
    std::array<std::vector<double>, 3> seed;
    for (auto& f : seed) f.assign(static_cast<size_t>(n * n * n), 0.0);
    for (int64_t d = 0; d < n; ++d)
        for (int64_t h = 0; h < n; ++h)
            for (int64_t w = 0; w < n; ++w) {
                const size_t i = static_cast<size_t>((d * n + h) * n + w);
                const double sd = std::sin(2.0 * 3.14159265 * d / n), sh = std::sin(2.0 * 3.14159265 * h / n),
                             sw = std::sin(2.0 * 3.14159265 * w / n);
                seed[0][i] = 0.2 * sh * sw;
                seed[1][i] = 0.2 * sd * sw;
                seed[2][i] = 0.15 * sd * sh;
            }
    stepper.set_velocity(0, seed[0]);
    stepper.set_velocity(1, seed[1]);
    stepper.set_velocity(2, seed[2]);

    double prev = stepper.kinetic_energy();
    for (int step = 0; step < 40; ++step) {
        stepper.step(0.0);
        const double ke = stepper.kinetic_energy();
        CAPTURE(step, prev, ke);
        REQUIRE(ke <= prev * (1.0 + 1e-12));
        prev = ke;
    }
}

TEST_CASE("Stokes regime: doubling the inlet velocity doubles the field", "[flowgen][solver][linearity]") {
    SolverConfig cfg = desk_solver(24, 60);
    cfg.advection = false;
    auto geom = make_ventricle_geometry("stokes", 70.0, 108.0, cfg.grid);
    auto s1 = simulate(geom, cfg, 0.1).back();
    auto s2 = simulate(geom, cfg, 0.2).back();
    double max_rel = 0.0, max_abs = 0.0;
    auto compare = [&](const VolumeField& a, const VolumeField& b) {
        for (size_t i = 0; i < a.values.size(); ++i) {
            const double lhs = 2.0 * static_cast<double>(a.values[i]);
            const double rhs = static_cast<double>(b.values[i]);
            max_abs = std::max(max_abs, std::abs(rhs));
            if (std::abs(rhs) > 1e-9) max_rel = std::max(max_rel, std::abs(lhs - rhs) / std::abs(rhs));
        }
    };
    compare(s1.vz, s2.vz);
    compare(s1.vy, s2.vy);
    compare(s1.vx, s2.vx);
    CAPTURE(max_rel, max_abs);
    CHECK(max_rel < 1e-6);
}

TEST_CASE("exhausting the pressure iteration cap flags the snapshot", "[flowgen][solver][errors]") {
    SolverConfig cfg = desk_solver(24, 5);
    cfg.inner_iterations = 2;  // far too few to converge
    auto geom = make_ventricle_geometry("starved", 70.0, 108.0, cfg.grid);
    auto snap = simulate(geom, cfg, 0.3).back();
    CHECK_FALSE(snap.converged);
}

TEST_CASE("plan_population is deterministic and spans the stated defaults", "[flowgen][population]") {
    PopulationConfig cfg;
    cfg.solver.grid = GridSpec::cubic(32);
    auto plan = plan_population(1234, cfg);
    CHECK(plan.runs.size() == 47);
    std::set<std::string> ids;
    for (const auto& r : plan.runs) ids.insert(r.geometry_id);
    CHECK(ids.size() == 8);
    for (const auto& g : plan.geometries) {
        CHECK(g.diameter_mm >= kDiameterMinMm);
        CHECK(g.diameter_mm <= kDiameterMaxMm);
        CHECK(g.long_axis_mm >= kLongAxisMinMm);
        CHECK(g.long_axis_mm <= kLongAxisMaxMm);
    }
    for (const auto& r : plan.runs) {
        CHECK(r.v_in >= cfg.inlet_min);
        CHECK(r.v_in <= cfg.inlet_max);
    }

    auto plan2 = plan_population(1234, cfg);
    REQUIRE(plan2.runs.size() == plan.runs.size());
    for (size_t i = 0; i < plan.runs.size(); ++i) {
        CHECK(plan.runs[i].geometry_id == plan2.runs[i].geometry_id);
        CHECK(plan.runs[i].v_in == plan2.runs[i].v_in);
    }
    for (size_t i = 0; i < plan.geometries.size(); ++i) {
        CHECK(plan.geometries[i].diameter_mm == plan2.geometries[i].diameter_mm);
        CHECK(plan.geometries[i].long_axis_mm == plan2.geometries[i].long_axis_mm);
    }

    PopulationConfig tiny;
    tiny.n_geometries = 1;
    tiny.total_runs = 1;
    tiny.solver.grid = GridSpec::cubic(32);
    auto single = plan_population(7, tiny);
    CHECK(single.runs.size() == 1);
    CHECK(single.runs[0].v_in == Catch::Approx(0.3));
}

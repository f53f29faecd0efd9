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
#include <functional>

#include "sparseflow/flow/solver.hpp"

namespace sparseflow {

struct PopulationConfig {
    int64_t n_geometries = 8;
    int64_t total_runs = 47;
    double inlet_min = 0.1, inlet_max = 0.5;  // m/s
    SolverConfig solver;
};

struct PlannedRun {
    int64_t run_index = 0;
    int64_t geometry_index = 0;
    std::string geometry_id;
    double v_in = 0.0;
};

struct PopulationPlan {
    std::vector<VentricleGeometry> geometries;
    std::vector<PlannedRun> runs;
};

/// Samples geometry parameters uniformly from the population ranges and
/// distributes the runs near-uniformly across geometries, each geometry
/// sweeping its inlet velocities evenly over [inlet_min, inlet_max].
/// Deterministic under seed.
inline PopulationPlan plan_population(uint64_t seed, const PopulationConfig& cfg) {
    if (cfg.n_geometries < 1 || cfg.total_runs < 1)
        throw std::invalid_argument("plan_population: need at least one geometry and one run");
    if (cfg.total_runs < cfg.n_geometries)
        throw std::invalid_argument("plan_population: fewer runs than geometries");

    PopulationPlan plan;
    Rng rng(substream(seed, "population.geometry"));
    const GridSpec& grid = cfg.solver.grid;
    for (int64_t g = 0; g < cfg.n_geometries; ++g) {
        const double diameter = rng.uniform(kDiameterMinMm, kDiameterMaxMm);
        const double long_axis = rng.uniform(kLongAxisMinMm, kLongAxisMaxMm);
        // anatomical position varies too: jitter the center within half the
        // margin the ellipsoid leaves inside the domain
        const double free_d = grid.d * grid.spacing - long_axis * 1e-3;
        const double free_hw = std::min(grid.h, grid.w) * grid.spacing - diameter * 1e-3;
        Vec3 offset = {rng.uniform(-0.25, 0.25) * free_d, rng.uniform(-0.25, 0.25) * free_hw,
                       rng.uniform(-0.25, 0.25) * free_hw};
        char id[16];
        std::snprintf(id, sizeof(id), "g%03d", static_cast<int>(g));
        plan.geometries.push_back(make_ventricle_geometry(id, diameter, long_axis, grid, offset));
    }

    const int64_t base = cfg.total_runs / cfg.n_geometries;
    const int64_t extra = cfg.total_runs % cfg.n_geometries;
    int64_t run_index = 0;
    for (int64_t g = 0; g < cfg.n_geometries; ++g) {
        const int64_t count = base + (g < extra ? 1 : 0);
        for (int64_t k = 0; k < count; ++k) {
            PlannedRun r;
            r.run_index = run_index++;
            r.geometry_index = g;
            r.geometry_id = plan.geometries[static_cast<size_t>(g)].id;
            r.v_in = count == 1 ? 0.5 * (cfg.inlet_min + cfg.inlet_max)
                                : cfg.inlet_min + (cfg.inlet_max - cfg.inlet_min) * static_cast<double>(k) /
                                                      static_cast<double>(count - 1);
            plan.runs.push_back(r);
        }
    }
    return plan;
}

/// Simulates every planned run sequentially and hands each final snapshot to
/// the sink. Returns the number of converged runs.
inline int64_t run_population(const PopulationPlan& plan, const SolverConfig& solver,
                              const std::function<void(const PlannedRun&, const FlowSnapshot&)>& sink) {
    int64_t converged = 0;
    for (const PlannedRun& r : plan.runs) {
        auto snaps = simulate(plan.geometries[static_cast<size_t>(r.geometry_index)], solver, r.v_in);
        const FlowSnapshot& last = snaps.back();
        if (last.converged) ++converged;
        sink(r, last);
    }
    return converged;
}

}  // namespace sparseflow

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

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sparseflow/flow/geometry.hpp"

namespace sparseflow {

struct SolverConfig {
    double density = 1060.0;    // kg/m^3
    double viscosity = 0.0035;  // Pa*s
    double dt = 1e-3;           // s
    int64_t steps = 3000;
    int64_t inner_iterations = 5000;  // pressure-solve sweep cap
    double convergence_tol = 1e-6;    // relative divergence residual
    GridSpec grid = GridSpec::cubic(128);
    bool advection = true;  // disabled for Stokes-regime linearity tests
    double sor_omega = 1.7;

    void validate() const {
        if (density <= 0 || viscosity <= 0 || dt <= 0 || convergence_tol <= 0)
            throw std::invalid_argument("SolverConfig: density, viscosity, dt and convergence_tol must be positive");
        if (steps < 1 || inner_iterations < 1)
            throw std::invalid_argument("SolverConfig: steps and inner_iterations must be >= 1");
    }
};

/// One emitted velocity state. Component axes: vx runs along w (fastest
/// index), vy along h, vz along d (the long axis, i.e. the main flow
/// direction from mitral inlet to apical cannula).
struct FlowSnapshot {
    VolumeField vx, vy, vz;
    VolumeField mask;
    double v_in = 0.0;
    std::string geometry_id;
    int64_t time_index = 0;
    bool converged = true;
};

struct StepStats {
    int64_t poisson_sweeps = 0;
    bool converged = true;
    double max_divergence = 0.0;  // post-projection, over constrained cells
};

/// Chorin projection on a collocated voxel grid: upwind advection, explicit
/// central diffusion, then a pressure solve that zeroes the central-difference
/// divergence at every untagged fluid voxel. Walls are no-slip, the inlet
/// carries a uniform prescribed velocity, the outlet is a zero-pressure
/// boundary whose velocity is corrected like any fluid cell.
class ProjectionStepper {
public:
    enum Cell : uint8_t { kOutside = 0, kFluid = 1, kInlet = 2, kOutlet = 3 };

    ProjectionStepper(const VoxelGeometry& geom, const SolverConfig& cfg) : geom_(geom), cfg_(cfg) {
        cfg_.validate();
        nd_ = geom.mask.d;
        nh_ = geom.mask.h;
        nw_ = geom.mask.w;
        ncells_ = nd_ * nh_ * nw_;
        stride_ = {nh_ * nw_, nw_, 1};
        extent_ = {nd_, nh_, nw_};
        type_.assign(static_cast<size_t>(ncells_), kOutside);
        for (int64_t i = 0; i < ncells_; ++i)
            if (geom.mask.values[static_cast<size_t>(i)] != 0.0f) type_[static_cast<size_t>(i)] = kFluid;
        for (int64_t i : geom.inlet_cells) type_[static_cast<size_t>(i)] = kInlet;
        for (int64_t i : geom.outlet_cells) type_[static_cast<size_t>(i)] = kOutlet;

        for (int a = 0; a < 3; ++a) {
            v_[a].assign(static_cast<size_t>(ncells_), 0.0);
            tmp_[a].assign(static_cast<size_t>(ncells_), 0.0);
        }

        unknown_id_.assign(static_cast<size_t>(ncells_), -1);
        for (int64_t i = 0; i < ncells_; ++i) {
            if (type_[static_cast<size_t>(i)] != kFluid) continue;
            // a divergence constraint only exists where at least one face
            // velocity is correctable
            bool coupled = false;
            for (int axis = 0; axis < 3 && !coupled; ++axis)
                for (int dir = -1; dir <= 1 && !coupled; dir += 2) coupled = is_correctable(type_at(neighbor(i, axis, dir)));
            if (!coupled) continue;
            unknown_id_[static_cast<size_t>(i)] = static_cast<int64_t>(unknown_cells_.size());
            unknown_cells_.push_back(i);
        }
        correctable_id_.assign(static_cast<size_t>(ncells_), -1);
        for (int64_t i = 0; i < ncells_; ++i)
            if (is_correctable(type_[static_cast<size_t>(i)])) {
                correctable_id_[static_cast<size_t>(i)] = static_cast<int64_t>(correctable_cells_.size());
                correctable_cells_.push_back(i);
            }

        build_correction_stencil();
        build_poisson_rows();
        p_.assign(unknown_cells_.size() + 1, 0.0);  // trailing slot is the hard zero
        rhs_.assign(unknown_cells_.size(), 0.0);
    }

    /// Overwrites the velocity state (values outside the fluid are pinned to
    /// zero). axis: 0 = d (vz), 1 = h (vy), 2 = w (vx).
    void set_velocity(int axis, const std::vector<double>& values) {
        if (static_cast<int64_t>(values.size()) != ncells_)
            throw std::invalid_argument("set_velocity: value count does not match the grid");
        v_[axis] = values;
        for (int64_t i = 0; i < ncells_; ++i)
            if (type_[static_cast<size_t>(i)] == kOutside) v_[axis][static_cast<size_t>(i)] = 0.0;
    }

    StepStats step(double v_in) {
        pin_boundaries(v_in);
        if (cfg_.advection) advect();
        diffuse();
        StepStats stats = project(v_in);
        if (!stats.converged) any_nonconverged_ = true;
        ++time_index_;
        return stats;
    }

    double kinetic_energy() const {
        double acc = 0.0;
        for (int a = 0; a < 3; ++a)
            for (double vv : v_[a]) acc += vv * vv;
        return 0.5 * acc;
    }

    /// Max |central-difference divergence| over the constrained (untagged
    /// fluid) voxels, recomputed from the velocity arrays.
    double max_divergence() const {
        double worst = 0.0;
        for (int64_t i : unknown_cells_) worst = std::max(worst, std::abs(divergence_at(i)));
        return worst;
    }

    FlowSnapshot snapshot(double v_in) const {
        FlowSnapshot s;
        s.vz = to_field(0);
        s.vy = to_field(1);
        s.vx = to_field(2);
        s.mask = geom_.mask;
        s.v_in = v_in;
        s.geometry_id = geom_.id;
        s.time_index = time_index_;
        s.converged = !any_nonconverged_;
        return s;
    }

    const std::vector<uint8_t>& cell_types() const { return type_; }
    int64_t time_index() const { return time_index_; }

private:
    static bool is_correctable(uint8_t t) { return t == kFluid || t == kOutlet; }

    int64_t neighbor(int64_t i, int axis, int dir) const {
        const int64_t coord = (i / stride_[axis]) % extent_[axis];
        if (dir > 0 && coord + 1 >= extent_[axis]) return -1;
        if (dir < 0 && coord == 0) return -1;
        return i + dir * stride_[axis];
    }

    uint8_t type_at(int64_t i) const { return i < 0 ? kOutside : type_[static_cast<size_t>(i)]; }

    int64_t corr_slot(int64_t cell, int axis, int dir) const {
        const int64_t cid = correctable_id_[static_cast<size_t>(cell)];
        return corr_nb_[static_cast<size_t>(cid) * 6 + axis * 2 + (dir + 1) / 2];
    }

    // Assembles div'(i) = div*(i) + sum(coef * p) one sparse row per unknown,
    // by substituting the pressure correction of each face velocity into the
    // central-difference divergence. Wall neighbors use the impermeability
    // ghost -v'(i), which both cancels lateral wall leakage exactly and keeps
    // the discrete flux budget closed.
    void build_poisson_rows() {
        const size_t n = unknown_cells_.size();
        const int64_t zero_slot = static_cast<int64_t>(n);
        row_start_.assign(n + 1, 0);
        row_idx_.clear();
        row_coef_.clear();
        row_diag_inv_.assign(n, 0.0);

        std::vector<double> coef(n + 1, 0.0);
        std::vector<int64_t> touched;
        for (size_t u = 0; u < n; ++u) {
            const int64_t i = unknown_cells_[u];
            touched.clear();
            auto accum = [&](int64_t slot, double c) {
                if (slot == zero_slot || c == 0.0) return;  // hard zero never contributes
                if (coef[static_cast<size_t>(slot)] == 0.0) touched.push_back(slot);
                coef[static_cast<size_t>(slot)] += c;
            };
            // alpha = (dt/rho)/(4h^2) is folded in at solve time; rows carry
            // unit-alpha coefficients.
            for (int axis = 0; axis < 3; ++axis)
                for (int dir = -1; dir <= 1; dir += 2) {
                    const double sign = static_cast<double>(dir);
                    const int64_t j = neighbor(i, axis, dir);
                    const uint8_t tj = type_at(j);
                    if (tj == kOutside) {
                        // V'(j) = -v'(i): reflect the p-terms of v'(i)
                        accum(corr_slot(i, axis, +1), sign);
                        accum(corr_slot(i, axis, -1), -sign);
                    } else if (tj == kInlet) {
                        // prescribed velocity, no pressure dependence
                    } else {
                        accum(corr_slot(j, axis, +1), -sign);
                        accum(corr_slot(j, axis, -1), sign);
                    }
                }
            const int64_t self = static_cast<int64_t>(u);
            double diag = coef[static_cast<size_t>(self)];
            row_start_[u + 1] = row_start_[u];
            for (int64_t slot : touched) {
                if (slot == self) continue;
                row_idx_.push_back(slot);
                row_coef_.push_back(coef[static_cast<size_t>(slot)]);
                coef[static_cast<size_t>(slot)] = 0.0;
                ++row_start_[u + 1];
            }
            coef[static_cast<size_t>(self)] = 0.0;
            row_diag_inv_[u] = diag != 0.0 ? 1.0 / diag : 0.0;
        }
    }

    void build_correction_stencil() {
        const size_t n = correctable_cells_.size();
        const int64_t zero_slot = static_cast<int64_t>(unknown_cells_.size());
        corr_nb_.assign(n * 6, zero_slot);
        for (size_t c = 0; c < n; ++c) {
            const int64_t j = correctable_cells_[c];
            int64_t self = type_[static_cast<size_t>(j)] == kOutlet ? zero_slot : unknown_id_[static_cast<size_t>(j)];
            if (self < 0) self = zero_slot;  // fluid cell with no constraint (isolated pocket)
            for (int axis = 0; axis < 3; ++axis)
                for (int dir = -1; dir <= 1; dir += 2) {
                    const int slot = axis * 2 + (dir + 1) / 2;
                    const int64_t t = neighbor(j, axis, dir);
                    const uint8_t tt = type_at(t);
                    if (tt == kFluid)
                        corr_nb_[c * 6 + slot] = unknown_id_[static_cast<size_t>(t)];
                    else if (tt == kOutlet)
                        corr_nb_[c * 6 + slot] = zero_slot;
                    else
                        corr_nb_[c * 6 + slot] = self;  // mirror: zero normal pressure gradient
                }
        }
    }

    void pin_boundaries(double v_in) {
        for (int64_t i = 0; i < ncells_; ++i) {
            const uint8_t t = type_[static_cast<size_t>(i)];
            if (t == kOutside) {
                v_[0][static_cast<size_t>(i)] = v_[1][static_cast<size_t>(i)] = v_[2][static_cast<size_t>(i)] = 0.0;
            } else if (t == kInlet) {
                v_[0][static_cast<size_t>(i)] = v_in * geom_.inlet_normal[0];
                v_[1][static_cast<size_t>(i)] = v_in * geom_.inlet_normal[1];
                v_[2][static_cast<size_t>(i)] = v_in * geom_.inlet_normal[2];
            }
        }
    }

    double value_or_zero(const std::vector<double>& f, int64_t i) const { return i < 0 ? 0.0 : f[static_cast<size_t>(i)]; }

    void advect() {
        const double hdt = cfg_.dt / cfg_.grid.spacing;
        for (int a = 0; a < 3; ++a) tmp_[a] = v_[a];
        for (int64_t j : correctable_cells_) {
            const size_t sj = static_cast<size_t>(j);
            const double adv[3] = {v_[0][sj], v_[1][sj], v_[2][sj]};
            for (int c = 0; c < 3; ++c) {
                double delta = 0.0;
                for (int axis = 0; axis < 3; ++axis) {
                    const double va = adv[axis];
                    if (va > 0.0)
                        delta += va * (v_[c][sj] - value_or_zero(v_[c], neighbor(j, axis, -1)));
                    else if (va < 0.0)
                        delta += va * (value_or_zero(v_[c], neighbor(j, axis, +1)) - v_[c][sj]);
                }
                tmp_[c][sj] = v_[c][sj] - hdt * delta;
            }
        }
        for (int a = 0; a < 3; ++a) std::swap(v_[a], tmp_[a]);
    }

    void diffuse() {
        const double lam = cfg_.viscosity / cfg_.density * cfg_.dt / (cfg_.grid.spacing * cfg_.grid.spacing);
        for (int a = 0; a < 3; ++a) tmp_[a] = v_[a];
        for (int64_t j : correctable_cells_) {
            const size_t sj = static_cast<size_t>(j);
            for (int c = 0; c < 3; ++c) {
                double nb = 0.0;
                for (int axis = 0; axis < 3; ++axis)
                    nb += value_or_zero(v_[c], neighbor(j, axis, -1)) + value_or_zero(v_[c], neighbor(j, axis, +1));
                tmp_[c][sj] = v_[c][sj] + lam * (nb - 6.0 * v_[c][sj]);
            }
        }
        for (int a = 0; a < 3; ++a) std::swap(v_[a], tmp_[a]);
    }

    // Central-difference divergence with the impermeable-wall ghost: a wall
    // neighbor contributes -v(i) so the face-interpolated normal velocity
    // vanishes at the wall.
    double divergence_at(int64_t i) const {
        const double inv2h = 1.0 / (2.0 * cfg_.grid.spacing);
        double div = 0.0;
        for (int axis = 0; axis < 3; ++axis) {
            const double self = v_[axis][static_cast<size_t>(i)];
            const int64_t jp = neighbor(i, axis, +1), jm = neighbor(i, axis, -1);
            const double vp = type_at(jp) == kOutside ? -self : v_[axis][static_cast<size_t>(jp)];
            const double vm = type_at(jm) == kOutside ? -self : v_[axis][static_cast<size_t>(jm)];
            div += (vp - vm) * inv2h;
        }
        return div;
    }

    StepStats project(double v_in) {
        StepStats stats;
        const size_t n = unknown_cells_.size();
        if (n == 0) return stats;
        const double hsp = cfg_.grid.spacing;
        const double beta = cfg_.dt / cfg_.density;
        const double alpha = beta / (4.0 * hsp * hsp);

        double v_scale = std::abs(v_in);
        for (int64_t j : correctable_cells_) {
            const size_t sj = static_cast<size_t>(j);
            v_scale = std::max({v_scale, std::abs(v_[0][sj]), std::abs(v_[1][sj]), std::abs(v_[2][sj])});
        }
        double max_div0 = 0.0;
        for (size_t u = 0; u < n; ++u) {
            rhs_[u] = divergence_at(unknown_cells_[u]);
            max_div0 = std::max(max_div0, std::abs(rhs_[u]));
        }
        const double tol = cfg_.convergence_tol * v_scale / hsp;
        if (max_div0 <= tol) {
            stats.max_divergence = max_div0;
            return stats;  // nothing to project (e.g. quiescent field)
        }

        for (size_t u = 0; u < n; ++u) rhs_[u] /= alpha;  // rows carry unit-alpha coefficients

        const double omega = cfg_.sor_omega;
        bool converged = false;
        int64_t sweeps = 0;
        double max_res = max_div0;
        while (sweeps < cfg_.inner_iterations && !converged) {
            for (size_t u = 0; u < n; ++u) {
                double off = 0.0;
                for (int64_t k = row_start_[u]; k < row_start_[u + 1]; ++k)
                    off += row_coef_[static_cast<size_t>(k)] * p_[static_cast<size_t>(row_idx_[static_cast<size_t>(k)])];
                const double gs = -(rhs_[u] + off) * row_diag_inv_[u];
                p_[u] += omega * (gs - p_[u]);
            }
            ++sweeps;
            if (sweeps % 4 == 0 || sweeps == cfg_.inner_iterations) {
                max_res = 0.0;
                for (size_t u = 0; u < n; ++u) {
                    double off = 0.0;
                    for (int64_t k = row_start_[u]; k < row_start_[u + 1]; ++k)
                        off += row_coef_[static_cast<size_t>(k)] *
                               p_[static_cast<size_t>(row_idx_[static_cast<size_t>(k)])];
                    const double diag = row_diag_inv_[u] != 0.0 ? 1.0 / row_diag_inv_[u] : 0.0;
                    const double res = alpha * (rhs_[u] + off + diag * p_[u]);
                    max_res = std::max(max_res, std::abs(res));
                }
                converged = max_res <= tol;
            }
        }
        stats.poisson_sweeps = sweeps;
        stats.converged = converged;
        stats.max_divergence = max_res;

        // velocity correction: v -= (dt/rho) * grad p
        const double scale = beta / (2.0 * hsp);
        for (size_t c = 0; c < correctable_cells_.size(); ++c) {
            const size_t sj = static_cast<size_t>(correctable_cells_[c]);
            const int64_t* nb = &corr_nb_[c * 6];
            for (int axis = 0; axis < 3; ++axis) {
                const double grad = p_[static_cast<size_t>(nb[axis * 2 + 1])] - p_[static_cast<size_t>(nb[axis * 2])];
                v_[axis][sj] -= scale * grad;
            }
        }
        return stats;
    }

    VolumeField to_field(int axis) const {
        VolumeField f(nd_, nh_, nw_);
        for (int64_t i = 0; i < ncells_; ++i) f.values[static_cast<size_t>(i)] = static_cast<float>(v_[axis][static_cast<size_t>(i)]);
        return f;
    }

    VoxelGeometry geom_;
    SolverConfig cfg_;
    int64_t nd_ = 0, nh_ = 0, nw_ = 0, ncells_ = 0;
    std::array<int64_t, 3> stride_{}, extent_{};
    std::vector<uint8_t> type_;
    std::vector<int64_t> unknown_id_, correctable_id_;
    std::vector<int64_t> unknown_cells_, correctable_cells_;
    std::vector<int64_t> corr_nb_;
    std::vector<int64_t> row_start_, row_idx_;
    std::vector<double> row_coef_, row_diag_inv_;
    std::array<std::vector<double>, 3> v_, tmp_;
    std::vector<double> p_, rhs_;
    int64_t time_index_ = 0;
    bool any_nonconverged_ = false;
};

/// Runs a full transient simulation. Emits the final snapshot, or one every
/// emit_every steps when emit_every > 0. Non-converged pressure solves mark
/// the snapshot.
inline std::vector<FlowSnapshot> simulate(const VentricleGeometry& geom, const SolverConfig& cfg, double v_in,
                                          int64_t emit_every = 0) {
    cfg.validate();
    VoxelGeometry vg = voxelize(geom, cfg.grid);
    ProjectionStepper stepper(vg, cfg);
    std::vector<FlowSnapshot> out;
    for (int64_t t = 1; t <= cfg.steps; ++t) {
        stepper.step(v_in);
        if (emit_every > 0 && t % emit_every == 0) out.push_back(stepper.snapshot(v_in));
    }
    if (emit_every <= 0) out.push_back(stepper.snapshot(v_in));
    return out;
}

}  // namespace sparseflow

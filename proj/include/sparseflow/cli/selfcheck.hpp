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

#include <iostream>

#include "sparseflow/data/pipeline.hpp"
#include "sparseflow/evalkit/metrics.hpp"
#include "sparseflow/flow/solver.hpp"
#include "sparseflow/models/net.hpp"
#include "sparseflow/tensor/gradcheck.hpp"

namespace sparseflow::cli {

namespace detail {

template <typename F>
bool report(std::ostream& os, const char* name, F&& body) {
    try {
        const auto [pass, note] = body();
        os << (pass ? "[ok]   " : "[FAIL] ") << name << ": " << note << "\n";
        return pass;
    } catch (const std::exception& e) {
        os << "[FAIL] " << name << ": " << e.what() << "\n";
        return false;
    }
}

inline Tensor<double> random_input(Shape shape, uint64_t seed) {
    Rng rng(seed);
    auto t = Tensor<double>::zeros(std::move(shape));
    for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
    return t;
}

}  // namespace detail

/// Numeric release gates: gradient checks, adjoint identities, shape ladder,
/// solver divergence, sparse-mask density, PSNR arithmetic. One line per
/// check; returns false if any gate fails. inject_gradient_bug corrupts one
/// analytic gradient on purpose, the negative control for the gate itself.
inline bool selfcheck_run(std::ostream& os, bool inject_gradient_bug = false) {
    bool all = true;

    all &= detail::report(os, "gradients", [&]() -> std::pair<bool, std::string> {
        double worst = 0.0;
        for (uint64_t seed = 0; seed < 3; ++seed) {
            auto x = detail::random_input({1, 1, 4, 4, 4}, 10 + seed);
            auto w = detail::random_input({2, 1, 3, 3, 3}, 20 + seed);
            auto b = detail::random_input({2}, 30 + seed);
            auto wt = detail::random_input({1, 2, 2, 2, 2}, 40 + seed);
            auto slope = Tensor<double>::full({1}, 0.25);
            auto coef = detail::random_input({1, 1, 2, 2, 2}, 50 + seed);
            auto target = detail::random_input({1, 1, 4, 4, 4}, 60 + seed);

            worst = std::max(worst, finite_diff_check(
                [&](const Tensor<double>& t) { return sum(conv3d(t, w, b, {1, 1, 1}, {1, 1, 1})); }, x));
            worst = std::max(worst, finite_diff_check(
                [&](const Tensor<double>& t) { return sum(conv3d(x, t, b, {1, 1, 1}, {1, 1, 1})); }, w));
            worst = std::max(worst, finite_diff_check(
                [&](const Tensor<double>& t) { return sum(conv_transpose3d(t, wt, b)); }, x));
            worst = std::max(worst, finite_diff_check(
                [&](const Tensor<double>& t) { return sum(mul(maxpool3d(t), coef)); }, x));
            worst = std::max(worst, finite_diff_check(
                [&](const Tensor<double>& t) { return sum(mul(instance_norm3d(t), mul(x, x))); }, x, 1e-6));
            worst = std::max(worst, finite_diff_check(
                [&](const Tensor<double>& t) { return sum(mul(prelu(t, slope), x)); }, x));
            worst = std::max(worst, finite_diff_check(
                [&](const Tensor<double>& t) { return huber_loss(t, target, 0.5); }, x, 1e-6));
        }
        if (inject_gradient_bug) worst += 1e-2;  // deliberate fault, proves the gate trips
        return {worst < 1e-4, "max rel err " + std::to_string(worst)};
    });

    all &= detail::report(os, "adjoint identity", [&]() -> std::pair<bool, std::string> {
        double worst = 0.0;
        const int64_t kcfg[4][3] = {{3, 1, 1}, {3, 2, 1}, {2, 2, 0}, {1, 1, 0}};
        for (const auto& c : kcfg) {
            auto u = detail::random_input({1, 2, 8, 8, 8}, 70);
            auto w = detail::random_input({3, 2, c[0], c[0], c[0]}, 71);
            Dims3 stride{c[1], c[1], c[1]}, pad{c[2], c[2], c[2]};
            const int64_t op = (8 + 2 * c[2] - c[0]) % c[1];
            auto cu = conv3d(u, w, Tensor<double>(), stride, pad);
            auto v = detail::random_input(cu.shape(), 72);
            auto ctv = conv_transpose3d(v, w, Tensor<double>(), stride, pad, {op, op, op});
            double lhs = 0.0, rhs = 0.0;
            for (int64_t i = 0; i < cu.numel(); ++i) lhs += cu.data()[i] * v.data()[i];
            for (int64_t i = 0; i < u.numel(); ++i) rhs += u.data()[i] * ctv.data()[i];
            worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-300));
        }
        return {worst < 1e-10, "max rel err " + std::to_string(worst)};
    });

    all &= detail::report(os, "shape ladder", [&]() -> std::pair<bool, std::string> {
        auto net = build_lvadnet3d<float>(lvadnet3d_config(4), 1);
        auto x = Tensor<float>::zeros({1, 2, 32, 32, 32});
        auto y = net.forward(x, Tensor<float>::scalar(0.3f));
        const bool ok = y.shape() == Shape{1, 1, 32, 32, 32};
        return {ok, "desk 32^3 -> " + shape_str(y.shape())};
    });

    all &= detail::report(os, "solver divergence", [&]() -> std::pair<bool, std::string> {
        SolverConfig cfg;
        cfg.grid = GridSpec::cubic(24);
        cfg.steps = 60;
        cfg.inner_iterations = 4000;
        auto geom = make_ventricle_geometry("check", 70.0, 108.0, cfg.grid);
        auto vg = voxelize(geom, cfg.grid);
        ProjectionStepper stepper(vg, cfg);
        for (int64_t t = 0; t < cfg.steps; ++t) stepper.step(0.3);
        const double div = stepper.max_divergence();
        const double bound = 1e-3 * 0.3 / cfg.grid.spacing;
        return {div < bound, "max divergence " + std::to_string(div) + " (bound " + std::to_string(bound) + ")"};
    });

    all &= detail::report(os, "sparse mask density", [&]() -> std::pair<bool, std::string> {
        VolumeField mask(16, 16, 16);
        int64_t n_in = 0;
        for (int64_t i = 0; i < mask.numel(); ++i)
            if (i % 3 == 0) {
                mask.values[static_cast<size_t>(i)] = 1.0f;
                ++n_in;
            }
        auto sparse = make_sparse_mask(mask, 0.05, 99);
        int64_t kept = 0;
        bool subset = true;
        for (int64_t i = 0; i < sparse.numel(); ++i)
            if (sparse.values[static_cast<size_t>(i)] != 0.0f) {
                ++kept;
                subset &= mask.values[static_cast<size_t>(i)] != 0.0f;
            }
        const bool ok = subset && kept == n_in / 20;
        return {ok, std::to_string(kept) + " of " + std::to_string(n_in) + " voxels"};
    });

    all &= detail::report(os, "psnr arithmetic", [&]() -> std::pair<bool, std::string> {
        const bool a = std::abs(psnr_from_mse(1.90e-3) - 27.21) < 0.02;
        const bool b = std::abs(psnr_from_mse(5.03e-2) - 12.98) < 0.005;
        const bool c = std::abs(std::sqrt(1.90e-3) - 4.36e-2) < 0.005e-2;
        return {a && b && c, "peak-1 identities hold"};
    });

    os << (all ? "selfcheck passed" : "selfcheck FAILED") << "\n";
    return all;
}

}  // namespace sparseflow::cli

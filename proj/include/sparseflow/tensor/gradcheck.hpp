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

#include <functional>

#include "sparseflow/tensor/ops.hpp"

namespace sparseflow {

/// Compares the reverse-mode gradient of the scalar function f at x against
/// central finite differences. Returns the max over elements of
/// |analytic - cd| / max(|analytic|, |cd|, 1e-12).
///
/// f receives a fresh tensor each call and must return a scalar tensor; it
/// must not capture tape state of its own.
inline double finite_diff_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                                const Tensor<double>& x, double eps = 1e-5) {
    Tensor<double> xv = x.clone();
    xv.set_requires_grad(true);
    std::vector<double> analytic;
    {
        Tape<double> tape;
        TapeScope<double> scope(tape);
        Tensor<double> y = f(xv);
        if (y.numel() != 1)
            throw std::invalid_argument("finite_diff_check: f must be scalar-valued, got " + shape_str(y.shape()));
        tape.backward(y);
        analytic = xv.grad();
    }

    Tensor<double> xp = x.clone();
    double max_rel = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) {
        const double orig = xp.data()[i];
        xp.data()[i] = orig + eps;
        const double fp = f(xp).item();
        xp.data()[i] = orig - eps;
        const double fm = f(xp).item();
        xp.data()[i] = orig;
        const double cd = (fp - fm) / (2.0 * eps);
        const double a = analytic[static_cast<size_t>(i)];
        const double denom = std::max({std::abs(a), std::abs(cd), 1e-12});
        max_rel = std::max(max_rel, std::abs(a - cd) / denom);
    }
    return max_rel;
}

}  // namespace sparseflow

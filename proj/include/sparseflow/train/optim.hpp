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
#include <vector>

#include "sparseflow/tensor/tensor.hpp"

namespace sparseflow {

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

/// One elementwise Adam update with bias-corrected moments. t is the 1-based
/// step count after this update.
template <typename T>
void adam_step(std::vector<T>& param, const std::vector<T>& grad, std::vector<T>& m, std::vector<T>& v, int64_t t,
               double lr, double beta1 = kAdamBeta1, double beta2 = kAdamBeta2, double epsilon = kAdamEpsilon) {
    if (param.size() != grad.size() || param.size() != m.size() || param.size() != v.size())
        throw std::invalid_argument("adam_step: parameter/gradient/state sizes disagree");
    const T b1 = static_cast<T>(beta1), b2 = static_cast<T>(beta2);
    const T corr1 = static_cast<T>(1.0 - std::pow(beta1, static_cast<double>(t)));
    const T corr2 = static_cast<T>(1.0 - std::pow(beta2, static_cast<double>(t)));
    const T step = static_cast<T>(lr);
    const T eps = static_cast<T>(epsilon);
    for (size_t i = 0; i < param.size(); ++i) {
        const T g = grad[i];
        m[i] = b1 * m[i] + (T(1) - b1) * g;
        v[i] = b2 * v[i] + (T(1) - b2) * g * g;
        const T mhat = m[i] / corr1;
        const T vhat = v[i] / corr2;
        param[i] -= step * mhat / (std::sqrt(vhat) + eps);
    }
}

/// Adam over a model's parameter list. A step with any non-finite gradient is
/// rejected: no parameter or moment changes, and the step returns false.
template <typename T>
class Adam {
public:
    explicit Adam(std::vector<Tensor<T>> params) : params_(std::move(params)) {
        for (const auto& p : params_) {
            m_.emplace_back(p.values().size(), T(0));
            v_.emplace_back(p.values().size(), T(0));
        }
    }

    bool step(double lr) {
        for (const auto& p : params_)
            for (T g : p.grad())
                if (!std::isfinite(static_cast<double>(g))) return false;
        ++t_;
        for (size_t i = 0; i < params_.size(); ++i)
            adam_step(params_[i].values(), params_[i].grad(), m_[i], v_[i], t_, lr);
        return true;
    }

    int64_t t() const { return t_; }
    size_t size() const { return params_.size(); }
    std::vector<std::vector<T>>& moments1() { return m_; }
    std::vector<std::vector<T>>& moments2() { return v_; }
    void restore(std::vector<std::vector<T>> m, std::vector<std::vector<T>> v, int64_t t) {
        if (m.size() != params_.size() || v.size() != params_.size())
            throw std::invalid_argument("Adam::restore: state does not match parameter list");
        m_ = std::move(m);
        v_ = std::move(v);
        t_ = t;
    }

private:
    std::vector<Tensor<T>> params_;
    std::vector<std::vector<T>> m_, v_;
    int64_t t_ = 0;
};

/// Cosine decay: lr_min + (lr0 - lr_min) * (1 + cos(pi * step / total)) / 2.
inline double cosine_lr(int64_t step, int64_t total_steps, double lr0, double lr_min = 0.0) {
    if (step < 0 || step > total_steps) throw std::invalid_argument("cosine_lr: step outside [0, total_steps]");
    if (total_steps == 0) return lr0;
    const double phase = 3.141592653589793 * static_cast<double>(step) / static_cast<double>(total_steps);
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(phase));
}

}  // namespace sparseflow

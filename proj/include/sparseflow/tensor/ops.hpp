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
#include <limits>

#include "sparseflow/tensor/conv3d.hpp"
#include "sparseflow/tensor/tensor.hpp"

namespace sparseflow {

/// 2x2x2 max pooling with stride 2. Spatial extents must be even. Backward
/// routes the gradient to the argmax voxel; ties go to the first position in
/// (d,h,w) scan order.
template <typename T>
Tensor<T> maxpool3d(const Tensor<T>& x, int64_t window = 2, int64_t stride = 2) {
    if (window != 2 || stride != 2) throw std::invalid_argument("maxpool3d: only window=2, stride=2 is supported");
    if (x.rank() != 5) throw std::invalid_argument("maxpool3d: input must be 5-D, got " + shape_str(x.shape()));
    const int64_t N = x.dim(0), C = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
    if (D % 2 || H % 2 || W % 2)
        throw std::invalid_argument("maxpool3d: spatial extents must be even, got " + shape_str(x.shape()));
    const int64_t OD = D / 2, OH = H / 2, OW = W / 2;
    Tensor<T> out = Tensor<T>::zeros({N, C, OD, OH, OW});

    const bool rec = detail::tracing<T>({&x});
    std::vector<int64_t> argmax;
    if (rec) argmax.resize(static_cast<size_t>(out.numel()));

    const T* xp = x.data();
    T* op = out.data();
    int64_t oi = 0;
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const T* xs = xp + nc * D * H * W;
        for (int64_t od = 0; od < OD; ++od)
            for (int64_t oh = 0; oh < OH; ++oh)
                for (int64_t ow = 0; ow < OW; ++ow, ++oi) {
                    T best = -std::numeric_limits<T>::infinity();
                    int64_t best_idx = -1;
                    for (int64_t kd = 0; kd < 2; ++kd)
                        for (int64_t kh = 0; kh < 2; ++kh)
                            for (int64_t kw = 0; kw < 2; ++kw) {
                                const int64_t idx = ((od * 2 + kd) * H + (oh * 2 + kh)) * W + ow * 2 + kw;
                                if (xs[idx] > best) {
                                    best = xs[idx];
                                    best_idx = nc * D * H * W + idx;
                                }
                            }
                    op[oi] = best;
                    if (rec) argmax[static_cast<size_t>(oi)] = best_idx;
                }
    }

    if (rec) {
        detail::mark_output(out);
        auto xn = x.node_ptr();
        auto on = out.node_ptr();
        TapeScope<T>::active()->record([xn, on, argmax = std::move(argmax)]() {
            if (!xn->requires_grad) return;
            const T* g = on->grad.data();
            T* dx = xn->grad.data();
            for (size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += g[i];
        });
    }
    return out;
}

/// Instance normalization over the spatial voxels of each (sample, channel)
/// slice, without learned affine parameters.
template <typename T>
Tensor<T> instance_norm3d(const Tensor<T>& x, T epsilon = T(1e-5)) {
    if (x.rank() != 5) throw std::invalid_argument("instance_norm3d: input must be 5-D, got " + shape_str(x.shape()));
    const int64_t N = x.dim(0), C = x.dim(1), S = x.dim(2) * x.dim(3) * x.dim(4);
    if (S < 2) throw std::invalid_argument("instance_norm3d: needs at least 2 spatial voxels per channel");
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    std::vector<T> inv_sigma(static_cast<size_t>(N * C));

    const T* xp = x.data();
    T* op = out.data();
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const T* xs = xp + nc * S;
        T* os = op + nc * S;
        T mean = T(0);
        for (int64_t i = 0; i < S; ++i) mean += xs[i];
        mean /= static_cast<T>(S);
        T var = T(0);
        for (int64_t i = 0; i < S; ++i) {
            const T d = xs[i] - mean;
            var += d * d;
        }
        var /= static_cast<T>(S);
        const T inv = T(1) / std::sqrt(var + epsilon);
        inv_sigma[static_cast<size_t>(nc)] = inv;
        for (int64_t i = 0; i < S; ++i) os[i] = (xs[i] - mean) * inv;
    }

    if (detail::tracing<T>({&x})) {
        detail::mark_output(out);
        auto xn = x.node_ptr();
        auto on = out.node_ptr();
        TapeScope<T>::active()->record([xn, on, inv_sigma = std::move(inv_sigma), N, C, S]() {
            if (!xn->requires_grad) return;
            const T* g = on->grad.data();
            const T* y = on->values.data();  // normalized output doubles as x-hat
            T* dx = xn->grad.data();
            for (int64_t nc = 0; nc < N * C; ++nc) {
                const T* gs = g + nc * S;
                const T* ys = y + nc * S;
                T gmean = T(0), gymean = T(0);
                for (int64_t i = 0; i < S; ++i) {
                    gmean += gs[i];
                    gymean += gs[i] * ys[i];
                }
                gmean /= static_cast<T>(S);
                gymean /= static_cast<T>(S);
                const T inv = inv_sigma[static_cast<size_t>(nc)];
                T* dxs = dx + nc * S;
                for (int64_t i = 0; i < S; ++i) dxs[i] += inv * (gs[i] - gmean - ys[i] * gymean);
            }
        });
    }
    return out;
}

/// PReLU with one learnable slope per channel: x for x >= 0, a_c * x below.
template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope) {
    if (x.rank() < 2) throw std::invalid_argument("prelu: input must have a channel axis, got " + shape_str(x.shape()));
    const int64_t N = x.dim(0), C = x.dim(1);
    if (slope.numel() != C)
        throw std::invalid_argument("prelu: slope shape " + shape_str(slope.shape()) + " does not match " +
                                    std::to_string(C) + " channels");
    const int64_t S = x.numel() / (N * C);
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T* xp = x.data();
    const T* ap = slope.data();
    T* op = out.data();
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const T a = ap[c];
            const T* xs = xp + (n * C + c) * S;
            T* os = op + (n * C + c) * S;
            for (int64_t i = 0; i < S; ++i) os[i] = xs[i] >= T(0) ? xs[i] : a * xs[i];
        }

    if (detail::tracing<T>({&x, &slope})) {
        detail::mark_output(out);
        auto xn = x.node_ptr();
        auto an = slope.node_ptr();
        auto on = out.node_ptr();
        TapeScope<T>::active()->record([xn, an, on, N, C, S]() {
            const T* g = on->grad.data();
            const T* xv = xn->values.data();
            for (int64_t n = 0; n < N; ++n)
                for (int64_t c = 0; c < C; ++c) {
                    const int64_t base = (n * C + c) * S;
                    if (xn->requires_grad) {
                        const T a = an->values[static_cast<size_t>(c)];
                        T* dx = xn->grad.data() + base;
                        for (int64_t i = 0; i < S; ++i) dx[i] += g[base + i] * (xv[base + i] >= T(0) ? T(1) : a);
                    }
                    if (an->requires_grad) {
                        T acc = T(0);
                        for (int64_t i = 0; i < S; ++i)
                            if (xv[base + i] < T(0)) acc += g[base + i] * xv[base + i];
                        an->grad[static_cast<size_t>(c)] += acc;
                    }
                }
        });
    }
    return out;
}

/// Concatenation along the channel axis. Batch and spatial extents must agree.
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_channels: empty input list");
    const Shape& s0 = xs[0].shape();
    if (s0.size() != 5) throw std::invalid_argument("concat_channels: inputs must be 5-D, got " + shape_str(s0));
    int64_t C = 0;
    for (const auto& t : xs) {
        const Shape& s = t.shape();
        if (s.size() != 5 || s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3] || s[4] != s0[4])
            throw std::invalid_argument("concat_channels: incompatible shapes " + shape_str(s0) + " vs " +
                                        shape_str(s));
        C += s[1];
    }
    const int64_t N = s0[0], S = s0[2] * s0[3] * s0[4];
    Tensor<T> out = Tensor<T>::zeros({N, C, s0[2], s0[3], s0[4]});
    T* op = out.data();
    for (int64_t n = 0; n < N; ++n) {
        int64_t c_off = 0;
        for (const auto& t : xs) {
            const int64_t Ci = t.dim(1);
            std::copy_n(t.data() + n * Ci * S, Ci * S, op + (n * C + c_off) * S);
            c_off += Ci;
        }
    }

    bool rec = false;
    if (TapeScope<T>::active())
        for (const auto& t : xs) rec = rec || t.requires_grad();
    if (rec) {
        detail::mark_output(out);
        std::vector<std::shared_ptr<TensorNode<T>>> nodes;
        nodes.reserve(xs.size());
        for (const auto& t : xs) nodes.push_back(t.node_ptr());
        auto on = out.node_ptr();
        TapeScope<T>::active()->record([nodes = std::move(nodes), on, N, C, S]() {
            const T* g = on->grad.data();
            for (int64_t n = 0; n < N; ++n) {
                int64_t c_off = 0;
                for (const auto& in : nodes) {
                    const int64_t Ci = in->shape[1];
                    if (in->requires_grad) {
                        const T* gs = g + (n * C + c_off) * S;
                        T* dx = in->grad.data() + n * Ci * S;
                        for (int64_t i = 0; i < Ci * S; ++i) dx[i] += gs[i];
                    }
                    c_off += Ci;
                }
            }
        });
    }
    return out;
}

/// Fills target_shape with the scalar v. v may hold one value per batch
/// sample ([N]) or a single value shared by all samples ([1]). The gradient
/// of v is the sum of the upstream gradient over its broadcast region.
template <typename T>
Tensor<T> broadcast_scalar(const Tensor<T>& v, Shape target_shape) {
    if (target_shape.size() != 5)
        throw std::invalid_argument("broadcast_scalar: target must be 5-D, got " + shape_str(target_shape));
    const int64_t N = target_shape[0];
    if (v.numel() != 1 && v.numel() != N)
        throw std::invalid_argument("broadcast_scalar: source shape " + shape_str(v.shape()) +
                                    " must hold 1 value or one per batch sample (" + std::to_string(N) + ")");
    Tensor<T> out = Tensor<T>::zeros(target_shape);
    const int64_t per = out.numel() / N;
    T* op = out.data();
    for (int64_t n = 0; n < N; ++n) {
        const T val = v.numel() == 1 ? v.data()[0] : v.data()[n];
        std::fill_n(op + n * per, per, val);
    }

    if (detail::tracing<T>({&v})) {
        detail::mark_output(out);
        auto vn = v.node_ptr();
        auto on = out.node_ptr();
        TapeScope<T>::active()->record([vn, on, N, per]() {
            if (!vn->requires_grad) return;
            const T* g = on->grad.data();
            for (int64_t n = 0; n < N; ++n) {
                T acc = T(0);
                for (int64_t i = 0; i < per; ++i) acc += g[n * per + i];
                vn->grad[vn->grad.size() == 1 ? 0 : static_cast<size_t>(n)] += acc;
            }
        });
    }
    return out;
}

/// Mean Huber loss with threshold delta: quadratic inside |a| <= delta,
/// linear outside, C1-continuous at the joint.
template <typename T>
Tensor<T> huber_loss(const Tensor<T>& pred, const Tensor<T>& target, T delta) {
    if (pred.shape() != target.shape())
        throw std::invalid_argument("huber_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                                    shape_str(target.shape()));
    if (delta <= T(0)) throw std::invalid_argument("huber_loss: delta must be positive");
    const int64_t n = pred.numel();
    const T* p = pred.data();
    const T* t = target.data();
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) {
        const T a = p[i] - t[i];
        const T abs_a = std::abs(a);
        acc += abs_a <= delta ? T(0.5) * a * a : delta * (abs_a - T(0.5) * delta);
    }
    Tensor<T> out = Tensor<T>::scalar(acc / static_cast<T>(n));

    if (detail::tracing<T>({&pred, &target})) {
        detail::mark_output(out);
        auto pn = pred.node_ptr();
        auto tn = target.node_ptr();
        auto on = out.node_ptr();
        TapeScope<T>::active()->record([pn, tn, on, delta, n]() {
            const T g = on->grad[0] / static_cast<T>(n);
            const T* p = pn->values.data();
            const T* t = tn->values.data();
            for (int64_t i = 0; i < n; ++i) {
                const T a = p[i] - t[i];
                const T d = std::clamp(a, -delta, delta) * g;  // dL/da, C1 across the joint
                if (pn->requires_grad) pn->grad[static_cast<size_t>(i)] += d;
                if (tn->requires_grad) tn->grad[static_cast<size_t>(i)] -= d;
            }
        });
    }
    return out;
}

/// Sum of all elements, as a scalar tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T acc = T(0);
    for (T v : x.values()) acc += v;
    Tensor<T> out = Tensor<T>::scalar(acc);
    if (detail::tracing<T>({&x})) {
        detail::mark_output(out);
        auto xn = x.node_ptr();
        auto on = out.node_ptr();
        TapeScope<T>::active()->record([xn, on]() {
            if (!xn->requires_grad) return;
            const T g = on->grad[0];
            for (auto& d : xn->grad) d += g;
        });
    }
    return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
    if (detail::tracing<T>({&a, &b})) {
        detail::mark_output(out);
        auto an = a.node_ptr();
        auto bn = b.node_ptr();
        auto on = out.node_ptr();
        TapeScope<T>::active()->record([an, bn, on, n]() {
            const T* g = on->grad.data();
            for (int64_t i = 0; i < n; ++i) {
                if (an->requires_grad) an->grad[static_cast<size_t>(i)] += g[i];
                if (bn->requires_grad) bn->grad[static_cast<size_t>(i)] += g[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
    if (detail::tracing<T>({&a, &b})) {
        detail::mark_output(out);
        auto an = a.node_ptr();
        auto bn = b.node_ptr();
        auto on = out.node_ptr();
        TapeScope<T>::active()->record([an, bn, on, n]() {
            const T* g = on->grad.data();
            for (int64_t i = 0; i < n; ++i) {
                if (an->requires_grad) an->grad[static_cast<size_t>(i)] += g[i] * bn->values[static_cast<size_t>(i)];
                if (bn->requires_grad) bn->grad[static_cast<size_t>(i)] += g[i] * an->values[static_cast<size_t>(i)];
            }
        });
    }
    return out;
}

}  // namespace sparseflow

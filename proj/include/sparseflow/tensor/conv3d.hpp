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

#include "sparseflow/tensor/tensor.hpp"

namespace sparseflow {

using Dims3 = std::array<int64_t, 3>;

/// floor((extent + 2*pad - kernel) / stride) + 1
inline int64_t conv_out_extent(int64_t extent, int64_t kernel, int64_t stride, int64_t pad) {
    int64_t span = extent + 2 * pad - kernel;
    if (span < 0)
        throw std::invalid_argument("conv3d: kernel " + std::to_string(kernel) + " exceeds padded extent " +
                                    std::to_string(extent + 2 * pad));
    return span / stride + 1;
}

/// (extent - 1) * stride - 2*pad + kernel + out_pad. out_pad < stride selects
/// among the input extents that a forward conv would map to `extent`.
inline int64_t conv_transpose_out_extent(int64_t extent, int64_t kernel, int64_t stride, int64_t pad,
                                         int64_t out_pad = 0) {
    if (out_pad < 0 || out_pad >= stride)
        throw std::invalid_argument("conv_transpose3d: output padding must lie in [0, stride)");
    int64_t out = (extent - 1) * stride - 2 * pad + kernel + out_pad;
    if (out <= 0) throw std::invalid_argument("conv_transpose3d: non-positive output extent");
    return out;
}

namespace detail {

// Range of output indices o with 0 <= o*stride - pad + k <= extent-1.
struct AxisRange {
    int64_t lo, hi;  // inclusive; empty if lo > hi
};

inline AxisRange valid_out_range(int64_t in_extent, int64_t out_extent, int64_t stride, int64_t pad, int64_t k) {
    AxisRange r;
    r.lo = std::max<int64_t>(0, div_ceil(pad - k, stride));
    r.hi = std::min<int64_t>(out_extent - 1, div_floor(in_extent - 1 + pad - k, stride));
    return r;
}

// out[n,co,·] += wv * x[n,ci,·], correlation sense: in = o*stride - pad + k.
template <typename T>
void conv3d_accumulate(const T* x, T* out, T wv, int64_t D, int64_t H, int64_t W, int64_t OD, int64_t OH, int64_t OW,
                       const Dims3& stride, const Dims3& pad, int64_t kd, int64_t kh, int64_t kw) {
    const AxisRange rd = valid_out_range(D, OD, stride[0], pad[0], kd);
    const AxisRange rh = valid_out_range(H, OH, stride[1], pad[1], kh);
    const AxisRange rw = valid_out_range(W, OW, stride[2], pad[2], kw);
    if (rd.lo > rd.hi || rh.lo > rh.hi || rw.lo > rw.hi) return;
    for (int64_t od = rd.lo; od <= rd.hi; ++od) {
        const int64_t id = od * stride[0] - pad[0] + kd;
        for (int64_t oh = rh.lo; oh <= rh.hi; ++oh) {
            const int64_t ih = oh * stride[1] - pad[1] + kh;
            const T* xrow = x + (id * H + ih) * W;
            T* orow = out + (od * OH + oh) * OW;
            if (stride[2] == 1) {
                const int64_t off = kw - pad[2];
                for (int64_t ow = rw.lo; ow <= rw.hi; ++ow) orow[ow] += wv * xrow[ow + off];
            } else {
                for (int64_t ow = rw.lo; ow <= rw.hi; ++ow) orow[ow] += wv * xrow[ow * stride[2] - pad[2] + kw];
            }
        }
    }
}

// dx[n,ci,·] += wv * g[n,co,·], the scatter adjoint of conv3d_accumulate.
template <typename T>
void conv3d_scatter(const T* g, T* dx, T wv, int64_t D, int64_t H, int64_t W, int64_t OD, int64_t OH, int64_t OW,
                    const Dims3& stride, const Dims3& pad, int64_t kd, int64_t kh, int64_t kw) {
    const AxisRange rd = valid_out_range(D, OD, stride[0], pad[0], kd);
    const AxisRange rh = valid_out_range(H, OH, stride[1], pad[1], kh);
    const AxisRange rw = valid_out_range(W, OW, stride[2], pad[2], kw);
    if (rd.lo > rd.hi || rh.lo > rh.hi || rw.lo > rw.hi) return;
    for (int64_t od = rd.lo; od <= rd.hi; ++od) {
        const int64_t id = od * stride[0] - pad[0] + kd;
        for (int64_t oh = rh.lo; oh <= rh.hi; ++oh) {
            const int64_t ih = oh * stride[1] - pad[1] + kh;
            T* xrow = dx + (id * H + ih) * W;
            const T* grow = g + (od * OH + oh) * OW;
            if (stride[2] == 1) {
                const int64_t off = kw - pad[2];
                for (int64_t ow = rw.lo; ow <= rw.hi; ++ow) xrow[ow + off] += wv * grow[ow];
            } else {
                for (int64_t ow = rw.lo; ow <= rw.hi; ++ow) xrow[ow * stride[2] - pad[2] + kw] += wv * grow[ow];
            }
        }
    }
}

// sum over the valid output window of x[n,ci,·] * g[n,co,·], for dW.
template <typename T>
T conv3d_correlate(const T* x, const T* g, int64_t D, int64_t H, int64_t W, int64_t OD, int64_t OH, int64_t OW,
                   const Dims3& stride, const Dims3& pad, int64_t kd, int64_t kh, int64_t kw) {
    const AxisRange rd = valid_out_range(D, OD, stride[0], pad[0], kd);
    const AxisRange rh = valid_out_range(H, OH, stride[1], pad[1], kh);
    const AxisRange rw = valid_out_range(W, OW, stride[2], pad[2], kw);
    T acc = T(0);
    if (rd.lo > rd.hi || rh.lo > rh.hi || rw.lo > rw.hi) return acc;
    for (int64_t od = rd.lo; od <= rd.hi; ++od) {
        const int64_t id = od * stride[0] - pad[0] + kd;
        for (int64_t oh = rh.lo; oh <= rh.hi; ++oh) {
            const int64_t ih = oh * stride[1] - pad[1] + kh;
            const T* xrow = x + (id * H + ih) * W;
            const T* grow = g + (od * OH + oh) * OW;
            if (stride[2] == 1) {
                const int64_t off = kw - pad[2];
                for (int64_t ow = rw.lo; ow <= rw.hi; ++ow) acc += xrow[ow + off] * grow[ow];
            } else {
                for (int64_t ow = rw.lo; ow <= rw.hi; ++ow) acc += xrow[ow * stride[2] - pad[2] + kw] * grow[ow];
            }
        }
    }
    return acc;
}

template <typename T>
void check_conv_args(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, bool transpose) {
    if (x.rank() != 5)
        throw std::invalid_argument("conv3d: input must be 5-D [N,C,D,H,W], got " + shape_str(x.shape()));
    if (weight.rank() != 5)
        throw std::invalid_argument("conv3d: weight must be 5-D, got " + shape_str(weight.shape()));
    const int64_t wc_in = transpose ? weight.dim(0) : weight.dim(1);
    if (x.dim(1) != wc_in)
        throw std::invalid_argument(std::string(transpose ? "conv_transpose3d" : "conv3d") +
                                    ": input channels do not match weight: input " + shape_str(x.shape()) +
                                    " vs weight " + shape_str(weight.shape()));
    const int64_t c_out = transpose ? weight.dim(1) : weight.dim(0);
    if (bias.defined() && bias.numel() != c_out)
        throw std::invalid_argument("conv3d: bias shape " + shape_str(bias.shape()) + " does not match " +
                                    std::to_string(c_out) + " output channels");
}

}  // namespace detail

/// 3-D cross-correlation of x [N,Cin,D,H,W] with weight [Cout,Cin,kd,kh,kw]
/// plus per-channel bias. Differentiable w.r.t. x, weight and bias.
template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, Dims3 stride = {1, 1, 1},
                 Dims3 pad = {0, 0, 0}) {
    detail::check_conv_args(x, weight, bias, false);
    for (int a = 0; a < 3; ++a)
        if (stride[a] < 1) throw std::invalid_argument("conv3d: stride must be >= 1");
    const int64_t N = x.dim(0), Ci = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
    const int64_t Co = weight.dim(0), Kd = weight.dim(2), Kh = weight.dim(3), Kw = weight.dim(4);
    const int64_t OD = conv_out_extent(D, Kd, stride[0], pad[0]);
    const int64_t OH = conv_out_extent(H, Kh, stride[1], pad[1]);
    const int64_t OW = conv_out_extent(W, Kw, stride[2], pad[2]);

    Tensor<T> out = Tensor<T>::zeros({N, Co, OD, OH, OW});
    const T* xp = x.data();
    const T* wp = weight.data();
    T* op = out.data();
    const int64_t in_slice = D * H * W, out_slice = OD * OH * OW;

    for (int64_t n = 0; n < N; ++n) {
        for (int64_t co = 0; co < Co; ++co) {
            T* oslice = op + (n * Co + co) * out_slice;
            if (bias.defined()) {
                const T bv = bias.data()[co];
                for (int64_t i = 0; i < out_slice; ++i) oslice[i] = bv;
            }
            for (int64_t ci = 0; ci < Ci; ++ci) {
                const T* xslice = xp + (n * Ci + ci) * in_slice;
                const T* wk = wp + (co * Ci + ci) * Kd * Kh * Kw;
                for (int64_t kd = 0; kd < Kd; ++kd)
                    for (int64_t kh = 0; kh < Kh; ++kh)
                        for (int64_t kw = 0; kw < Kw; ++kw)
                            detail::conv3d_accumulate(xslice, oslice, wk[(kd * Kh + kh) * Kw + kw], D, H, W, OD, OH,
                                                      OW, stride, pad, kd, kh, kw);
            }
        }
    }

    if (detail::tracing<T>({&x, &weight, &bias})) {
        detail::mark_output(out);
        auto xn = x.node_ptr();
        auto wn = weight.node_ptr();
        auto bn = bias.defined() ? bias.node_ptr() : nullptr;
        auto on = out.node_ptr();
        TapeScope<T>::active()->record([=]() {
            const T* g = on->grad.data();
            const int64_t KdKhKw = Kd * Kh * Kw;
            if (xn->requires_grad) {
                T* dx = xn->grad.data();
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t ci = 0; ci < Ci; ++ci) {
                        T* dxs = dx + (n * Ci + ci) * in_slice;
                        for (int64_t co = 0; co < Co; ++co) {
                            const T* gs = g + (n * Co + co) * out_slice;
                            const T* wk = wn->values.data() + (co * Ci + ci) * KdKhKw;
                            for (int64_t kd = 0; kd < Kd; ++kd)
                                for (int64_t kh = 0; kh < Kh; ++kh)
                                    for (int64_t kw = 0; kw < Kw; ++kw)
                                        detail::conv3d_scatter(gs, dxs, wk[(kd * Kh + kh) * Kw + kw], D, H, W, OD, OH,
                                                               OW, stride, pad, kd, kh, kw);
                        }
                    }
            }
            if (wn->requires_grad) {
                T* dw = wn->grad.data();
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t co = 0; co < Co; ++co) {
                        const T* gs = g + (n * Co + co) * out_slice;
                        for (int64_t ci = 0; ci < Ci; ++ci) {
                            const T* xs = xn->values.data() + (n * Ci + ci) * in_slice;
                            T* dwk = dw + (co * Ci + ci) * KdKhKw;
                            for (int64_t kd = 0; kd < Kd; ++kd)
                                for (int64_t kh = 0; kh < Kh; ++kh)
                                    for (int64_t kw = 0; kw < Kw; ++kw)
                                        dwk[(kd * Kh + kh) * Kw + kw] += detail::conv3d_correlate(
                                            xs, gs, D, H, W, OD, OH, OW, stride, pad, kd, kh, kw);
                        }
                    }
            }
            if (bn && bn->requires_grad) {
                T* db = bn->grad.data();
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t co = 0; co < Co; ++co) {
                        const T* gs = g + (n * Co + co) * out_slice;
                        T acc = T(0);
                        for (int64_t i = 0; i < out_slice; ++i) acc += gs[i];
                        db[co] += acc;
                    }
            }
        });
    }
    return out;
}

/// Transposed 3-D convolution: the adjoint of conv3d. Weight layout is
/// [Cin,Cout,kd,kh,kw], so conv3d(·;W) and conv_transpose3d(·;W) sharing one
/// weight tensor satisfy <conv(u),v> == <u,convT(v)>.
template <typename T>
Tensor<T> conv_transpose3d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, Dims3 stride = {2, 2, 2},
                           Dims3 pad = {0, 0, 0}, Dims3 out_pad = {0, 0, 0}) {
    detail::check_conv_args(x, weight, bias, true);
    const int64_t N = x.dim(0), Ci = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
    const int64_t Co = weight.dim(1), Kd = weight.dim(2), Kh = weight.dim(3), Kw = weight.dim(4);
    const int64_t OD = conv_transpose_out_extent(D, Kd, stride[0], pad[0], out_pad[0]);
    const int64_t OH = conv_transpose_out_extent(H, Kh, stride[1], pad[1], out_pad[1]);
    const int64_t OW = conv_transpose_out_extent(W, Kw, stride[2], pad[2], out_pad[2]);

    Tensor<T> out = Tensor<T>::zeros({N, Co, OD, OH, OW});
    const int64_t in_slice = D * H * W, out_slice = OD * OH * OW;
    const T* xp = x.data();
    const T* wp = weight.data();
    T* op = out.data();

    for (int64_t n = 0; n < N; ++n) {
        for (int64_t co = 0; co < Co; ++co) {
            T* oslice = op + (n * Co + co) * out_slice;
            if (bias.defined()) {
                const T bv = bias.data()[co];
                for (int64_t i = 0; i < out_slice; ++i) oslice[i] = bv;
            }
            for (int64_t ci = 0; ci < Ci; ++ci) {
                const T* xslice = xp + (n * Ci + ci) * in_slice;
                const T* wk = wp + (ci * Co + co) * Kd * Kh * Kw;
                // roles swapped relative to conv3d: scatter input into output
                for (int64_t kd = 0; kd < Kd; ++kd)
                    for (int64_t kh = 0; kh < Kh; ++kh)
                        for (int64_t kw = 0; kw < Kw; ++kw)
                            detail::conv3d_scatter(xslice, oslice, wk[(kd * Kh + kh) * Kw + kw], OD, OH, OW, D, H, W,
                                                   stride, pad, kd, kh, kw);
            }
        }
    }

    if (detail::tracing<T>({&x, &weight, &bias})) {
        detail::mark_output(out);
        auto xn = x.node_ptr();
        auto wn = weight.node_ptr();
        auto bn = bias.defined() ? bias.node_ptr() : nullptr;
        auto on = out.node_ptr();
        TapeScope<T>::active()->record([=]() {
            const T* g = on->grad.data();
            const int64_t KdKhKw = Kd * Kh * Kw;
            if (xn->requires_grad) {
                T* dx = xn->grad.data();
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t ci = 0; ci < Ci; ++ci) {
                        T* dxs = dx + (n * Ci + ci) * in_slice;
                        for (int64_t co = 0; co < Co; ++co) {
                            const T* gs = g + (n * Co + co) * out_slice;
                            const T* wk = wn->values.data() + (ci * Co + co) * KdKhKw;
                            for (int64_t kd = 0; kd < Kd; ++kd)
                                for (int64_t kh = 0; kh < Kh; ++kh)
                                    for (int64_t kw = 0; kw < Kw; ++kw)
                                        detail::conv3d_accumulate(gs, dxs, wk[(kd * Kh + kh) * Kw + kw], OD, OH, OW, D,
                                                                  H, W, stride, pad, kd, kh, kw);
                        }
                    }
            }
            if (wn->requires_grad) {
                T* dw = wn->grad.data();
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t ci = 0; ci < Ci; ++ci) {
                        const T* xs = xn->values.data() + (n * Ci + ci) * in_slice;
                        for (int64_t co = 0; co < Co; ++co) {
                            const T* gs = g + (n * Co + co) * out_slice;
                            T* dwk = dw + (ci * Co + co) * KdKhKw;
                            for (int64_t kd = 0; kd < Kd; ++kd)
                                for (int64_t kh = 0; kh < Kh; ++kh)
                                    for (int64_t kw = 0; kw < Kw; ++kw)
                                        dwk[(kd * Kh + kh) * Kw + kw] += detail::conv3d_correlate(
                                            gs, xs, OD, OH, OW, D, H, W, stride, pad, kd, kh, kw);
                        }
                    }
            }
            if (bn && bn->requires_grad) {
                T* db = bn->grad.data();
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t co = 0; co < Co; ++co) {
                        const T* gs = g + (n * Co + co) * out_slice;
                        T acc = T(0);
                        for (int64_t i = 0; i < out_slice; ++i) acc += gs[i];
                        db[co] += acc;
                    }
            }
        });
    }
    return out;
}

}  // namespace sparseflow

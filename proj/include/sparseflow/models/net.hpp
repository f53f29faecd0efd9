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

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sparseflow/tensor/ops.hpp"

namespace sparseflow {

enum class DownsampleKind { none, maxpool, strided };
enum class Conditioning { off, input, latent };
enum class ModelKind { lvadnet3d, unet3d };

inline const char* to_string(ModelKind k) { return k == ModelKind::lvadnet3d ? "lvadnet3d" : "unet3d"; }
inline const char* to_string(Conditioning c) {
    switch (c) {
        case Conditioning::off: return "off";
        case Conditioning::input: return "input";
        default: return "latent";
    }
}
inline ModelKind model_kind_from_name(const std::string& s) {
    if (s == "lvadnet3d") return ModelKind::lvadnet3d;
    if (s == "unet3d") return ModelKind::unet3d;
    throw std::invalid_argument("unknown model '" + s + "' (expected lvadnet3d or unet3d)");
}
inline Conditioning conditioning_from_name(const std::string& s) {
    if (s == "off") return Conditioning::off;
    if (s == "input") return Conditioning::input;
    if (s == "latent") return Conditioning::latent;
    throw std::invalid_argument("unknown conditioning '" + s + "' (expected off, input or latent)");
}

struct ModelConfig {
    ModelKind kind = ModelKind::lvadnet3d;
    int depth = 5;
    int base_channels = 16;  // already divided by scale_divisor
    int in_channels = 2;
    std::vector<DownsampleKind> downsample_schedule;
    bool skips = true;
    Conditioning conditioning = Conditioning::latent;
    int scale_divisor = 1;
    double norm_epsilon = 1e-5;

    int num_downsamples() const {
        int n = 0;
        for (auto d : downsample_schedule) n += d != DownsampleKind::none;
        return n;
    }

    void validate() const {
        if (depth < 2 || base_channels < 1 || in_channels < 1)
            throw std::invalid_argument("ModelConfig: depth, base_channels and in_channels must be positive");
        if (static_cast<int>(downsample_schedule.size()) != depth)
            throw std::invalid_argument("ModelConfig: downsample schedule must name one entry per layer");
        if (downsample_schedule.back() != DownsampleKind::none)
            throw std::invalid_argument("ModelConfig: the terminal encoder layer does not downsample");
    }

    /// Canonical string, hashed into checkpoint fingerprints.
    std::string fingerprint_text() const {
        std::ostringstream os;
        os << "kind=" << to_string(kind) << ";depth=" << depth << ";base=" << base_channels << ";in=" << in_channels
           << ";sched=";
        for (auto d : downsample_schedule)
            os << (d == DownsampleKind::none ? 'N' : d == DownsampleKind::maxpool ? 'M' : 'S');
        os << ";skips=" << (skips ? 1 : 0) << ";cond=" << to_string(conditioning) << ";div=" << scale_divisor;
        return os.str();
    }
};

/// Paper-scale LVADNet3D: five layers, hybrid downsampling (max pooling in
/// layers 1-2, strided convolutions after layers 3-4), latent refinement and
/// inlet-velocity conditioning. scale_divisor shrinks every channel count for
/// desk-scale runs while preserving the topology.
inline ModelConfig lvadnet3d_config(int scale_divisor = 1, int in_channels = 2) {
    ModelConfig cfg;
    cfg.kind = ModelKind::lvadnet3d;
    cfg.depth = 5;
    cfg.base_channels = 16 / scale_divisor;
    cfg.in_channels = in_channels;
    cfg.downsample_schedule = {DownsampleKind::maxpool, DownsampleKind::maxpool, DownsampleKind::strided,
                               DownsampleKind::strided, DownsampleKind::none};
    cfg.scale_divisor = scale_divisor;
    if (cfg.base_channels < 1) throw std::invalid_argument("lvadnet3d_config: scale divisor too large");
    return cfg;
}

/// Four-level UNet3D baseline: max pooling throughout, channel doubling per
/// level, bottleneck conditioning.
inline ModelConfig unet3d_config(int scale_divisor = 1, int in_channels = 2) {
    ModelConfig cfg;
    cfg.kind = ModelKind::unet3d;
    cfg.depth = 4;
    cfg.base_channels = 16 / scale_divisor;
    cfg.in_channels = in_channels;
    cfg.downsample_schedule = {DownsampleKind::maxpool, DownsampleKind::maxpool, DownsampleKind::maxpool,
                               DownsampleKind::none};
    cfg.scale_divisor = scale_divisor;
    if (cfg.base_channels < 1) throw std::invalid_argument("unet3d_config: scale divisor too large");
    return cfg;
}

/// Convolution + instance norm + PReLU. norm/act are optional so the same
/// struct covers the plain fusion and output convolutions.
template <typename T>
struct ConvBlock {
    Tensor<T> w, b, slope;  // undefined slope = no activation
    int64_t stride = 1, pad = 1;
    bool norm = true;
    T eps = T(1e-5);

    Tensor<T> operator()(const Tensor<T>& x) const {
        Tensor<T> y = conv3d(x, w, b, {stride, stride, stride}, {pad, pad, pad});
        if (norm) y = instance_norm3d(y, eps);
        if (slope.defined()) y = prelu(y, slope);
        return y;
    }
};

/// Transposed convolution (k=2, s=2) + instance norm + PReLU, the decoder's
/// upsampling stage.
template <typename T>
struct UpBlock {
    Tensor<T> w, b, slope;
    T eps = T(1e-5);

    Tensor<T> operator()(const Tensor<T>& x) const {
        Tensor<T> y = conv_transpose3d(x, w, b, {2, 2, 2}, {0, 0, 0});
        y = instance_norm3d(y, eps);
        return prelu(y, slope);
    }
};

/// Broadcast the scalar inlet velocity to the latent shape, concatenate along
/// channels (doubling them), and fuse back down with a 1x1x1 convolution.
template <typename T>
Tensor<T> condition_latent(const Tensor<T>& latent, const Tensor<T>& v_in, const ConvBlock<T>& fuse) {
    Tensor<T> b = broadcast_scalar(v_in, latent.shape());
    return fuse(concat_channels<T>({latent, b}));
}

template <typename T>
class ReconNet {
public:
    struct EncoderLevel {
        ConvBlock<T> b1, b2;
        DownsampleKind down = DownsampleKind::none;
        std::optional<ConvBlock<T>> down_conv;
    };
    struct DecoderLevel {
        UpBlock<T> up;
        ConvBlock<T> b1, b2;
    };

    ModelConfig config;
    std::vector<EncoderLevel> encoder;
    std::vector<ConvBlock<T>> latent_refine;
    std::optional<ConvBlock<T>> fuse;
    std::vector<DecoderLevel> decoder;  // deepest level first
    ConvBlock<T> head;

    /// x: [N,C,D,H,W] or [C,D,H,W]; v_in: one value, or one per batch sample.
    /// latent_shape, when given, receives the shape of the conditioned latent.
    Tensor<T> forward(Tensor<T> x, Tensor<T> v_in, Shape* latent_shape = nullptr) const {
        if (x.rank() == 4) x = x.reshaped({1, x.dim(0), x.dim(1), x.dim(2), x.dim(3)});
        if (x.rank() != 5)
            throw std::invalid_argument("forward: input must be [N,C,D,H,W], got " + shape_str(x.shape()));
        if (x.dim(1) != config.in_channels)
            throw std::invalid_argument("forward: expected " + std::to_string(config.in_channels) +
                                        " input channels, got " + shape_str(x.shape()));
        const int64_t factor = int64_t(1) << config.num_downsamples();
        if (x.dim(2) % factor || x.dim(3) % factor || x.dim(4) % factor)
            throw std::invalid_argument("forward: spatial extents " + shape_str(x.shape()) +
                                        " must be divisible by " + std::to_string(factor));

        if (config.conditioning == Conditioning::input)
            x = concat_channels<T>({x, broadcast_scalar(v_in, {x.dim(0), 1, x.dim(2), x.dim(3), x.dim(4)})});

        std::vector<Tensor<T>> skips;
        for (const EncoderLevel& level : encoder) {
            x = level.b1(x);
            x = level.b2(x);
            if (level.down == DownsampleKind::maxpool) {
                skips.push_back(x);
                x = maxpool3d(x);
            } else if (level.down == DownsampleKind::strided) {
                skips.push_back(x);
                x = (*level.down_conv)(x);
            }
        }
        for (const ConvBlock<T>& blk : latent_refine) x = blk(x);
        if (config.conditioning == Conditioning::latent) x = condition_latent(x, v_in, *fuse);
        if (latent_shape) *latent_shape = x.shape();

        for (size_t i = 0; i < decoder.size(); ++i) {
            const DecoderLevel& level = decoder[i];
            x = level.up(x);
            if (config.skips) x = concat_channels<T>({x, skips[skips.size() - 1 - i]});
            x = level.b1(x);
            x = level.b2(x);
        }
        return head(x);
    }

    std::vector<std::pair<std::string, Tensor<T>>> named_parameters() const {
        std::vector<std::pair<std::string, Tensor<T>>> out;
        auto add_block = [&](const std::string& prefix, const ConvBlock<T>& blk) {
            out.emplace_back(prefix + ".w", blk.w);
            out.emplace_back(prefix + ".b", blk.b);
            if (blk.slope.defined()) out.emplace_back(prefix + ".a", blk.slope);
        };
        for (size_t l = 0; l < encoder.size(); ++l) {
            const std::string p = "enc" + std::to_string(l + 1);
            add_block(p + ".b1", encoder[l].b1);
            add_block(p + ".b2", encoder[l].b2);
            if (encoder[l].down_conv) add_block(p + ".down", *encoder[l].down_conv);
        }
        for (size_t i = 0; i < latent_refine.size(); ++i)
            add_block("lat.refine" + std::to_string(i + 1), latent_refine[i]);
        if (fuse) add_block("lat.fuse", *fuse);
        for (size_t l = 0; l < decoder.size(); ++l) {
            const std::string p = "dec" + std::to_string(l + 1);
            out.emplace_back(p + ".up.w", decoder[l].up.w);
            out.emplace_back(p + ".up.b", decoder[l].up.b);
            out.emplace_back(p + ".up.a", decoder[l].up.slope);
            add_block(p + ".b1", decoder[l].b1);
            add_block(p + ".b2", decoder[l].b2);
        }
        add_block("head", head);
        return out;
    }

    int64_t parameter_count() const {
        int64_t n = 0;
        for (const auto& [name, t] : named_parameters()) n += t.numel();
        return n;
    }

    void set_requires_grad(bool on) {
        for (auto& [name, t] : named_parameters()) t.set_requires_grad(on);
    }

    void zero_grad() {
        for (auto& [name, t] : named_parameters()) t.zero_grad();
    }
};

namespace detail {

// fan-in-scaled uniform init, gain matched to the PReLU slope 0.25
template <typename T>
Tensor<T> init_conv_weight(Shape shape, int64_t fan_in, Rng& rng) {
    const double gain = std::sqrt(2.0 / (1.0 + 0.25 * 0.25));
    const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
    Tensor<T> w = Tensor<T>::zeros(std::move(shape));
    for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    return w;
}

template <typename T>
ConvBlock<T> make_block(int64_t cin, int64_t cout, int64_t k, int64_t stride, int64_t pad, bool norm, bool act,
                        double eps, Rng& rng) {
    ConvBlock<T> blk;
    blk.w = init_conv_weight<T>({cout, cin, k, k, k}, cin * k * k * k, rng);
    blk.b = Tensor<T>::zeros({cout});
    if (act) blk.slope = Tensor<T>::full({cout}, T(0.25));
    blk.stride = stride;
    blk.pad = pad;
    blk.norm = norm;
    blk.eps = static_cast<T>(eps);
    return blk;
}

template <typename T>
UpBlock<T> make_up(int64_t cin, int64_t cout, double eps, Rng& rng) {
    UpBlock<T> up;
    up.w = init_conv_weight<T>({cin, cout, 2, 2, 2}, cin * 8, rng);
    up.b = Tensor<T>::zeros({cout});
    up.slope = Tensor<T>::full({cout}, T(0.25));
    up.eps = static_cast<T>(eps);
    return up;
}

}  // namespace detail

/// Instantiates either architecture from its config. Encoder channel rule:
/// LVADNet3D maintains then doubles within a layer (2->16->16, 16->16->32,
/// ...), UNet3D doubles in the first block per level. Decoders mirror with
/// transpose-conv upsampling, optional skip concatenation, a 2C->C block and
/// a C->C block, then a plain convolution to one channel.
template <typename T>
ReconNet<T> build_model(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    ReconNet<T> net;
    net.config = cfg;
    Rng rng(substream(seed, "model.init"));
    const double eps = cfg.norm_epsilon;

    const int64_t data_in = cfg.in_channels + (cfg.conditioning == Conditioning::input ? 1 : 0);
    std::vector<int64_t> skip_channels;
    int64_t c = data_in;
    for (int l = 0; l < cfg.depth; ++l) {
        typename ReconNet<T>::EncoderLevel level;
        int64_t mid, out;
        if (l == 0) {
            mid = cfg.base_channels;
            out = cfg.base_channels;
        } else if (cfg.kind == ModelKind::lvadnet3d) {
            mid = c;
            out = 2 * c;
        } else {
            mid = 2 * c;
            out = 2 * c;
        }
        level.b1 = detail::make_block<T>(c, mid, 3, 1, 1, true, true, eps, rng);
        level.b2 = detail::make_block<T>(mid, out, 3, 1, 1, true, true, eps, rng);
        level.down = cfg.downsample_schedule[static_cast<size_t>(l)];
        if (level.down == DownsampleKind::strided)
            level.down_conv = detail::make_block<T>(out, out, 3, 2, 1, true, true, eps, rng);
        if (level.down != DownsampleKind::none) skip_channels.push_back(out);
        net.encoder.push_back(std::move(level));
        c = out;
    }

    if (cfg.kind == ModelKind::lvadnet3d) {
        net.latent_refine.push_back(detail::make_block<T>(c, c, 3, 1, 1, true, true, eps, rng));
        net.latent_refine.push_back(detail::make_block<T>(c, c, 3, 1, 1, true, true, eps, rng));
    }
    if (cfg.conditioning == Conditioning::latent) {
        // LVADNet3D fuses with a plain 1x1x1 convolution; the UNet3D baseline
        // passes the concatenation through a full convolutional block.
        const bool block_style = cfg.kind == ModelKind::unet3d;
        net.fuse = detail::make_block<T>(2 * c, c, 1, 1, 0, block_style, block_style, eps, rng);
    }

    for (auto it = skip_channels.rbegin(); it != skip_channels.rend(); ++it) {
        const int64_t s = *it;
        typename ReconNet<T>::DecoderLevel level;
        level.up = detail::make_up<T>(c, s, eps, rng);
        level.b1 = detail::make_block<T>(cfg.skips ? 2 * s : s, s, 3, 1, 1, true, true, eps, rng);
        level.b2 = detail::make_block<T>(s, s, 3, 1, 1, true, true, eps, rng);
        net.decoder.push_back(std::move(level));
        c = s;
    }
    net.head = detail::make_block<T>(c, 1, 3, 1, 1, false, false, eps, rng);

    net.set_requires_grad(true);
    return net;
}

template <typename T>
ReconNet<T> build_lvadnet3d(const ModelConfig& cfg, uint64_t seed) {
    if (cfg.kind != ModelKind::lvadnet3d) throw std::invalid_argument("build_lvadnet3d: config is not lvadnet3d");
    return build_model<T>(cfg, seed);
}

template <typename T>
ReconNet<T> build_unet3d(const ModelConfig& cfg, uint64_t seed) {
    if (cfg.kind != ModelKind::unet3d) throw std::invalid_argument("build_unet3d: config is not unet3d");
    return build_model<T>(cfg, seed);
}

}  // namespace sparseflow

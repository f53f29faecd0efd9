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

#include "sparseflow/models/net.hpp"
#include "sparseflow/tensor/gradcheck.hpp"
#include "test_helpers.hpp"

using namespace sparseflow;
using sftest::random_tensor;

TEST_CASE("desk-scale LVADNet3D keeps the stated shape ladder", "[models][shape]") {
    auto cfg = lvadnet3d_config(/*scale_divisor=*/4);
    auto net = build_lvadnet3d<float>(cfg, 1);
    auto x = random_tensor<float>({1, 2, 32, 32, 32}, 2, -0.5, 0.5);
    auto y = net.forward(x, Tensor<float>::scalar(0.6f));
    CHECK(y.shape() == Shape{1, 1, 32, 32, 32});

    // encoder terminal channels = base * 2^(depth-1), spatial reduced 16x
    int64_t c = cfg.base_channels;
    for (int l = 1; l < cfg.depth; ++l) c *= 2;
    CHECK(c == 64);
    CHECK(net.encoder.back().b2.w.dim(0) == 64);
}

TEST_CASE("forward validates channels and divisibility", "[models][errors]") {
    auto net = build_lvadnet3d<float>(lvadnet3d_config(4), 1);
    CHECK_THROWS_AS(net.forward(random_tensor<float>({1, 3, 32, 32, 32}, 3), Tensor<float>::scalar(0.1f)),
                    std::invalid_argument);
    CHECK_THROWS_AS(net.forward(random_tensor<float>({1, 2, 24, 24, 24}, 3), Tensor<float>::scalar(0.1f)),
                    std::invalid_argument);
}

TEST_CASE("UNet3D bottleneck sits three poolings down", "[models][shape]") {
    auto cfg = unet3d_config(4);
    auto net = build_unet3d<float>(cfg, 5);
    // 32^3 input -> bottleneck 4^3 (three halvings)
    auto x = random_tensor<float>({1, 2, 32, 32, 32}, 6, -0.5, 0.5);
    auto y = net.forward(x, Tensor<float>::scalar(0.2f));
    CHECK(y.shape() == Shape{1, 1, 32, 32, 32});
    CHECK(net.config.num_downsamples() == 3);
    CHECK(net.encoder.back().b2.w.dim(0) == 32);  // 4 * 2^3
}

TEST_CASE("parameter counts follow conv arithmetic", "[models][params]") {
    SECTION("single 1x1x1 conv block, 256->256 with bias") {
        Rng rng(1);
        auto blk = detail::make_block<float>(256, 256, 1, 1, 0, false, false, 1e-5, rng);
        CHECK(blk.w.numel() + blk.b.numel() == 256 * 256 + 256);
    }
    SECTION("doubling base channels roughly quadruples the count") {
        auto small = build_lvadnet3d<float>(lvadnet3d_config(8), 1);
        auto big = build_lvadnet3d<float>(lvadnet3d_config(4), 1);
        const double ratio = static_cast<double>(big.parameter_count()) / static_cast<double>(small.parameter_count());
        CHECK(ratio > 3.5);
        CHECK(ratio < 4.5);
    }
    SECTION("paper-scale LVADNet3D outweighs UNet3D") {
        auto lvad = build_lvadnet3d<float>(lvadnet3d_config(1), 1);
        auto unet = build_unet3d<float>(unet3d_config(1), 1);
        CHECK(lvad.parameter_count() > unet.parameter_count());
    }
}

TEST_CASE("condition_latent concatenates, fuses, and passes gradient to v_in", "[models][conditioning]") {
    SECTION("paper-scale latent shapes") {
        Rng rng(3);
        auto fuse = detail::make_block<double>(512, 256, 1, 1, 0, false, false, 1e-5, rng);
        auto y = random_tensor<double>({1, 256, 8, 8, 8}, 4, -0.1, 0.1);
        auto v = Tensor<double>::scalar(0.3);
        auto fused = condition_latent(y, v, fuse);
        CHECK(fused.shape() == Shape{1, 256, 8, 8, 8});
    }
    SECTION("zero v_in with zero bias equals fusing (y ⊕ zeros)") {
        Rng rng(5);
        auto fuse = detail::make_block<double>(8, 4, 1, 1, 0, false, false, 1e-5, rng);
        auto y = random_tensor<double>({1, 4, 2, 2, 2}, 6);
        auto fused = condition_latent(y, Tensor<double>::scalar(0.0), fuse);
        auto manual = fuse(concat_channels<double>({y, Tensor<double>::zeros({1, 4, 2, 2, 2})}));
        for (int64_t i = 0; i < fused.numel(); ++i) CHECK(fused.data()[i] == manual.data()[i]);
    }
    SECTION("finite differences see a nonzero v_in gradient") {
        auto net = build_lvadnet3d<double>(lvadnet3d_config(8), 7);
        auto x = random_tensor<double>({1, 2, 32, 32, 32}, 8, -0.5, 0.5);
        double grad = 0.0;
        {
            auto v = Tensor<double>::scalar(0.4);
            v.set_requires_grad(true);
            Tape<double> tape;
            TapeScope<double> scope(tape);
            auto loss = sum(net.forward(x, v));
            tape.backward(loss);
            grad = v.grad()[0];
        }
        CHECK(grad != 0.0);
        // cross-check against central differences
        auto eval = [&](double vv) { return sum(net.forward(x, Tensor<double>::scalar(vv))).item(); };
        const double eps = 1e-6;
        const double cd = (eval(0.4 + eps) - eval(0.4 - eps)) / (2 * eps);
        CHECK(grad == Catch::Approx(cd).epsilon(1e-3));
    }
}

TEST_CASE("conditioning toggles change exactly the advertised sensitivity", "[models][conditioning]") {
    auto cfg = lvadnet3d_config(8);
    SECTION("latent conditioning reacts to v_in") {
        auto net = build_model<float>(cfg, 11);
        auto x = random_tensor<float>({1, 2, 32, 32, 32}, 12, -0.5, 0.5);
        auto y1 = net.forward(x, Tensor<float>::scalar(0.2f));
        auto y2 = net.forward(x, Tensor<float>::scalar(1.0f));
        float max_diff = 0.0f;
        for (int64_t i = 0; i < y1.numel(); ++i) max_diff = std::max(max_diff, std::abs(y1.data()[i] - y2.data()[i]));
        CHECK(max_diff > 0.0f);
    }
    SECTION("conditioning off ignores v_in bit-exactly and has zero gradient") {
        cfg.conditioning = Conditioning::off;
        auto net = build_model<float>(cfg, 11);
        auto x = random_tensor<float>({1, 2, 32, 32, 32}, 12, -0.5, 0.5);
        auto y1 = net.forward(x, Tensor<float>::scalar(0.2f));
        auto y2 = net.forward(x, Tensor<float>::scalar(1.0f));
        CHECK(y1.values() == y2.values());

        auto netd = build_model<double>(cfg, 11);
        auto xd = random_tensor<double>({1, 2, 32, 32, 32}, 12, -0.5, 0.5);
        auto v = Tensor<double>::scalar(0.4);
        v.set_requires_grad(true);
        Tape<double> tape;
        TapeScope<double> scope(tape);
        auto loss = sum(netd.forward(xd, v));
        tape.backward(loss);
        CHECK(v.grad()[0] == 0.0);
    }
    SECTION("input conditioning consumes a broadcast extra channel") {
        cfg.conditioning = Conditioning::input;
        auto net = build_model<float>(cfg, 11);
        CHECK(net.encoder[0].b1.w.dim(1) == 3);
        auto x = random_tensor<float>({1, 2, 32, 32, 32}, 12, -0.5, 0.5);
        auto y = net.forward(x, Tensor<float>::scalar(0.7f));
        CHECK(y.shape() == Shape{1, 1, 32, 32, 32});
    }
}

TEST_CASE("skip toggle preserves output shapes", "[models][skips]") {
    auto on_cfg = lvadnet3d_config(8);
    auto off_cfg = on_cfg;
    off_cfg.skips = false;
    auto on = build_model<float>(on_cfg, 21);
    auto off = build_model<float>(off_cfg, 21);
    auto x = random_tensor<float>({1, 2, 32, 32, 32}, 22, -0.5, 0.5);
    auto yo = on.forward(x, Tensor<float>::scalar(0.5f));
    auto yf = off.forward(x, Tensor<float>::scalar(0.5f));
    CHECK(yo.shape() == yf.shape());
    CHECK(off.parameter_count() < on.parameter_count());
}

TEST_CASE("initialization and forward are deterministic under seed", "[models][determinism]") {
    auto cfg = lvadnet3d_config(8);
    auto a = build_model<float>(cfg, 33);
    auto b = build_model<float>(cfg, 33);
    auto pa = a.named_parameters();
    auto pb = b.named_parameters();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i].first == pb[i].first);
        REQUIRE(pa[i].second.values() == pb[i].second.values());
    }
    auto x = random_tensor<float>({1, 2, 32, 32, 32}, 34, -0.5, 0.5);
    auto ya = a.forward(x, Tensor<float>::scalar(0.3f));
    auto yb = b.forward(x, Tensor<float>::scalar(0.3f));
    CHECK(ya.values() == yb.values());

    auto c = build_model<float>(cfg, 34);
    CHECK(c.named_parameters()[0].second.values() != pa[0].second.values());
}

TEST_CASE("batched forward with per-sample v_in matches single-sample runs", "[models][batch]") {
    auto net = build_model<float>(lvadnet3d_config(8), 41);
    auto x0 = random_tensor<float>({1, 2, 32, 32, 32}, 42, -0.5, 0.5);
    auto x1 = random_tensor<float>({1, 2, 32, 32, 32}, 43, -0.5, 0.5);
    std::vector<float> stacked(x0.values());
    stacked.insert(stacked.end(), x1.values().begin(), x1.values().end());
    auto xb = Tensor<float>::from({2, 2, 32, 32, 32}, stacked);
    auto vb = Tensor<float>::from({2}, {0.2f, 0.9f});
    auto yb = net.forward(xb, vb);

    auto y0 = net.forward(x0, Tensor<float>::scalar(0.2f));
    auto y1 = net.forward(x1, Tensor<float>::scalar(0.9f));
    const int64_t n = y0.numel();
    double max_diff = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        max_diff = std::max(max_diff, std::abs(static_cast<double>(yb.data()[i]) - y0.data()[i]));
        max_diff = std::max(max_diff, std::abs(static_cast<double>(yb.data()[n + i]) - y1.data()[i]));
    }
    // instance norm statistics are per-sample, so batching is exact up to
    // float summation order
    CHECK(max_diff < 1e-5);
}

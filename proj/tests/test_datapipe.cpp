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
#include <fstream>
#include <set>

#include "sparseflow/data/manifest.hpp"
#include "sparseflow/data/pipeline.hpp"
#include "sparseflow/data/volume_io.hpp"
#include "test_helpers.hpp"

using namespace sparseflow;

namespace {

VolumeField random_volume(int64_t n, uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
    Rng rng(seed);
    VolumeField f(n, n, n);
    for (auto& v : f.values) v = static_cast<float>(rng.uniform(lo, hi));
    return f;
}

VolumeField ball_mask(int64_t n, double radius) {
    VolumeField m(n, n, n);
    const double c = (n - 1) / 2.0;
    for (int64_t d = 0; d < n; ++d)
        for (int64_t h = 0; h < n; ++h)
            for (int64_t w = 0; w < n; ++w)
                if ((d - c) * (d - c) + (h - c) * (h - c) + (w - c) * (w - c) <= radius * radius)
                    m.at(d, h, w) = 1.0f;
    return m;
}

}  // namespace

TEST_CASE("volume files round trip bit-exactly", "[datapipe][io]") {
    sftest::TempDir tmp("volume_io");
    auto f = random_volume(12, 99);
    const uint64_t checksum = write_volume(tmp.path / "f.sfv", f);
    uint64_t read_back = 0;
    auto g = read_volume(tmp.path / "f.sfv", &read_back);
    CHECK(g == f);
    CHECK(read_back == checksum);
}

TEST_CASE("volume reader rejects corruption", "[datapipe][io][errors]") {
    sftest::TempDir tmp("volume_bad");
    auto f = random_volume(6, 5);
    const auto path = tmp.path / "f.sfv";
    write_volume(path, f);

    SECTION("truncated file") {
        auto size = std::filesystem::file_size(path);
        std::filesystem::resize_file(path, size - 9);
        CHECK_THROWS_AS(read_volume(path), DataError);
    }
    SECTION("flipped payload byte breaks the checksum") {
        std::fstream io(path, std::ios::in | std::ios::out | std::ios::binary);
        io.seekp(40);
        char c;
        io.seekg(40);
        io.get(c);
        io.seekp(40);
        io.put(static_cast<char>(c ^ 0x5a));
        io.close();
        CHECK_THROWS_AS(read_volume(path), DataError);
    }
    SECTION("declared shape disagreeing with payload length") {
        std::fstream io(path, std::ios::in | std::ios::out | std::ios::binary);
        io.seekp(12);  // D extent
        const uint32_t wrong = 7;
        io.write(reinterpret_cast<const char*>(&wrong), 4);
        io.close();
        CHECK_THROWS_AS(read_volume(path), DataError);
    }
    SECTION("bad magic") {
        std::fstream io(path, std::ios::in | std::ios::out | std::ios::binary);
        io.seekp(0);
        io.write("NOPE", 4);
        io.close();
        CHECK_THROWS_AS(read_volume(path), DataError);
    }
}

TEST_CASE("make_sparse_mask draws exactly floor(fraction * N_in) in-mask voxels", "[datapipe][mask]") {
    auto mask = ball_mask(20, 8.0);
    int64_t n_in = 0;
    for (float v : mask.values) n_in += v != 0.0f;
    REQUIRE(n_in > 1000);

    auto sparse = make_sparse_mask(mask, 0.05, 1234);
    int64_t kept = 0;
    for (int64_t i = 0; i < sparse.numel(); ++i)
        if (sparse.values[static_cast<size_t>(i)] != 0.0f) {
            ++kept;
            CHECK(mask.values[static_cast<size_t>(i)] == 1.0f);  // subset of the ventricle
        }
    CHECK(kept == n_in / 20);

    SECTION("deterministic under seed, distinct across seeds") {
        auto again = make_sparse_mask(mask, 0.05, 1234);
        CHECK(again == sparse);
        int differing = 0;
        for (uint64_t seed : {77ull, 78ull, 79ull}) {
            auto other = make_sparse_mask(mask, 0.05, seed);
            differing += !(other == sparse);
        }
        CHECK(differing == 3);
    }
    SECTION("degenerate floor rejected") {
        VolumeField tiny(4, 4, 4);
        tiny.at(1, 1, 1) = 1.0f;
        tiny.at(1, 1, 2) = 1.0f;
        CHECK_THROWS_AS(make_sparse_mask(tiny, 0.05, 1), std::invalid_argument);
        CHECK_THROWS_AS(make_sparse_mask(mask, 0.0, 1), std::invalid_argument);
        CHECK_THROWS_AS(make_sparse_mask(mask, 1.0, 1), std::invalid_argument);
    }
}

TEST_CASE("normalization hits peak 1 and inverts cleanly", "[datapipe][normalize]") {
    FlowSnapshot snap;
    snap.vx = random_volume(8, 1, -0.3f, 0.3f);
    snap.vy = random_volume(8, 2, -0.3f, 0.3f);
    snap.vz = random_volume(8, 3, -0.5f, 0.5f);
    snap.mask = ball_mask(8, 3.5);
    snap.v_in = 0.4;
    snap.geometry_id = "g";

    const double scale = velocity_scale_of({&snap});
    REQUIRE(scale > 0.0);
    NormalizationRecord norm{scale, 0.5};
    auto rdf = compute_rdf(snap.mask, 1.0);
    auto sparse = make_sparse_mask(snap.mask, 0.1, 9);
    Sample s = normalize_snapshot(snap, rdf, sparse, norm, "r0");

    double peak = 0.0;
    for (size_t i = 0; i < s.vx.values.size(); ++i) {
        const double m2 = static_cast<double>(s.vx.values[i]) * s.vx.values[i] +
                          static_cast<double>(s.vy.values[i]) * s.vy.values[i] +
                          static_cast<double>(s.vz.values[i]) * s.vz.values[i];
        peak = std::max(peak, std::sqrt(m2));
    }
    CHECK(peak == Catch::Approx(1.0).margin(1e-6));
    CHECK(s.v_in == Catch::Approx(0.8));

    auto back = denormalize_component(s.vz, norm);
    for (size_t i = 0; i < back.values.size(); ++i)
        CHECK(back.values[i] == Catch::Approx(snap.vz.values[i]).margin(1e-6 * scale));

    SECTION("all-zero training set rejected") {
        NormalizationRecord zero{0.0, 0.5};
        CHECK_THROWS_AS(normalize_snapshot(snap, rdf, sparse, zero, "r"), std::invalid_argument);
    }
}

TEST_CASE("assemble_input builds masked + RDF channels against the full target", "[datapipe][assemble]") {
    FlowSnapshot snap;
    snap.vx = random_volume(10, 11, -1.0f, 1.0f);
    snap.vy = random_volume(10, 12, -1.0f, 1.0f);
    snap.vz = random_volume(10, 13, -1.0f, 1.0f);
    snap.mask = ball_mask(10, 4.0);
    snap.v_in = 0.3;
    NormalizationRecord norm{1.0, 0.5};
    auto rdf = compute_rdf(snap.mask, 1.0);
    auto sparse = make_sparse_mask(snap.mask, 0.05, 4);
    Sample s = normalize_snapshot(snap, rdf, sparse, norm, "r0");

    auto [input, target] = assemble_input<double>(s, Component::y);
    REQUIRE(input.shape() == Shape{2, 10, 10, 10});
    REQUIRE(target.shape() == Shape{1, 10, 10, 10});

    int64_t n_in = 0;
    for (float v : snap.mask.values) n_in += v != 0.0f;
    int64_t nonzero = 0;
    for (int64_t i = 0; i < 1000; ++i) nonzero += input.data()[i] != 0.0;
    CHECK(nonzero <= n_in / 20);  // at most the sparse voxel count

    for (int64_t i = 0; i < 1000; ++i) {
        CHECK(input.data()[1000 + i] == Catch::Approx(static_cast<double>(rdf.values[static_cast<size_t>(i)])));
        CHECK(target.data()[i] == Catch::Approx(static_cast<double>(s.vy.values[static_cast<size_t>(i)])));
        if (sparse.values[static_cast<size_t>(i)] != 0.0f)
            CHECK(input.data()[i] == target.data()[i]);
        else
            CHECK(input.data()[i] == 0.0);
    }

    SECTION("zero-velocity snapshot gives all-zero sparse channel and target") {
        FlowSnapshot quiet = snap;
        for (auto* f : {&quiet.vx, &quiet.vy, &quiet.vz})
            std::fill(f->values.begin(), f->values.end(), 0.0f);
        Sample qs = normalize_snapshot(quiet, rdf, sparse, norm, "rq");
        auto [qin, qtar] = assemble_input<double>(qs, Component::x);
        for (int64_t i = 0; i < 1000; ++i) {
            CHECK(qin.data()[i] == 0.0);
            CHECK(qtar.data()[i] == 0.0);
        }
    }
    SECTION("missing RDF rejected") {
        Sample broken = s;
        broken.rdf = VolumeField();
        CHECK_THROWS_AS((assemble_input<double>(broken, Component::x)), std::invalid_argument);
    }
    SECTION("sparse support is identical across the three components") {
        std::set<int64_t> supports[3];
        int c = 0;
        for (Component d : {Component::x, Component::y, Component::z}) {
            auto [in_d, tar_d] = assemble_input<double>(s, d);
            for (int64_t i = 0; i < 1000; ++i)
                if (in_d.data()[i] != 0.0) supports[c].insert(i);
            ++c;
        }
        // nonzero support can only shrink where the target itself is zero;
        // compare against the mask-selected voxels instead
        std::set<int64_t> expect;
        for (int64_t i = 0; i < 1000; ++i)
            if (sparse.values[static_cast<size_t>(i)] != 0.0f) expect.insert(i);
        for (int c2 = 0; c2 < 3; ++c2)
            for (int64_t i : supports[c2]) CHECK(expect.count(i) == 1);
    }
}

TEST_CASE("kfold rotates one test and one val geometry per fold", "[datapipe][folds]") {
    std::vector<std::string> ids;
    for (int i = 0; i < 8; ++i) ids.push_back("g" + std::to_string(i));

    auto folds = kfold(ids, 5, 42);
    REQUIRE(folds.size() == 5);
    std::set<std::string> test_ids;
    for (const auto& f : folds) {
        CHECK(f.train.size() == 6);
        CHECK(f.val.size() == 1);
        CHECK(f.test.size() == 1);
        std::set<std::string> all(f.train.begin(), f.train.end());
        all.insert(f.val.begin(), f.val.end());
        all.insert(f.test.begin(), f.test.end());
        CHECK(all.size() == 8);  // disjoint and covering
        test_ids.insert(f.test[0]);
    }
    CHECK(test_ids.size() == 5);  // no geometry tested twice

    auto again = kfold(ids, 5, 42);
    for (size_t i = 0; i < folds.size(); ++i) CHECK(folds[i].test == again[i].test);

    CHECK_THROWS_AS(kfold({"a", "b"}, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(kfold(ids, 9, 1), std::invalid_argument);
}

TEST_CASE("trilinear resampling is exact on affine fields", "[datapipe][resample]") {
    VolumeField src(8, 8, 8);
    for (int64_t d = 0; d < 8; ++d)
        for (int64_t h = 0; h < 8; ++h)
            for (int64_t w = 0; w < 8; ++w) src.at(d, h, w) = static_cast<float>(2.0 * d - 3.0 * h + 0.5 * w + 1.0);
    auto up = resample_trilinear(src, 16, 16, 16);
    // interior target voxels map strictly inside the source, where the
    // interpolant reproduces affine fields exactly
    for (int64_t d = 2; d < 14; ++d)
        for (int64_t h = 2; h < 14; ++h)
            for (int64_t w = 2; w < 14; ++w) {
                const double sd = (d + 0.5) * 0.5 - 0.5, sh = (h + 0.5) * 0.5 - 0.5, sw = (w + 0.5) * 0.5 - 0.5;
                const double expect = 2.0 * sd - 3.0 * sh + 0.5 * sw + 1.0;
                REQUIRE(up.at(d, h, w) == Catch::Approx(expect).margin(1e-5));
            }
}

TEST_CASE("manifest round trips and validates checksums", "[datapipe][manifest]") {
    sftest::TempDir tmp("manifest");
    std::filesystem::create_directories(tmp.path / "geoms" / "g000");
    std::filesystem::create_directories(tmp.path / "runs" / "r000");

    DatasetManifest m;
    m.seed = 7;
    m.grid_d = m.grid_h = m.grid_w = 6;
    m.spacing = 0.14 / 6;

    auto mask = ball_mask(6, 2.4);
    auto rdf = compute_rdf(mask, m.spacing);
    GeometryRecord g;
    g.id = "g000";
    g.diameter_mm = 60;
    g.long_axis_mm = 90;
    g.mask_file = "geoms/g000/mask.sfv";
    g.rdf_file = "geoms/g000/rdf.sfv";
    g.mask_checksum = write_volume(tmp.path / g.mask_file, mask);
    g.rdf_checksum = write_volume(tmp.path / g.rdf_file, rdf);
    m.geometries.push_back(g);

    RunRecord r;
    r.run_id = "r000";
    r.geometry_id = "g000";
    r.v_in = 0.3;
    r.sparse_seed = 11;
    r.vx_file = "runs/r000/vx.sfv";
    r.vy_file = "runs/r000/vy.sfv";
    r.vz_file = "runs/r000/vz.sfv";
    r.sparse_file = "runs/r000/sparse.sfv";
    r.vx_checksum = write_volume(tmp.path / r.vx_file, random_volume(6, 21, -0.2f, 0.2f));
    r.vy_checksum = write_volume(tmp.path / r.vy_file, random_volume(6, 22, -0.2f, 0.2f));
    r.vz_checksum = write_volume(tmp.path / r.vz_file, random_volume(6, 23, -0.2f, 0.2f));
    r.sparse_checksum = write_volume(tmp.path / r.sparse_file, make_sparse_mask(mask, 0.2, 11));
    m.runs.push_back(r);

    FoldSplit f;
    f.fold = 0;
    f.train = {"g000"};
    f.val = {"g000"};
    f.test = {"g000"};
    m.folds.push_back(f);
    m.fold_velocity_scale.push_back(0.25);

    save_manifest(tmp.path / "manifest.json", m);
    auto loaded = load_manifest(tmp.path / "manifest.json");
    CHECK(loaded.seed == 7);
    CHECK(loaded.runs.size() == 1);
    CHECK(loaded.runs[0].vx_checksum == r.vx_checksum);
    CHECK(loaded.fold_velocity_scale[0] == 0.25);
    CHECK_NOTHROW(validate_manifest(loaded, tmp.path));

    SECTION("corrupted volume fails validation") {
        write_volume(tmp.path / r.vx_file, random_volume(6, 999));
        CHECK_THROWS_AS(validate_manifest(loaded, tmp.path), DataError);
    }
    SECTION("load_dataset materializes normalized samples") {
        auto ds = load_dataset(tmp.path, 0);
        REQUIRE(ds.samples.size() == 1);
        CHECK(ds.samples[0].geometry_id == "g000");
        CHECK(ds.samples[0].v_in == Catch::Approx(0.6));
        CHECK_THROWS_AS(load_dataset(tmp.path, 3), DataError);
    }
}

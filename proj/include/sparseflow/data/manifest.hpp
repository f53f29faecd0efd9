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

#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "sparseflow/data/pipeline.hpp"
#include "sparseflow/data/volume_io.hpp"

namespace sparseflow {

using nlohmann::json;

struct GeometryRecord {
    std::string id;
    double diameter_mm = 0.0, long_axis_mm = 0.0;
    double center_d = 0.0, center_h = 0.0, center_w = 0.0;  // meters
    std::string mask_file, rdf_file;
    uint64_t mask_checksum = 0, rdf_checksum = 0;
};

struct RunRecord {
    std::string run_id, geometry_id;
    double v_in = 0.0;
    bool converged = true;
    uint64_t sparse_seed = 0;
    std::string vx_file, vy_file, vz_file, sparse_file;
    uint64_t vx_checksum = 0, vy_checksum = 0, vz_checksum = 0, sparse_checksum = 0;
};

/// UTF-8 JSON index of a generated dataset: geometry and run records with
/// file checksums, fold splits, and the per-fold normalization constants.
struct DatasetManifest {
    int schema_version = 1;
    uint64_t seed = 0;
    int64_t grid_d = 0, grid_h = 0, grid_w = 0;
    double spacing = 0.0;
    double sparse_fraction = 0.05;
    double v_in_divisor = 0.5;
    json config;  // the full resolved run configuration, for reproduction
    std::vector<GeometryRecord> geometries;
    std::vector<RunRecord> runs;
    std::vector<FoldSplit> folds;
    std::vector<double> fold_velocity_scale;  // parallel to folds

    const GeometryRecord& geometry(const std::string& id) const {
        for (const auto& g : geometries)
            if (g.id == id) return g;
        throw DataError("manifest: unknown geometry id '" + id + "'");
    }
};

inline json to_json(const DatasetManifest& m) {
    json j;
    j["schema_version"] = m.schema_version;
    j["seed"] = m.seed;
    j["grid"] = {{"d", m.grid_d}, {"h", m.grid_h}, {"w", m.grid_w}, {"spacing", m.spacing}};
    j["sparse_fraction"] = m.sparse_fraction;
    j["v_in_divisor"] = m.v_in_divisor;
    j["config"] = m.config;
    j["geometries"] = json::array();
    for (const auto& g : m.geometries)
        j["geometries"].push_back({{"id", g.id},
                                   {"diameter_mm", g.diameter_mm},
                                   {"long_axis_mm", g.long_axis_mm},
                                   {"center", {g.center_d, g.center_h, g.center_w}},
                                   {"mask_file", g.mask_file},
                                   {"rdf_file", g.rdf_file},
                                   {"mask_checksum", g.mask_checksum},
                                   {"rdf_checksum", g.rdf_checksum}});
    j["runs"] = json::array();
    for (const auto& r : m.runs)
        j["runs"].push_back({{"run_id", r.run_id},
                             {"geometry_id", r.geometry_id},
                             {"v_in", r.v_in},
                             {"converged", r.converged},
                             {"sparse_seed", r.sparse_seed},
                             {"vx_file", r.vx_file},
                             {"vy_file", r.vy_file},
                             {"vz_file", r.vz_file},
                             {"sparse_file", r.sparse_file},
                             {"vx_checksum", r.vx_checksum},
                             {"vy_checksum", r.vy_checksum},
                             {"vz_checksum", r.vz_checksum},
                             {"sparse_checksum", r.sparse_checksum}});
    j["folds"] = json::array();
    for (size_t i = 0; i < m.folds.size(); ++i)
        j["folds"].push_back({{"fold", m.folds[i].fold},
                              {"train", m.folds[i].train},
                              {"val", m.folds[i].val},
                              {"test", m.folds[i].test},
                              {"velocity_scale", m.fold_velocity_scale.at(i)}});
    return j;
}

inline DatasetManifest manifest_from_json(const json& j) {
    DatasetManifest m;
    try {
        m.schema_version = j.at("schema_version").get<int>();
        if (m.schema_version != 1)
            throw DataError("manifest: unsupported schema version " + std::to_string(m.schema_version));
        m.seed = j.at("seed").get<uint64_t>();
        m.grid_d = j.at("grid").at("d").get<int64_t>();
        m.grid_h = j.at("grid").at("h").get<int64_t>();
        m.grid_w = j.at("grid").at("w").get<int64_t>();
        m.spacing = j.at("grid").at("spacing").get<double>();
        m.sparse_fraction = j.at("sparse_fraction").get<double>();
        m.v_in_divisor = j.at("v_in_divisor").get<double>();
        if (j.contains("config")) m.config = j.at("config");
        for (const auto& g : j.at("geometries")) {
            GeometryRecord rec;
            rec.id = g.at("id").get<std::string>();
            rec.diameter_mm = g.at("diameter_mm").get<double>();
            rec.long_axis_mm = g.at("long_axis_mm").get<double>();
            rec.center_d = g.at("center").at(0).get<double>();
            rec.center_h = g.at("center").at(1).get<double>();
            rec.center_w = g.at("center").at(2).get<double>();
            rec.mask_file = g.at("mask_file").get<std::string>();
            rec.rdf_file = g.at("rdf_file").get<std::string>();
            rec.mask_checksum = g.at("mask_checksum").get<uint64_t>();
            rec.rdf_checksum = g.at("rdf_checksum").get<uint64_t>();
            m.geometries.push_back(std::move(rec));
        }
        for (const auto& r : j.at("runs")) {
            RunRecord rec;
            rec.run_id = r.at("run_id").get<std::string>();
            rec.geometry_id = r.at("geometry_id").get<std::string>();
            rec.v_in = r.at("v_in").get<double>();
            rec.converged = r.at("converged").get<bool>();
            rec.sparse_seed = r.at("sparse_seed").get<uint64_t>();
            rec.vx_file = r.at("vx_file").get<std::string>();
            rec.vy_file = r.at("vy_file").get<std::string>();
            rec.vz_file = r.at("vz_file").get<std::string>();
            rec.sparse_file = r.at("sparse_file").get<std::string>();
            rec.vx_checksum = r.at("vx_checksum").get<uint64_t>();
            rec.vy_checksum = r.at("vy_checksum").get<uint64_t>();
            rec.vz_checksum = r.at("vz_checksum").get<uint64_t>();
            rec.sparse_checksum = r.at("sparse_checksum").get<uint64_t>();
            m.runs.push_back(std::move(rec));
        }
        for (const auto& f : j.at("folds")) {
            FoldSplit split;
            split.fold = f.at("fold").get<int64_t>();
            split.train = f.at("train").get<std::vector<std::string>>();
            split.val = f.at("val").get<std::vector<std::string>>();
            split.test = f.at("test").get<std::vector<std::string>>();
            m.folds.push_back(std::move(split));
            m.fold_velocity_scale.push_back(f.at("velocity_scale").get<double>());
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("manifest: malformed JSON: ") + e.what());
    }
    return m;
}

inline void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("save_manifest: cannot open '" + path.string() + "'");
    out << to_json(m).dump(2) << '\n';
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_manifest: cannot open '" + path.string() + "' (expected a dataset manifest)");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(std::string("load_manifest: ") + e.what());
    }
    return manifest_from_json(j);
}

/// Verifies that every referenced volume exists, parses, and matches its
/// recorded checksum.
inline void validate_manifest(const DatasetManifest& m, const std::filesystem::path& root) {
    auto check = [&](const std::string& file, uint64_t expect) {
        uint64_t actual = 0;
        VolumeField f = read_volume(root / file, &actual);
        if (actual != expect) throw DataError("manifest: checksum mismatch for '" + file + "'");
        if (f.d != m.grid_d || f.h != m.grid_h || f.w != m.grid_w)
            throw DataError("manifest: '" + file + "' extents do not match the dataset grid");
    };
    for (const auto& g : m.geometries) {
        check(g.mask_file, g.mask_checksum);
        check(g.rdf_file, g.rdf_checksum);
    }
    for (const auto& r : m.runs) {
        check(r.vx_file, r.vx_checksum);
        check(r.vy_file, r.vy_checksum);
        check(r.vz_file, r.vz_checksum);
        check(r.sparse_file, r.sparse_checksum);
    }
}

/// In-memory dataset: samples normalized with the requested fold's constants.
struct LoadedDataset {
    DatasetManifest manifest;
    std::vector<Sample> samples;  // aligned with manifest.runs
    NormalizationRecord norm;
    int64_t fold = 0;
};

inline LoadedDataset load_dataset(const std::filesystem::path& root, int64_t fold) {
    LoadedDataset ds;
    ds.manifest = load_manifest(root / "manifest.json");
    if (fold < 0 || fold >= static_cast<int64_t>(ds.manifest.folds.size()))
        throw DataError("load_dataset: fold " + std::to_string(fold) + " out of range (manifest has " +
                        std::to_string(ds.manifest.folds.size()) + ")");
    ds.fold = fold;
    ds.norm.velocity_scale = ds.manifest.fold_velocity_scale[static_cast<size_t>(fold)];
    ds.norm.v_in_divisor = ds.manifest.v_in_divisor;

    std::map<std::string, VolumeField> masks, rdfs;
    for (const auto& g : ds.manifest.geometries) {
        masks[g.id] = read_volume(root / g.mask_file);
        rdfs[g.id] = read_volume(root / g.rdf_file);
    }
    for (const auto& r : ds.manifest.runs) {
        FlowSnapshot snap;
        snap.vx = read_volume(root / r.vx_file);
        snap.vy = read_volume(root / r.vy_file);
        snap.vz = read_volume(root / r.vz_file);
        snap.mask = masks.at(r.geometry_id);
        snap.v_in = r.v_in;
        snap.geometry_id = r.geometry_id;
        snap.converged = r.converged;
        VolumeField sparse = read_volume(root / r.sparse_file);
        ds.samples.push_back(normalize_snapshot(snap, rdfs.at(r.geometry_id), sparse, ds.norm, r.run_id));
    }
    return ds;
}

}  // namespace sparseflow

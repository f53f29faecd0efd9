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

#include "sparseflow/data/manifest.hpp"
#include "sparseflow/evalkit/metrics.hpp"
#include "sparseflow/train/trainer.hpp"

namespace sparseflow {

struct MetricReport {
    std::string model;      // lvadnet3d | unet3d
    std::string component;  // x | y | z | magnitude
    bool sparse = true, rdf = true, vin = true;
    int64_t fold = 0;
    std::string seed;  // a number, or "mean" for seed-aggregated rows
    double mse = 0.0, mae = 0.0, rmse = 0.0, psnr_db = 0.0;
};

inline std::string format_metric(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9e", v);
    return buf;
}

inline void write_report_csv(const std::filesystem::path& path, const std::vector<MetricReport>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("write_report_csv: cannot open '" + path.string() + "'");
    out << "model,component,sparse,rdf,vin,fold,seed,mse,mae,rmse,psnr_db\n";
    for (const auto& r : rows)
        out << r.model << ',' << r.component << ',' << (r.sparse ? 1 : 0) << ',' << (r.rdf ? 1 : 0) << ','
            << (r.vin ? 1 : 0) << ',' << r.fold << ',' << r.seed << ',' << format_metric(r.mse) << ','
            << format_metric(r.mae) << ',' << format_metric(r.rmse) << ',' << format_metric(r.psnr_db) << '\n';
}

/// Runs one component model over a sample and returns the predicted volume.
template <typename T>
VolumeField predict_component(const ReconNet<T>& model, const Sample& sample, Component d) {
    const bool with_rdf = model.config.in_channels >= 2;
    auto [input, target] = assemble_input<T>(sample, d, with_rdf);
    Tensor<T> pred = model.forward(input, Tensor<T>::scalar(static_cast<T>(sample.v_in)));
    const VolumeField& like = component_field(sample, d);
    VolumeField out(like.d, like.h, like.w);
    for (int64_t i = 0; i < out.numel(); ++i) out.values[static_cast<size_t>(i)] = static_cast<float>(pred.data()[i]);
    return out;
}

struct EvalOptions {
    double peak = 1.0;         // PSNR reference under the peak-1 normalization
    bool in_mask_only = false; // restrict the metric domain to the ventricle
    int64_t fold = 0;
    std::string model_name = "lvadnet3d";
    std::string seed_label = "0";
};

/// Component-wise evaluation plus the composed velocity-magnitude row:
/// reconstruct x, y, z with their models, score each against ground truth,
/// then derive the predicted magnitude per voxel and score it against the
/// true magnitude. Emits 3 + 1 rows.
template <typename T>
std::vector<MetricReport> evaluate_components(const std::array<const ReconNet<T>*, 3>& models,
                                              const std::vector<Sample>& test_samples, const EvalOptions& opts = {}) {
    for (const auto* m : models)
        if (!m) throw std::invalid_argument("evaluate_components: all three component models are required");
    if (test_samples.empty()) throw std::invalid_argument("evaluate_components: no test samples");

    MetricAccumulator acc[4];
    for (const Sample& s : test_samples) {
        const VolumeField px = predict_component(*models[0], s, Component::x);
        const VolumeField py = predict_component(*models[1], s, Component::y);
        const VolumeField pz = predict_component(*models[2], s, Component::z);
        const VolumeField* domain = opts.in_mask_only ? &s.ventricle_mask : nullptr;
        acc[0].add(px, s.vx, domain);
        acc[1].add(py, s.vy, domain);
        acc[2].add(pz, s.vz, domain);
        acc[3].add(velocity_magnitude(px, py, pz), velocity_magnitude(s.vx, s.vy, s.vz), domain);
    }

    const bool rdf = models[0]->config.in_channels >= 2;
    const bool vin = models[0]->config.conditioning != Conditioning::off;
    std::vector<MetricReport> rows;
    const char* names[4] = {"x", "y", "z", "magnitude"};
    for (int i = 0; i < 4; ++i) {
        MetricReport r;
        r.model = opts.model_name;
        r.component = names[i];
        r.rdf = rdf;
        r.vin = vin;
        r.fold = opts.fold;
        r.seed = opts.seed_label;
        r.mse = acc[i].mse();
        r.mae = acc[i].mae();
        r.rmse = acc[i].rmse();
        r.psnr_db = psnr_from_mse(r.mse, opts.peak);
        rows.push_back(std::move(r));
    }
    return rows;
}

enum class AblationSuite { skip, inputs };

inline AblationSuite ablation_suite_from_name(const std::string& s) {
    if (s == "skip") return AblationSuite::skip;
    if (s == "inputs") return AblationSuite::inputs;
    throw std::invalid_argument("unknown ablation suite '" + s + "' (expected skip or inputs)");
}

struct AblationOptions {
    std::vector<uint64_t> seeds = {1, 2, 3};
    int64_t fold = 0;
    int scale_divisor = 4;
    TrainConfig train;  // epochs / lr / batch for every ablation training
    std::vector<ModelKind> models = {ModelKind::lvadnet3d, ModelKind::unet3d};  // inputs suite only
    double peak = 1.0;
    bool emit_means = true;
};

namespace detail {

inline std::vector<Sample> select_samples(const LoadedDataset& ds, const std::vector<std::string>& geo_ids) {
    std::vector<Sample> out;
    for (const Sample& s : ds.samples)
        for (const auto& id : geo_ids)
            if (s.geometry_id == id) out.push_back(s);
    return out;
}

template <typename T>
ReconNet<T> train_fresh(ModelConfig cfg, Component comp, const std::vector<Sample>& train_samples,
                        const std::vector<Sample>& val_samples, const TrainConfig& base, uint64_t seed) {
    ReconNet<T> net = build_model<T>(cfg, seed);
    TrainConfig tc = base;
    tc.seed = seed;
    tc.component = comp;
    const bool with_rdf = cfg.in_channels >= 2;
    auto train_set = make_train_set<T>(train_samples, comp, with_rdf);
    auto val_set = make_train_set<T>(val_samples, comp, with_rdf);
    Trainer<T> trainer(net, tc);
    TrainResult res = trainer.run(train_set, val_set);
    if (res.aborted) throw NumericError("ablation training diverged (non-finite loss)");
    if (res.best_epoch >= 0) Trainer<T>::load_weights(net, trainer.best_checkpoint(0));
    return net;
}

inline MetricReport mean_of(const std::vector<MetricReport>& rows, double peak) {
    MetricReport m = rows.front();
    m.seed = "mean";
    m.mse = m.mae = m.rmse = 0.0;
    for (const auto& r : rows) {
        m.mse += r.mse;
        m.mae += r.mae;
        m.rmse += r.rmse;
    }
    const double n = static_cast<double>(rows.size());
    m.mse /= n;
    m.mae /= n;
    m.rmse /= n;
    m.psnr_db = psnr_from_mse(m.mse, peak);
    return m;
}

}  // namespace detail

/// The two ablation harnesses. "skip" trains LVADNet3D with and without skip
/// connections per component and reports component metrics; "inputs" trains
/// the three input configurations (sparse only / +RDF / +RDF +v_in) per model
/// and reports velocity-magnitude metrics. One row per (setting, seed), plus
/// seed-mean rows when multiple seeds run.
template <typename T>
std::vector<MetricReport> run_ablation(AblationSuite suite, const LoadedDataset& ds, const AblationOptions& opts) {
    if (opts.seeds.empty()) throw std::invalid_argument("run_ablation: need at least one seed");
    const FoldSplit& fold = ds.manifest.folds.at(static_cast<size_t>(opts.fold));
    const auto train_samples = detail::select_samples(ds, fold.train);
    const auto val_samples = detail::select_samples(ds, fold.val);
    const auto test_samples = detail::select_samples(ds, fold.test);
    if (train_samples.empty() || test_samples.empty())
        throw DataError("run_ablation: fold " + std::to_string(opts.fold) + " has empty train or test partitions");

    std::vector<MetricReport> rows;

    if (suite == AblationSuite::skip) {
        for (Component comp : {Component::x, Component::y, Component::z}) {
            for (bool skips : {true, false}) {
                std::vector<MetricReport> seed_rows;
                for (uint64_t seed : opts.seeds) {
                    ModelConfig cfg = lvadnet3d_config(opts.scale_divisor);
                    cfg.skips = skips;
                    ReconNet<T> net =
                        detail::train_fresh<T>(cfg, comp, train_samples, val_samples, opts.train, seed);
                    MetricAccumulator acc;
                    for (const Sample& s : test_samples)
                        acc.add(predict_component(net, s, comp), component_field(s, comp));
                    MetricReport r;
                    r.model = skips ? "lvadnet3d" : "lvadnet3d_nosc";
                    r.component = component_name(comp);
                    r.fold = opts.fold;
                    r.seed = std::to_string(seed);
                    r.mse = acc.mse();
                    r.mae = acc.mae();
                    r.rmse = acc.rmse();
                    r.psnr_db = psnr_from_mse(r.mse, opts.peak);
                    seed_rows.push_back(r);
                }
                rows.insert(rows.end(), seed_rows.begin(), seed_rows.end());
                if (opts.emit_means && opts.seeds.size() > 1) rows.push_back(detail::mean_of(seed_rows, opts.peak));
            }
        }
        return rows;
    }

    // inputs suite: (sparse) / (sparse + R) / (sparse + R, v_in)
    struct InputConfig {
        bool rdf, vin;
    };
    const InputConfig configs[3] = {{false, false}, {true, false}, {true, true}};
    for (ModelKind kind : opts.models) {
        for (const InputConfig& ic : configs) {
            std::vector<MetricReport> seed_rows;
            for (uint64_t seed : opts.seeds) {
                ModelConfig cfg = kind == ModelKind::lvadnet3d ? lvadnet3d_config(opts.scale_divisor, ic.rdf ? 2 : 1)
                                                               : unet3d_config(opts.scale_divisor, ic.rdf ? 2 : 1);
                cfg.conditioning = ic.vin ? Conditioning::latent : Conditioning::off;
                std::array<std::optional<ReconNet<T>>, 3> nets;
                for (int c = 0; c < 3; ++c)
                    nets[static_cast<size_t>(c)] = detail::train_fresh<T>(
                        cfg, static_cast<Component>(c), train_samples, val_samples, opts.train, seed);
                MetricAccumulator acc;
                for (const Sample& s : test_samples) {
                    const VolumeField px = predict_component(*nets[0], s, Component::x);
                    const VolumeField py = predict_component(*nets[1], s, Component::y);
                    const VolumeField pz = predict_component(*nets[2], s, Component::z);
                    acc.add(velocity_magnitude(px, py, pz), velocity_magnitude(s.vx, s.vy, s.vz));
                }
                MetricReport r;
                r.model = to_string(kind);
                r.component = "magnitude";
                r.sparse = true;
                r.rdf = ic.rdf;
                r.vin = ic.vin;
                r.fold = opts.fold;
                r.seed = std::to_string(seed);
                r.mse = acc.mse();
                r.mae = acc.mae();
                r.rmse = acc.rmse();
                r.psnr_db = psnr_from_mse(r.mse, opts.peak);
                seed_rows.push_back(r);
            }
            rows.insert(rows.end(), seed_rows.begin(), seed_rows.end());
            if (opts.emit_means && opts.seeds.size() > 1) rows.push_back(detail::mean_of(seed_rows, opts.peak));
        }
    }
    return rows;
}

}  // namespace sparseflow

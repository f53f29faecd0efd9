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

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "sparseflow/cli/selfcheck.hpp"
#include "sparseflow/evalkit/report.hpp"
#include "sparseflow/evalkit/slices.hpp"
#include "sparseflow/flow/population.hpp"

namespace sparseflow::cli {

// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

struct GenerateArgs {
    std::string out;
    uint64_t seed = 0;
    std::string preset = "desk";
    int64_t geometries = 8;
    int64_t runs = 47;
    int64_t folds = 5;
    int64_t grid = 0;   // 0: from preset
    int64_t steps = 0;  // 0: from preset
    double sparse_fraction = 0.05;
    double inlet_min = 0.1, inlet_max = 0.5;
    bool keep_nonconverged = false;
};

struct TrainArgs {
    std::string data, out;
    std::string model = "lvadnet3d";
    std::string component = "x";
    std::string conditioning = "latent";
    std::string inputs = "sparse+rdf";
    std::string log;
    int64_t fold = 0;
    uint64_t seed = 0;
    std::string preset = "desk";
    int64_t epochs = 0;  // 0: from preset
    int64_t batch = 0;
    double lr = 1e-3;
    double lr_min = 0.0;
    double delta = 0.5;
    bool skips = true;
    bool resume = false;
};

struct EvalArgs {
    std::string data, out;
    std::string ckpt_x, ckpt_y, ckpt_z;
    std::string slices_dir;
    int64_t fold = 0;
    double peak = 1.0;
    bool in_mask = false;
};

struct AblateArgs {
    std::string data, out;
    std::string suite = "skip";
    std::string models = "both";
    std::string seeds = "1,2,3";
    int64_t fold = 0;
    std::string preset = "desk";
    int64_t epochs = 0;
    int64_t batch = 0;
    double lr = 1e-3;
};

namespace detail {

inline int scale_divisor_of(const std::string& preset) {
    if (preset == "desk") return 4;
    if (preset == "paper") return 1;
    throw std::invalid_argument("unknown preset '" + preset + "' (expected desk or paper)");
}

inline SolverConfig solver_of(const std::string& preset, int64_t grid, int64_t steps) {
    SolverConfig cfg;
    if (preset == "desk") {
        cfg.grid = GridSpec::cubic(grid > 0 ? grid : 32);
        cfg.steps = steps > 0 ? steps : 400;
        cfg.inner_iterations = 4000;
    } else if (preset == "paper") {
        cfg.grid = GridSpec::cubic(grid > 0 ? grid : 128);
        cfg.steps = steps > 0 ? steps : 3000;
        cfg.inner_iterations = 20000;
    } else {
        throw std::invalid_argument("unknown preset '" + preset + "'");
    }
    return cfg;
}

inline std::vector<uint64_t> parse_seed_list(const std::string& s) {
    std::vector<uint64_t> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stoull(tok));
    }
    if (out.empty()) throw std::invalid_argument("--seeds: no seeds given");
    return out;
}

inline json config_json_of(const TrainArgs& a, const ModelConfig& mc, const TrainConfig& tc, uint64_t fingerprint) {
    json j;
    j["data"] = a.data;
    j["model"] = a.model;
    j["component"] = a.component;
    j["fold"] = a.fold;
    j["preset"] = a.preset;
    j["model_config"] = mc.fingerprint_text();
    j["in_channels"] = mc.in_channels;
    j["skips"] = mc.skips;
    j["conditioning"] = to_string(mc.conditioning);
    j["scale_divisor"] = mc.scale_divisor;
    j["train"] = {{"lr0", tc.lr0},     {"lr_min", tc.lr_min},        {"epochs", tc.epochs}, {"delta", tc.delta},
                  {"batch_size", tc.batch_size}, {"seed", tc.seed}};
    j["fingerprint"] = fingerprint;
    return j;
}

inline std::vector<Sample> samples_for(const LoadedDataset& ds, const std::vector<std::string>& geo_ids) {
    std::vector<Sample> out;
    for (const Sample& s : ds.samples)
        for (const auto& id : geo_ids)
            if (s.geometry_id == id) out.push_back(s);
    return out;
}

}  // namespace detail

/// generate: geometries, flow snapshots, sparse masks, fold splits and the
/// manifest. Partial outputs are removed on failure.
inline int cmd_generate(const GenerateArgs& a) {
    const std::filesystem::path root(a.out);
    const bool existed = std::filesystem::exists(root);
    std::filesystem::create_directories(root);
    try {
        PopulationConfig pop;
        pop.n_geometries = a.geometries;
        pop.total_runs = a.runs;
        pop.inlet_min = a.inlet_min;
        pop.inlet_max = a.inlet_max;
        pop.solver = detail::solver_of(a.preset, a.grid, a.steps);
        PopulationPlan plan = plan_population(a.seed, pop);

        DatasetManifest m;
        m.seed = a.seed;
        m.grid_d = pop.solver.grid.d;
        m.grid_h = pop.solver.grid.h;
        m.grid_w = pop.solver.grid.w;
        m.spacing = pop.solver.grid.spacing;
        m.sparse_fraction = a.sparse_fraction;
        m.config = {{"preset", a.preset},          {"seed", a.seed},
                    {"geometries", a.geometries},  {"runs", a.runs},
                    {"folds", a.folds},            {"grid", pop.solver.grid.d},
                    {"steps", pop.solver.steps},   {"sparse_fraction", a.sparse_fraction},
                    {"inlet_min", a.inlet_min},    {"inlet_max", a.inlet_max},
                    {"density", pop.solver.density}, {"viscosity", pop.solver.viscosity},
                    {"dt", pop.solver.dt},         {"convergence_tol", pop.solver.convergence_tol},
                    {"inner_iterations", pop.solver.inner_iterations}};

        std::map<std::string, VoxelGeometry> voxelized;
        for (const auto& g : plan.geometries) {
            const auto dir = root / "geoms" / g.id;
            std::filesystem::create_directories(dir);
            VoxelGeometry vg = voxelize(g, pop.solver.grid);
            VolumeField rdf = compute_rdf(vg.mask, pop.solver.grid.spacing);
            GeometryRecord rec;
            rec.id = g.id;
            rec.diameter_mm = g.diameter_mm;
            rec.long_axis_mm = g.long_axis_mm;
            rec.center_d = g.center[0];
            rec.center_h = g.center[1];
            rec.center_w = g.center[2];
            rec.mask_file = "geoms/" + g.id + "/mask.sfv";
            rec.rdf_file = "geoms/" + g.id + "/rdf.sfv";
            rec.mask_checksum = write_volume(root / rec.mask_file, vg.mask);
            rec.rdf_checksum = write_volume(root / rec.rdf_file, rdf);
            m.geometries.push_back(rec);
            voxelized.emplace(g.id, std::move(vg));
        }

        struct RunPeak {
            std::string geometry_id;
            double peak;
            bool converged;
        };
        std::vector<RunPeak> peaks;
        for (const PlannedRun& r : plan.runs) {
            char run_name[16];
            std::snprintf(run_name, sizeof(run_name), "r%03d", static_cast<int>(r.run_index));
            const auto dir = root / "runs" / run_name;
            std::filesystem::create_directories(dir);

            ProjectionStepper stepper(voxelized.at(r.geometry_id), pop.solver);
            for (int64_t t = 0; t < pop.solver.steps; ++t) stepper.step(r.v_in);
            FlowSnapshot snap = stepper.snapshot(r.v_in);
            if (!snap.converged)
                std::cerr << "warning: run " << run_name << " did not reach the pressure tolerance; "
                          << (a.keep_nonconverged ? "keeping" : "excluding from datasets") << "\n";

            RunRecord rec;
            rec.run_id = run_name;
            rec.geometry_id = r.geometry_id;
            rec.v_in = r.v_in;
            rec.converged = snap.converged || a.keep_nonconverged;
            rec.sparse_seed = substream(a.seed, "sparse", static_cast<uint64_t>(r.run_index));
            rec.vx_file = std::string("runs/") + run_name + "/vx.sfv";
            rec.vy_file = std::string("runs/") + run_name + "/vy.sfv";
            rec.vz_file = std::string("runs/") + run_name + "/vz.sfv";
            rec.sparse_file = std::string("runs/") + run_name + "/sparse.sfv";
            rec.vx_checksum = write_volume(root / rec.vx_file, snap.vx);
            rec.vy_checksum = write_volume(root / rec.vy_file, snap.vy);
            rec.vz_checksum = write_volume(root / rec.vz_file, snap.vz);
            VolumeField sparse = make_sparse_mask(voxelized.at(r.geometry_id).mask, a.sparse_fraction, rec.sparse_seed);
            rec.sparse_checksum = write_volume(root / rec.sparse_file, sparse);
            m.runs.push_back(rec);
            peaks.push_back({r.geometry_id, velocity_scale_of({&snap}), rec.converged});
        }

        std::vector<std::string> ids;
        for (const auto& g : plan.geometries) ids.push_back(g.id);
        if (ids.size() >= 3 && a.folds >= 1)
            m.folds = kfold(ids, a.folds, a.seed);
        else
            std::cerr << "warning: fewer than 3 geometries; no cross-validation folds written\n";
        for (const FoldSplit& f : m.folds) {
            double scale = 0.0;
            for (size_t i = 0; i < peaks.size(); ++i) {
                if (!peaks[i].converged) continue;
                for (const auto& id : f.train)
                    if (peaks[i].geometry_id == id) scale = std::max(scale, peaks[i].peak);
            }
            if (scale <= 0.0) throw NumericError("generate: fold " + std::to_string(f.fold) +
                                                 " has an all-zero training split; cannot normalize");
            m.fold_velocity_scale.push_back(scale);
        }

        save_manifest(root / "manifest.json", m);
        std::cout << "generated " << m.runs.size() << " runs over " << m.geometries.size() << " geometries at "
                  << m.grid_d << "^3 into " << root.string() << "\n";
        return kExitOk;
    } catch (...) {
        std::error_code ec;
        if (!existed)
            std::filesystem::remove_all(root, ec);  // leave no partial dataset behind
        else
            std::filesystem::remove(root / "manifest.json", ec);
        throw;
    }
}

/// train: one (model, component, fold) tuple per invocation.
inline int cmd_train(const TrainArgs& a) {
    const std::filesystem::path root(a.data);
    LoadedDataset ds = load_dataset(root, a.fold);

    const int divisor = detail::scale_divisor_of(a.preset);
    const bool with_rdf = a.inputs == "sparse+rdf";
    if (!with_rdf && a.inputs != "sparse")
        throw std::invalid_argument("--inputs must be 'sparse' or 'sparse+rdf', got '" + a.inputs + "'");
    const ModelKind kind = model_kind_from_name(a.model);
    ModelConfig mc = kind == ModelKind::lvadnet3d ? lvadnet3d_config(divisor, with_rdf ? 2 : 1)
                                                  : unet3d_config(divisor, with_rdf ? 2 : 1);
    mc.skips = a.skips;
    mc.conditioning = conditioning_from_name(a.conditioning);

    TrainConfig tc;
    tc.lr0 = a.lr;
    tc.lr_min = a.lr_min;
    tc.epochs = a.epochs > 0 ? a.epochs : (a.preset == "paper" ? 100 : 40);
    tc.delta = a.delta;
    tc.batch_size = a.batch > 0 ? a.batch : (a.preset == "paper" ? 1 : 4);
    tc.seed = a.seed;
    tc.component = component_from_name(a.component);
    const uint64_t fingerprint = train_fingerprint(mc, tc);

    const FoldSplit& fold = ds.manifest.folds.at(static_cast<size_t>(a.fold));
    auto train_samples = detail::samples_for(ds, fold.train);
    auto val_samples = detail::samples_for(ds, fold.val);
    if (train_samples.empty()) throw DataError("train: fold " + std::to_string(a.fold) + " has no training samples");

    ReconNet<float> net = build_model<float>(mc, a.seed);
    Trainer<float> trainer(net, tc);
    const std::filesystem::path ckpt_path(a.out);
    if (a.resume) trainer.restore(load_checkpoint(ckpt_path, fingerprint));

    auto train_set = make_train_set<float>(train_samples, tc.component, with_rdf);
    auto val_set = make_train_set<float>(val_samples, tc.component, with_rdf);
    TrainResult result = trainer.run(train_set, val_set);

    save_checkpoint(ckpt_path, trainer.checkpoint(fingerprint));
    if (result.best_epoch >= 0 || !a.resume) {
        try {
            save_checkpoint(std::filesystem::path(a.out).concat(".best"), trainer.best_checkpoint(fingerprint));
        } catch (const std::logic_error&) {
            // aborted before completing any epoch; resumable state still saved
        }
    }
    {
        std::ofstream side(std::filesystem::path(a.out).concat(".json"), std::ios::trunc);
        side << detail::config_json_of(a, mc, tc, fingerprint).dump(2) << '\n';
    }

    const std::filesystem::path log_path = a.log.empty() ? std::filesystem::path(a.out).concat(".metrics.csv")
                                                         : std::filesystem::path(a.log);
    const bool append = a.resume && std::filesystem::exists(log_path);
    std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
    if (!append) log << "epoch,step,lr,train_huber,val_huber,wall_ms\n";
    for (const auto& em : result.log) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%ld,%ld,%.9e,%.9e,%.9e,%.3f", static_cast<long>(em.epoch),
                      static_cast<long>(em.step), em.lr, em.train_huber, em.val_huber, em.wall_ms);
        log << buf << '\n';
    }

    if (result.aborted) {
        std::cerr << "training aborted on a non-finite loss; last finite state saved to " << a.out << "\n";
        return kExitNumeric;
    }
    std::cout << "trained " << a.model << " component " << a.component << " fold " << a.fold << " for "
              << trainer.epochs_completed() << " epochs; best val " << trainer.best_val() << "\n";
    return kExitOk;
}

/// eval: metric rows for every available component model, magnitude when all
/// three are present, optional mid-plane slice export.
inline int cmd_eval(const EvalArgs& a) {
    LoadedDataset ds = load_dataset(a.data, a.fold);
    const FoldSplit& fold = ds.manifest.folds.at(static_cast<size_t>(a.fold));
    auto test_samples = detail::samples_for(ds, fold.test);
    if (test_samples.empty()) throw DataError("eval: fold " + std::to_string(a.fold) + " has no test samples");

    struct Loaded {
        ReconNet<float> net;
        std::string name;
    };
    std::array<std::optional<Loaded>, 3> models;
    const std::string paths[3] = {a.ckpt_x, a.ckpt_y, a.ckpt_z};
    for (int c = 0; c < 3; ++c) {
        if (paths[c].empty()) continue;
        std::ifstream side(paths[c] + ".json");
        if (!side) throw DataError("eval: missing sidecar '" + paths[c] + ".json' describing the checkpoint config");
        json j;
        side >> j;
        const int divisor = j.at("scale_divisor").get<int>();
        const int in_channels = j.at("in_channels").get<int>();
        ModelConfig mc = j.at("model").get<std::string>() == "lvadnet3d" ? lvadnet3d_config(divisor, in_channels)
                                                                         : unet3d_config(divisor, in_channels);
        mc.skips = j.at("skips").get<bool>();
        mc.conditioning = conditioning_from_name(j.at("conditioning").get<std::string>());
        Loaded loaded{build_model<float>(mc, 0), j.at("model").get<std::string>()};
        Trainer<float>::load_weights(loaded.net, load_checkpoint(paths[c]));
        models[static_cast<size_t>(c)] = std::move(loaded);
    }
    if (!models[0] && !models[1] && !models[2]) throw std::invalid_argument("eval: no checkpoints given");

    std::vector<MetricReport> rows;
    std::array<std::map<std::string, VolumeField>, 3> predictions;  // per component, by run id
    for (int c = 0; c < 3; ++c) {
        if (!models[static_cast<size_t>(c)]) continue;
        const Component comp = static_cast<Component>(c);
        MetricAccumulator acc;
        for (const Sample& s : test_samples) {
            VolumeField pred = predict_component(models[static_cast<size_t>(c)]->net, s, comp);
            acc.add(pred, component_field(s, comp), a.in_mask ? &s.ventricle_mask : nullptr);
            predictions[static_cast<size_t>(c)].emplace(s.run_id, std::move(pred));
        }
        MetricReport r;
        r.model = models[static_cast<size_t>(c)]->name;
        r.component = component_name(comp);
        r.rdf = models[static_cast<size_t>(c)]->net.config.in_channels >= 2;
        r.vin = models[static_cast<size_t>(c)]->net.config.conditioning != Conditioning::off;
        r.fold = a.fold;
        r.seed = "0";
        r.mse = acc.mse();
        r.mae = acc.mae();
        r.rmse = acc.rmse();
        r.psnr_db = psnr_from_mse(r.mse, a.peak);
        rows.push_back(std::move(r));
    }

    const bool complete = models[0] && models[1] && models[2];
    if (complete) {
        MetricAccumulator acc;
        for (const Sample& s : test_samples)
            acc.add(velocity_magnitude(predictions[0].at(s.run_id), predictions[1].at(s.run_id),
                                       predictions[2].at(s.run_id)),
                    velocity_magnitude(s.vx, s.vy, s.vz), a.in_mask ? &s.ventricle_mask : nullptr);
        MetricReport r;
        r.model = models[0]->name;
        r.component = "magnitude";
        r.rdf = models[0]->net.config.in_channels >= 2;
        r.vin = models[0]->net.config.conditioning != Conditioning::off;
        r.fold = a.fold;
        r.seed = "0";
        r.mse = acc.mse();
        r.mae = acc.mae();
        r.rmse = acc.rmse();
        r.psnr_db = psnr_from_mse(r.mse, a.peak);
        rows.push_back(std::move(r));
    } else {
        std::cerr << "warning: component checkpoints incomplete; magnitude rows omitted\n";
    }

    write_report_csv(a.out, rows);

    if (!a.slices_dir.empty()) {
        const std::filesystem::path sdir(a.slices_dir);
        std::filesystem::create_directories(sdir);
        const int axis_of[3] = {2, 1, 0};  // slice normal to the component's own axis
        for (const Sample& s : test_samples) {
            for (int c = 0; c < 3; ++c) {
                if (!models[static_cast<size_t>(c)]) continue;
                const VolumeField& truth = component_field(s, static_cast<Component>(c));
                const VolumeField& pred = predictions[static_cast<size_t>(c)].at(s.run_id);
                const int axis = axis_of[c];
                const int64_t mid = (axis == 0 ? truth.d : axis == 1 ? truth.h : truth.w) / 2;
                float vmin = truth.values[0], vmax = truth.values[0];
                for (float v : truth.values) {
                    vmin = std::min(vmin, v);
                    vmax = std::max(vmax, v);
                }
                const std::string base = s.run_id + "_" + component_name(static_cast<Component>(c));
                auto ps = extract_slice(pred, axis, mid);
                auto ts = extract_slice(truth, axis, mid);
                write_slice_ppm(sdir / (base + "_pred.ppm"), ps, vmin, vmax);
                write_slice_ppm(sdir / (base + "_true.ppm"), ts, vmin, vmax);
                write_slice_csv(sdir / (base + "_pred.csv"), ps);
                write_slice_csv(sdir / (base + "_true.csv"), ts);
            }
            if (complete) {
                VolumeField pmag = velocity_magnitude(predictions[0].at(s.run_id), predictions[1].at(s.run_id),
                                                      predictions[2].at(s.run_id));
                VolumeField tmag = velocity_magnitude(s.vx, s.vy, s.vz);
                float vmax = 0.0f;
                for (float v : tmag.values) vmax = std::max(vmax, v);
                auto psl = extract_slice(pmag, 0, tmag.d / 2);
                auto tsl = extract_slice(tmag, 0, tmag.d / 2);
                write_slice_ppm(sdir / (s.run_id + "_mag_pred.ppm"), psl, 0.0f, vmax);
                write_slice_ppm(sdir / (s.run_id + "_mag_true.ppm"), tsl, 0.0f, vmax);
                write_slice_csv(sdir / (s.run_id + "_mag_pred.csv"), psl);
                write_slice_csv(sdir / (s.run_id + "_mag_true.csv"), tsl);
            }
        }
    }
    std::cout << "wrote " << rows.size() << " metric rows to " << a.out << "\n";
    return kExitOk;
}

inline int cmd_ablate(const AblateArgs& a) {
    LoadedDataset ds = load_dataset(a.data, a.fold);
    AblationOptions opts;
    opts.seeds = detail::parse_seed_list(a.seeds);
    opts.fold = a.fold;
    opts.scale_divisor = detail::scale_divisor_of(a.preset);
    opts.train.epochs = a.epochs > 0 ? a.epochs : 12;
    opts.train.batch_size = a.batch > 0 ? a.batch : 2;
    opts.train.lr0 = a.lr;
    if (a.models == "lvadnet3d")
        opts.models = {ModelKind::lvadnet3d};
    else if (a.models == "unet3d")
        opts.models = {ModelKind::unet3d};
    else if (a.models != "both")
        throw std::invalid_argument("--models must be both, lvadnet3d or unet3d");

    auto rows = run_ablation<float>(ablation_suite_from_name(a.suite), ds, opts);
    write_report_csv(a.out, rows);
    std::cout << "wrote " << rows.size() << " ablation rows to " << a.out << "\n";
    return kExitOk;
}

inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"sparse-to-dense intraventricular flow reconstruction"};
    app.set_config("--config");
    app.require_subcommand(1);

    GenerateArgs g;
    auto* gen = app.add_subcommand("generate", "simulate a ventricle population and build the dataset");
    if (const char* env = std::getenv("SPARSEFLOW_DATA_ROOT")) g.out = env;
    gen->add_option("--out", g.out, "dataset directory")->required(g.out.empty());
    gen->add_option("--seed", g.seed, "population seed");
    gen->add_option("--preset", g.preset, "desk or paper scale");
    gen->add_option("--geometries", g.geometries, "number of ventricle geometries");
    gen->add_option("--runs", g.runs, "total (geometry, inlet) simulations");
    gen->add_option("--folds", g.folds, "cross-validation fold count");
    gen->add_option("--grid", g.grid, "override grid extent");
    gen->add_option("--steps", g.steps, "override solver steps");
    gen->add_option("--sparse-fraction", g.sparse_fraction, "retained voxel fraction");
    gen->add_option("--inlet-min", g.inlet_min, "lowest inlet velocity, m/s");
    gen->add_option("--inlet-max", g.inlet_max, "highest inlet velocity, m/s");
    gen->add_flag("--keep-nonconverged", g.keep_nonconverged, "keep runs that missed the pressure tolerance");

    TrainArgs t;
    auto* tr = app.add_subcommand("train", "train one (model, component, fold) tuple");
    if (const char* env = std::getenv("SPARSEFLOW_DATA_ROOT")) t.data = env;
    tr->add_option("--data", t.data, "dataset directory")->required(t.data.empty());
    tr->add_option("--out", t.out, "checkpoint path")->required();
    tr->add_option("--model", t.model, "lvadnet3d or unet3d");
    tr->add_option("--component", t.component, "x, y or z");
    tr->add_option("--fold", t.fold, "fold index");
    tr->add_option("--seed", t.seed, "training seed");
    tr->add_option("--preset", t.preset, "desk or paper scale");
    tr->add_option("--epochs", t.epochs, "epoch count");
    tr->add_option("--batch", t.batch, "batch size");
    tr->add_option("--lr", t.lr, "initial learning rate");
    tr->add_option("--lr-min", t.lr_min, "cosine floor");
    tr->add_option("--delta", t.delta, "Huber threshold");
    tr->add_option("--conditioning", t.conditioning, "latent, input or off");
    tr->add_option("--inputs", t.inputs, "sparse or sparse+rdf");
    tr->add_option("--log", t.log, "metrics CSV path");
    tr->add_option("--skips", t.skips, "skip connections on/off");
    tr->add_flag("--resume", t.resume, "continue from the checkpoint at --out");

    EvalArgs e;
    auto* ev = app.add_subcommand("eval", "evaluate trained component models on a fold's test set");
    if (const char* env = std::getenv("SPARSEFLOW_DATA_ROOT")) e.data = env;
    ev->add_option("--data", e.data, "dataset directory")->required(e.data.empty());
    ev->add_option("--out", e.out, "report CSV path")->required();
    ev->add_option("--ckpt-x", e.ckpt_x, "x-component checkpoint");
    ev->add_option("--ckpt-y", e.ckpt_y, "y-component checkpoint");
    ev->add_option("--ckpt-z", e.ckpt_z, "z-component checkpoint");
    ev->add_option("--fold", e.fold, "fold index");
    ev->add_option("--peak", e.peak, "PSNR peak");
    ev->add_option("--slices", e.slices_dir, "directory for mid-plane slice images");
    ev->add_flag("--in-mask", e.in_mask, "restrict metrics to the ventricle");

    AblateArgs b;
    auto* ab = app.add_subcommand("ablate", "run the skip-connection or input-configuration study");
    if (const char* env = std::getenv("SPARSEFLOW_DATA_ROOT")) b.data = env;
    ab->add_option("--data", b.data, "dataset directory")->required(b.data.empty());
    ab->add_option("--out", b.out, "report CSV path")->required();
    ab->add_option("--suite", b.suite, "skip or inputs");
    ab->add_option("--models", b.models, "both, lvadnet3d or unet3d (inputs suite)");
    ab->add_option("--seeds", b.seeds, "comma-separated seed list");
    ab->add_option("--fold", b.fold, "fold index");
    ab->add_option("--preset", b.preset, "desk or paper scale");
    ab->add_option("--epochs", b.epochs, "epochs per ablation training");
    ab->add_option("--batch", b.batch, "batch size");
    ab->add_option("--lr", b.lr, "initial learning rate");

    bool inject_bug = false;
    auto* sc = app.add_subcommand("selfcheck", "run the numeric release gates");
    sc->add_flag("--inject-gradient-bug", inject_bug)->group("");  // hidden test fixture

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_generate(g);
        if (tr->parsed()) return cmd_train(t);
        if (ev->parsed()) return cmd_eval(e);
        if (ab->parsed()) return cmd_ablate(b);
        if (sc->parsed()) return selfcheck_run(std::cout, inject_bug) ? kExitOk : kExitNumeric;
    } catch (const DataError& ex) {
        std::cerr << "data error: " << ex.what() << "\n";
        return kExitData;
    } catch (const NumericError& ex) {
        std::cerr << "numeric error: " << ex.what() << "\n";
        return kExitNumeric;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "usage error: " << ex.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitNumeric;
    }
    return kExitUsage;
}

}  // namespace sparseflow::cli

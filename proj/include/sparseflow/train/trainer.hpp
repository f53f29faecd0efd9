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

#include <chrono>
#include <limits>

#include "sparseflow/data/pipeline.hpp"
#include "sparseflow/models/net.hpp"
#include "sparseflow/train/checkpoint.hpp"
#include "sparseflow/train/optim.hpp"

namespace sparseflow {

struct TrainConfig {
    double lr0 = 1e-3;
    double lr_min = 0.0;
    int64_t epochs = 100;
    double delta = 0.5;  // Huber threshold
    int64_t batch_size = 4;
    uint64_t seed = 0;
    Component component = Component::x;

    void validate() const {
        if (lr0 <= 0 || delta <= 0 || epochs < 1 || batch_size < 1)
            throw std::invalid_argument("TrainConfig: lr0, delta, epochs and batch_size must be positive");
    }
};

template <typename T>
struct TrainSample {
    Tensor<T> input;   // [C,D,H,W]
    Tensor<T> target;  // [1,D,H,W]
    T v_in = T(0);
};

struct EpochMetrics {
    int64_t epoch = 0;
    int64_t step = 0;  // optimizer steps completed
    double lr = 0.0;   // learning rate of the epoch's last step
    double train_huber = 0.0;
    double val_huber = 0.0;
    double wall_ms = 0.0;
};

struct TrainResult {
    std::vector<EpochMetrics> log;
    double best_val = std::numeric_limits<double>::infinity();
    int64_t best_epoch = -1;
    int64_t rejected_steps = 0;  // non-finite gradients
    bool aborted = false;        // non-finite loss; state holds the last finite point
};

// epochs stay out of the fingerprint: --resume may extend the horizon, which
// re-anneals the cosine schedule but is otherwise the same run.
inline uint64_t train_fingerprint(const ModelConfig& mc, const TrainConfig& tc) {
    std::ostringstream os;
    os << mc.fingerprint_text() << ";component=" << component_name(tc.component) << ";lr0=" << tc.lr0
       << ";lr_min=" << tc.lr_min << ";delta=" << tc.delta << ";batch=" << tc.batch_size << ";seed=" << tc.seed;
    return fnv1a64(os.str());
}

/// Owns one training run over a model: shuffled mini-batches, Huber loss,
/// Adam with per-step cosine annealing, per-epoch train/val metrics, and
/// best-validation weight tracking. Resumable through SFCK checkpoints; all
/// randomness derives from (seed, epoch) so a restored run continues
/// bit-identically.
template <typename T>
class Trainer {
public:
    Trainer(ReconNet<T>& model, TrainConfig cfg) : model_(model), cfg_(cfg), adam_(param_tensors(model)) {
        cfg_.validate();
        names_.clear();
        for (auto& [n, t] : model.named_parameters()) names_.push_back(n);
    }

    /// Runs from the current epoch to cfg.epochs (or fewer when until_epoch
    /// caps it, for interruption tests and staged runs). The cosine schedule
    /// always spans the full cfg.epochs horizon.
    TrainResult run(const std::vector<TrainSample<T>>& train_set, const std::vector<TrainSample<T>>& val_set,
                    int64_t until_epoch = -1) {
        if (train_set.empty()) throw std::invalid_argument("train: empty training set");
        TrainResult result;
        result.best_val = best_val_;
        result.best_epoch = best_epoch_;

        const int64_t n = static_cast<int64_t>(train_set.size());
        const int64_t steps_per_epoch = (n + cfg_.batch_size - 1) / cfg_.batch_size;
        const int64_t total_steps = cfg_.epochs * steps_per_epoch;
        const int64_t stop = until_epoch < 0 ? cfg_.epochs : std::min(until_epoch, cfg_.epochs);

        for (int64_t epoch = epoch_; epoch < stop; ++epoch) {
            const auto t0 = std::chrono::steady_clock::now();
            std::vector<int64_t> order(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
            Rng shuffle_rng(substream(cfg_.seed, "train.shuffle", static_cast<uint64_t>(epoch)));
            shuffle_rng.shuffle(order);

            double acc_loss = 0.0;
            int64_t acc_count = 0;
            double last_lr = 0.0;
            int64_t global_step = epoch * steps_per_epoch;
            for (int64_t b = 0; b < n; b += cfg_.batch_size) {
                const int64_t bs = std::min(cfg_.batch_size, n - b);
                auto [xb, yb, vb] = collate(train_set, order, b, bs);
                last_lr = cosine_lr(global_step, total_steps, cfg_.lr0, cfg_.lr_min);

                model_.zero_grad();
                Tape<T> tape;
                double loss_value;
                {
                    TapeScope<T> scope(tape);
                    Tensor<T> pred = model_.forward(xb, vb);
                    Tensor<T> loss = huber_loss(pred, yb, static_cast<T>(cfg_.delta));
                    loss_value = static_cast<double>(loss.item());
                    if (!std::isfinite(loss_value)) {
                        result.aborted = true;
                        result.log.insert(result.log.end(), log_.begin(), log_.end());
                        return result;  // state still holds the last finite point
                    }
                    tape.backward(loss);
                }
                if (!adam_.step(last_lr)) ++result.rejected_steps;
                acc_loss += loss_value * static_cast<double>(bs);
                acc_count += bs;
                ++global_step;
            }

            EpochMetrics em;
            em.epoch = epoch;
            em.step = global_step;
            em.lr = last_lr;
            em.train_huber = acc_loss / static_cast<double>(acc_count);
            em.val_huber = val_set.empty() ? std::numeric_limits<double>::quiet_NaN() : evaluate(val_set);
            em.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            log_.push_back(em);

            const double selection = val_set.empty() ? em.train_huber : em.val_huber;
            if (selection < best_val_) {
                best_val_ = selection;
                best_epoch_ = epoch;
                snapshot_best();
            }
            epoch_ = epoch + 1;
        }
        result.log = log_;
        result.best_val = best_val_;
        result.best_epoch = best_epoch_;
        return result;
    }

    /// Mean Huber loss over a sample set, forward only.
    double evaluate(const std::vector<TrainSample<T>>& set) const {
        double acc = 0.0;
        for (const auto& s : set) {
            Tensor<T> pred = model_.forward(s.input, Tensor<T>::scalar(s.v_in));
            Tensor<T> target = s.target.reshaped({1, s.target.dim(0), s.target.dim(1), s.target.dim(2), s.target.dim(3)});
            acc += static_cast<double>(huber_loss(pred, target, static_cast<T>(cfg_.delta)).item());
        }
        return acc / static_cast<double>(set.size());
    }

    Checkpoint checkpoint(uint64_t fingerprint) {
        Checkpoint ck;
        ck.fingerprint = fingerprint;
        auto params = model_.named_parameters();
        for (size_t i = 0; i < params.size(); ++i) ck.arrays.emplace_back("param:" + names_[i], to_f32(params[i].second.values()));
        for (size_t i = 0; i < params.size(); ++i) ck.arrays.emplace_back("adam.m:" + names_[i], to_f32(adam_.moments1()[i]));
        for (size_t i = 0; i < params.size(); ++i) ck.arrays.emplace_back("adam.v:" + names_[i], to_f32(adam_.moments2()[i]));
        ck.arrays.emplace_back("meta", std::vector<float>{static_cast<float>(epoch_), static_cast<float>(adam_.t()),
                                                          static_cast<float>(best_val_),
                                                          static_cast<float>(best_epoch_)});
        return ck;
    }

    /// Best-validation weights only (for evaluation).
    Checkpoint best_checkpoint(uint64_t fingerprint) const {
        Checkpoint ck;
        ck.fingerprint = fingerprint;
        if (best_weights_.empty()) throw std::logic_error("best_checkpoint: no epoch has completed");
        for (size_t i = 0; i < best_weights_.size(); ++i)
            ck.arrays.emplace_back("param:" + names_[i], to_f32(best_weights_[i]));
        return ck;
    }

    void restore(const Checkpoint& ck) {
        auto params = model_.named_parameters();
        std::vector<std::vector<T>> m, v;
        for (size_t i = 0; i < params.size(); ++i) {
            assign_from_f32(params[i].second.values(), ck.array("param:" + names_[i]), names_[i]);
            m.push_back(from_f32(ck.array("adam.m:" + names_[i])));
            v.push_back(from_f32(ck.array("adam.v:" + names_[i])));
        }
        const auto& meta = ck.array("meta");
        if (meta.size() < 4) throw DataError("checkpoint: malformed meta array");
        epoch_ = static_cast<int64_t>(meta[0]);
        adam_.restore(std::move(m), std::move(v), static_cast<int64_t>(meta[1]));
        best_val_ = static_cast<double>(meta[2]);
        best_epoch_ = static_cast<int64_t>(meta[3]);
    }

    int64_t epochs_completed() const { return epoch_; }
    double best_val() const { return best_val_; }

    /// Loads "param:" arrays of a weights-only checkpoint into a model.
    static void load_weights(ReconNet<T>& model, const Checkpoint& ck) {
        for (auto& [name, t] : model.named_parameters()) assign_from_f32(t.values(), ck.array("param:" + name), name);
    }

private:
    static std::vector<Tensor<T>> param_tensors(ReconNet<T>& model) {
        std::vector<Tensor<T>> out;
        for (auto& [n, t] : model.named_parameters()) out.push_back(t);
        return out;
    }

    static std::vector<float> to_f32(const std::vector<T>& v) {
        std::vector<float> out(v.size());
        for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
        return out;
    }
    static std::vector<T> from_f32(const std::vector<float>& v) {
        std::vector<T> out(v.size());
        for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>(v[i]);
        return out;
    }
    static void assign_from_f32(std::vector<T>& dst, const std::vector<float>& src, const std::string& name) {
        if (dst.size() != src.size())
            throw DataError("checkpoint: array '" + name + "' has " + std::to_string(src.size()) +
                            " elements, model expects " + std::to_string(dst.size()));
        for (size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<T>(src[i]);
    }

    std::tuple<Tensor<T>, Tensor<T>, Tensor<T>> collate(const std::vector<TrainSample<T>>& set,
                                                        const std::vector<int64_t>& order, int64_t from, int64_t bs) {
        const Shape& in_shape = set[0].input.shape();
        const Shape& tar_shape = set[0].target.shape();
        Tensor<T> xb = Tensor<T>::zeros({bs, in_shape[0], in_shape[1], in_shape[2], in_shape[3]});
        Tensor<T> yb = Tensor<T>::zeros({bs, tar_shape[0], tar_shape[1], tar_shape[2], tar_shape[3]});
        Tensor<T> vb = Tensor<T>::zeros({bs});
        const int64_t in_sz = set[0].input.numel(), tar_sz = set[0].target.numel();
        for (int64_t k = 0; k < bs; ++k) {
            const TrainSample<T>& s = set[static_cast<size_t>(order[static_cast<size_t>(from + k)])];
            std::copy_n(s.input.data(), in_sz, xb.data() + k * in_sz);
            std::copy_n(s.target.data(), tar_sz, yb.data() + k * tar_sz);
            vb.data()[k] = s.v_in;
        }
        return {std::move(xb), std::move(yb), std::move(vb)};
    }

    void snapshot_best() {
        best_weights_.clear();
        for (auto& [n, t] : model_.named_parameters()) best_weights_.push_back(t.values());
    }

    ReconNet<T>& model_;
    TrainConfig cfg_;
    Adam<T> adam_;
    std::vector<std::string> names_;
    std::vector<EpochMetrics> log_;
    std::vector<std::vector<T>> best_weights_;
    double best_val_ = std::numeric_limits<double>::infinity();
    int64_t best_epoch_ = -1;
    int64_t epoch_ = 0;
};

/// Builds per-component training samples from normalized dataset samples.
template <typename T>
std::vector<TrainSample<T>> make_train_set(const std::vector<Sample>& samples, Component d, bool with_rdf = true) {
    std::vector<TrainSample<T>> out;
    out.reserve(samples.size());
    for (const Sample& s : samples) {
        auto [input, target] = assemble_input<T>(s, d, with_rdf);
        out.push_back({std::move(input), std::move(target), static_cast<T>(s.v_in)});
    }
    return out;
}

}  // namespace sparseflow

// Copyright (c) 2026 MicroISP contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "adam.hpp"
#include "image_io.hpp"
#include "loss.hpp"
#include "model.hpp"
#include "schedule.hpp"

namespace microisp {

struct EpochStats {
    int stage = 0; // 1-based
    int epoch = 0; // 1-based within the stage
    double loss = 0.0;
    double psnr_db = 0.0; // from the epoch-mean MSE term
};

struct TrainResult {
    std::vector<EpochStats> history;
};

struct TrainOptions {
    std::string checkpoint_dir;            // empty: no checkpoints
    bool resume = false;                   // continue from the last completed stage
    const PerceptualLossFn<float>* vgg = nullptr;
    std::function<void(const EpochStats&)> on_epoch;
    int max_adam_steps = 0;                // 0 = unlimited; early stop for smoke runs
    double stop_at_psnr_db = 0.0;          // 0 = disabled
};

// Runs the schedule: deterministic shuffling and augmentation per
// (seed, stage, epoch), per-sample gradients reduced in sample order,
// one ADAM step per mini-batch. Optimizer state and (when enabled) the frozen
// loss-term normalizers reset at each stage start, which makes a stage
// boundary an exact resume point. Fully reproducible for a fixed seed and any
// thread count.
TrainResult train_loop(Model& model, const std::vector<TrainPair>& data,
                       const TrainingSchedule& sched, const TrainOptions& opts = {});

/// Runs a single stage (exposed mainly for tests); appends to history.
void train_stage(Model& model, const std::vector<TrainPair>& data, const StageConfig& stage,
                 int stage_index, const TrainingSchedule& sched, AdamState& adam,
                 std::vector<EpochStats>& history, const TrainOptions& opts);

/// Analytic whole-model parameter gradients of the composite loss, in
/// param_entries order. Shared by training and the gradient check.
template <typename T>
std::vector<std::vector<T>> model_parameter_gradients(const ModelT<T>& m,
                                                      const Image3<T>& packed,
                                                      const Image3<T>& target,
                                                      const CompositeWeights& w) {
    auto& mut = const_cast<ModelT<T>&>(m);
    std::vector<ParamEntry<T>> entries = param_entries(mut);
    std::vector<std::vector<T>> grads;
    grads.reserve(entries.size());
    for (const auto& e : entries) grads.emplace_back(e.data->size(), T(0));

    Tape<T> tape;
    const int out = tape_forward(m, tape, packed);
    LossResult<T> loss = composite_loss(tape.value(out), target, w, CompositeNormalizers{});
    tape.backward(out, loss.grad, grads);
    return grads;
}

struct GradcheckGroup {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = false;
};

struct GradcheckReport {
    double tolerance = 1e-4;
    bool pass = false;
    std::vector<GradcheckGroup> groups;

    std::string to_text() const;
};

// Compares analytic parameter gradients against central finite differences
// (eps 1e-3), both evaluated in 64-bit, on a random 16x16 packed input with a
// composite MSE+SSIM loss. Reports the max relative error per parameter
// group.
GradcheckReport gradcheck(const ModelConfig& config, double tolerance, uint64_t seed = 0);

} // namespace microisp

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

#include <cstdint>
#include <string>
#include <vector>

#include "model.hpp"

// Inference planning and execution with explicit buffer management.
//
// A plan decomposes the forward pass into a flat op list over logical buffers
// whose lifetimes are known, reuses buffers greedily (first-fit by size), and
// reports the peak of simultaneously live activation bytes. Weights are not
// counted. Plan execution is bitwise identical to forward() in both branch
// modes because it invokes the same kernels on the same values in the same
// per-value order.

namespace microisp {

enum class BranchMode : uint8_t { kSequential = 0, kParallel = 1 };

enum class StepOp : uint8_t {
    kConv,
    kPRelu,
    kDepthToSpace,
    kGlobalAvgPool,
    kSigmoid,
    kAdd,
    kScaleInPlace, // channel_scale writing over its spatial input
    kWriteChannel, // copy a 1-channel plane into one output channel
    kClamp,        // in-place clamp of the output buffer
};

/// Names one weight tensor of the model structurally.
enum class WeightSlot : uint8_t {
    kNone = 0,
    kConv1,
    kAct1,
    kConv2,
    kAct2,
    kAttnReduce,
    kAttnBody0,
    kAttnBody1,
    kAttnBody2,
    kAttnBodyAct0,
    kAttnBodyAct1,
    kAttnBodyAct2,
    kAttnHead1,
    kAttnHeadAct,
    kAttnHead2,
    kTail,
};

struct WeightRef {
    int8_t branch = -1;
    int8_t block = -1;
    WeightSlot slot = WeightSlot::kNone;
};

struct PlanStep {
    StepOp op;
    std::string name;
    WeightRef wref;
    int stride = 1;
    int in0 = -1; // logical buffer ids
    int in1 = -1;
    int out = -1;
    int out_channel = -1; // kWriteChannel only
    int branch = -1;      // -1 = shared prologue/epilogue
};

struct PlanValue {
    int h = 0, w = 0, c = 0;
    uint64_t bytes = 0;
    int branch = -1;   // owning branch, -1 = shared (input/output)
    int alias_of = -1; // in-place ops share the producer's storage
    int def_step = -1; // -1 for the external input
    int last_use = -1;
    int physical = -1; // arena buffer id; -1 external (input/output)
};

struct ExecutionPlan {
    ModelConfig config;
    int packed_h = 0;
    int packed_w = 0;
    BranchMode mode = BranchMode::kSequential;
    std::vector<PlanStep> steps;
    std::vector<PlanValue> values;
    int input_value = -1;
    int output_value = -1;
    std::vector<uint64_t> physical_sizes; // arena buffers (input/output excluded)
    uint64_t peak_bytes = 0;  // max over time of the live activation byte sum
    uint64_t arena_bytes = 0; // input + output + all physical buffers
};

/// Builds a plan for packed inputs of the given size. Dims must be >= 16.
ExecutionPlan build_plan(const Model& model, int packed_h, int packed_w, BranchMode mode);

/// Runs the plan. The model must match the one the plan was built for.
Tensor execute(const ExecutionPlan& plan, const Model& model, const Tensor& packed);

// Replays the plan and verifies no step reads a logical buffer whose storage
// was handed to another buffer in the meantime. Throws ContractError on
// violation.
void verify_plan_liveness(const ExecutionPlan& plan);

struct LayerCost {
    std::string name;
    int64_t macs = 0;
    uint64_t live_bytes = 0; // live activation bytes while this step runs
    double time_us = 0.0;    // benchmark mode only
};

struct CostReport {
    std::vector<LayerCost> layers;
    int64_t total_macs = 0;
    uint64_t peak_bytes = 0;
    uint64_t arena_bytes = 0;
    uint64_t measured_alloc_bytes = 0; // benchmark mode: instrumented allocation
    double median_wall_us = 0.0;       // benchmark mode: median over repetitions
    int repetitions = 0;
    BranchMode mode = BranchMode::kSequential;
    int packed_h = 0;
    int packed_w = 0;

    std::string to_text() const;
};

/// Closed-form MAC counts per layer (no execution).
CostReport count_flops(const Model& model, int packed_h, int packed_w);

/// Executes `repetitions` runs and reports median wall time, per-layer times
/// and the measured allocation. Timings are informational.
CostReport benchmark(const Model& model, int packed_h, int packed_w, BranchMode mode,
                     int repetitions);

/// Sum of MACs of all attention steps of one block (branch 0, block 0).
int64_t attention_block_macs(const CostReport& report);

const ConvWeights& resolve_conv(const Model& model, const WeightRef& ref);
const PReLUParams& resolve_act(const Model& model, const WeightRef& ref);

} // namespace microisp

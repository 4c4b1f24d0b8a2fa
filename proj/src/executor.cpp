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

#include "executor.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "parallel.hpp"
#include "rng.hpp"

namespace microisp {

const ConvWeights& resolve_conv(const Model& model, const WeightRef& ref) {
    require(ref.branch >= 0 && ref.branch < 3, "plan: bad branch in weight ref");
    const BranchParams& br = model.branches[static_cast<size_t>(ref.branch)];
    if (ref.slot == WeightSlot::kTail) return br.tail;
    require(ref.block >= 0 && ref.block < static_cast<int>(br.blocks.size()),
            "plan: bad block in weight ref");
    const BlockParams& blk = br.blocks[static_cast<size_t>(ref.block)];
    switch (ref.slot) {
    case WeightSlot::kConv1: return blk.conv1;
    case WeightSlot::kConv2: return blk.conv2;
    case WeightSlot::kAttnReduce: return blk.attn.reduce;
    case WeightSlot::kAttnBody0: return blk.attn.body[0];
    case WeightSlot::kAttnBody1: return blk.attn.body[1];
    case WeightSlot::kAttnBody2: return blk.attn.body[2];
    case WeightSlot::kAttnHead1: return blk.attn.head1;
    case WeightSlot::kAttnHead2: return blk.attn.head2;
    default: throw ContractError("plan: weight ref does not name a convolution");
    }
}

const PReLUParams& resolve_act(const Model& model, const WeightRef& ref) {
    require(ref.branch >= 0 && ref.branch < 3, "plan: bad branch in weight ref");
    const BranchParams& br = model.branches[static_cast<size_t>(ref.branch)];
    require(ref.block >= 0 && ref.block < static_cast<int>(br.blocks.size()),
            "plan: bad block in weight ref");
    const BlockParams& blk = br.blocks[static_cast<size_t>(ref.block)];
    switch (ref.slot) {
    case WeightSlot::kAct1: return blk.act1;
    case WeightSlot::kAct2: return blk.act2;
    case WeightSlot::kAttnBodyAct0: return blk.attn.body_act[0];
    case WeightSlot::kAttnBodyAct1: return blk.attn.body_act[1];
    case WeightSlot::kAttnBodyAct2: return blk.attn.body_act[2];
    case WeightSlot::kAttnHeadAct: return blk.attn.head_act;
    default: throw ContractError("plan: weight ref does not name an activation");
    }
}

namespace {

int storage_root(const ExecutionPlan& plan, int value) {
    while (plan.values[static_cast<size_t>(value)].alias_of >= 0) {
        value = plan.values[static_cast<size_t>(value)].alias_of;
    }
    return value;
}

class PlanBuilder {
public:
    PlanBuilder(const Model& model, int packed_h, int packed_w, BranchMode mode)
        : model_(model) {
        plan_.config = model.config;
        plan_.packed_h = packed_h;
        plan_.packed_w = packed_w;
        plan_.mode = mode;
        plan_.input_value = new_value(packed_h, packed_w, 4, -1, -1);
        plan_.values[0].def_step = -1;
        plan_.output_value = new_value(packed_h * 2, packed_w * 2, 3, -1, -1);
    }

    ExecutionPlan build() {
        for (int b = 0; b < 3; ++b) build_branch(b);
        if (model_.config.clamp_output) {
            PlanStep s;
            s.op = StepOp::kClamp;
            s.name = "clamp";
            s.in0 = plan_.output_value;
            s.out = plan_.output_value;
            s.branch = -1;
            touch(plan_.output_value);
            plan_.steps.push_back(std::move(s));
        }
        // The output buffer is the result; it stays live to the end.
        plan_.values[static_cast<size_t>(plan_.output_value)].last_use =
            static_cast<int>(plan_.steps.size());
        finalize();
        return std::move(plan_);
    }

private:
    int new_value(int h, int w, int c, int branch, int alias_of) {
        PlanValue v;
        v.h = h;
        v.w = w;
        v.c = c;
        v.bytes = static_cast<uint64_t>(h) * w * c * sizeof(float);
        v.branch = branch;
        v.alias_of = alias_of;
        plan_.values.push_back(v);
        return static_cast<int>(plan_.values.size()) - 1;
    }

    void touch(int value) {
        plan_.values[static_cast<size_t>(value)].last_use =
            std::max(plan_.values[static_cast<size_t>(value)].last_use,
                     static_cast<int>(plan_.steps.size()));
    }

    int emit(StepOp op, std::string name, WeightRef wref, int stride, int in0, int in1,
             int oh, int ow, int oc, int branch, int alias_of = -1) {
        const int out = new_value(oh, ow, oc, branch, alias_of);
        touch(in0);
        if (in1 >= 0) touch(in1);
        PlanStep s;
        s.op = op;
        s.name = std::move(name);
        s.wref = wref;
        s.stride = stride;
        s.in0 = in0;
        s.in1 = in1;
        s.out = out;
        s.branch = branch;
        plan_.values[static_cast<size_t>(out)].def_step = static_cast<int>(plan_.steps.size());
        plan_.steps.push_back(std::move(s));
        return out;
    }

    const PlanValue& val(int id) const { return plan_.values[static_cast<size_t>(id)]; }

    int emit_conv(int x, WeightRef ref, int stride, const std::string& name, int branch) {
        const ConvWeights& w = resolve_conv(model_, ref);
        return emit(StepOp::kConv, name, ref, stride, x, -1, conv_out_dim(val(x).h, stride),
                    conv_out_dim(val(x).w, stride), w.cout, branch);
    }

    int emit_act(int x, WeightRef ref, const std::string& name, int branch) {
        return emit(StepOp::kPRelu, name, ref, 1, x, -1, val(x).h, val(x).w, val(x).c, branch);
    }

    void build_branch(int b) {
        const BranchParams& branch = model_.branches[static_cast<size_t>(b)];
        const auto i8 = [](int v) { return static_cast<int8_t>(v); };
        const std::string bp = "b" + std::to_string(b);
        int x = plan_.input_value;
        for (int k = 0; k < static_cast<int>(branch.blocks.size()); ++k) {
            const BlockParams& blk = branch.blocks[static_cast<size_t>(k)];
            const std::string kp = bp + ".blk" + std::to_string(k);
            int y = emit_act(emit_conv(x, {i8(b), i8(k), WeightSlot::kConv1}, 1, kp + ".conv1", b),
                             {i8(b), i8(k), WeightSlot::kAct1}, kp + ".act1", b);
            if (!blk.conv2.empty()) {
                y = emit_act(emit_conv(y, {i8(b), i8(k), WeightSlot::kConv2}, 1, kp + ".conv2", b),
                             {i8(b), i8(k), WeightSlot::kAct2}, kp + ".act2", b);
            }
            if (model_.config.attention != AttentionVariant::kNone) {
                int pooled;
                if (model_.config.attention == AttentionVariant::kEnhanced) {
                    int t = emit_conv(y, {i8(b), i8(k), WeightSlot::kAttnReduce}, 3,
                                      kp + ".attn.reduce", b);
                    const WeightSlot body[3] = {WeightSlot::kAttnBody0, WeightSlot::kAttnBody1,
                                                WeightSlot::kAttnBody2};
                    const WeightSlot body_act[3] = {WeightSlot::kAttnBodyAct0,
                                                    WeightSlot::kAttnBodyAct1,
                                                    WeightSlot::kAttnBodyAct2};
                    for (int i = 0; i < 3; ++i) {
                        t = emit_conv(t, {i8(b), i8(k), body[i]}, 3,
                                      kp + ".attn.body" + std::to_string(i), b);
                        t = emit_act(t, {i8(b), i8(k), body_act[i]},
                                     kp + ".attn.body" + std::to_string(i) + "_act", b);
                    }
                    pooled = emit(StepOp::kGlobalAvgPool, kp + ".attn.pool", {}, 1, t, -1, 1, 1, 4, b);
                } else {
                    pooled = emit(StepOp::kGlobalAvgPool, kp + ".attn.pool", {}, 1, y, -1, 1, 1, 4, b);
                }
                int h = emit_act(emit_conv(pooled, {i8(b), i8(k), WeightSlot::kAttnHead1}, 1,
                                           kp + ".attn.head1", b),
                                 {i8(b), i8(k), WeightSlot::kAttnHeadAct}, kp + ".attn.head_act", b);
                h = emit_conv(h, {i8(b), i8(k), WeightSlot::kAttnHead2}, 1, kp + ".attn.head2", b);
                const int coeff = emit(StepOp::kSigmoid, kp + ".attn.sigmoid", {}, 1, h, -1, 1, 1, 4, b);
                // Gating is elementwise, so it reuses the gated buffer in place.
                y = emit(StepOp::kScaleInPlace, kp + ".attn.scale", {}, 1, y, coeff, val(y).h,
                         val(y).w, val(y).c, b, /*alias_of=*/y);
            }
            x = emit(StepOp::kAdd, kp + ".add", {}, 1, x, y, val(y).h, val(y).w, val(y).c, b);
        }
        const int tail = emit_conv(x, {i8(b), i8(-1), WeightSlot::kTail}, 1, bp + ".tail", b);
        const int up = emit(StepOp::kDepthToSpace, bp + ".d2s", {}, 1, tail, -1, val(tail).h * 2,
                            val(tail).w * 2, 1, b);
        // Writing straight into the output channel releases the branch buffer
        // before the next branch runs.
        touch(up);
        PlanStep s;
        s.op = StepOp::kWriteChannel;
        s.name = bp + ".write";
        s.in0 = up;
        s.out = plan_.output_value;
        s.out_channel = b;
        s.branch = b;
        PlanValue& ov = plan_.values[static_cast<size_t>(plan_.output_value)];
        if (ov.def_step < 0) ov.def_step = static_cast<int>(plan_.steps.size());
        ov.last_use = std::max(ov.last_use, static_cast<int>(plan_.steps.size()));
        plan_.steps.push_back(std::move(s));
    }

    // Storage intervals, peak accounting and greedy first-fit physical
    // assignment.
    void finalize() {
        const int n_values = static_cast<int>(plan_.values.size());
        const int n_steps = static_cast<int>(plan_.steps.size());

        // Collapse alias chains into storages.
        struct Storage {
            uint64_t bytes = 0;
            int branch = -1;
            int start = 0;
            int end = -1;
            bool external = false;
            int physical = -1;
        };
        std::map<int, Storage> storages; // root value id -> storage
        for (int v = 0; v < n_values; ++v) {
            const int root = storage_root(plan_, v);
            Storage& s = storages[root];
            const PlanValue& pv = plan_.values[static_cast<size_t>(v)];
            s.bytes = std::max(s.bytes, pv.bytes);
            s.branch = plan_.values[static_cast<size_t>(root)].branch;
            if (v == root) s.start = std::max(pv.def_step, 0);
            s.end = std::max(s.end, pv.last_use);
            if (root == plan_.input_value || root == plan_.output_value) s.external = true;
        }

        // Logical peak: max over steps of the live storage byte sum. For the
        // parallel mode the per-branch peaks are summed (worst-case
        // interleaving), shared buffers counted once.
        auto live_at = [&](const Storage& s, int t) { return s.start <= t && t <= s.end; };
        uint64_t peak = 0;
        if (plan_.mode == BranchMode::kSequential) {
            for (int t = 0; t < n_steps; ++t) {
                uint64_t live = 0;
                for (const auto& [root, s] : storages) {
                    if (live_at(s, t)) live += s.bytes;
                }
                peak = std::max(peak, live);
            }
        } else {
            uint64_t shared = 0;
            for (const auto& [root, s] : storages) {
                if (s.branch < 0) shared += s.bytes;
            }
            uint64_t total = shared;
            for (int b = 0; b < 3; ++b) {
                uint64_t branch_peak = 0;
                for (int t = 0; t < n_steps; ++t) {
                    if (plan_.steps[static_cast<size_t>(t)].branch != b) continue;
                    uint64_t live = 0;
                    for (const auto& [root, s] : storages) {
                        if (s.branch == b && live_at(s, t)) live += s.bytes;
                    }
                    branch_peak = std::max(branch_peak, live);
                }
                total += branch_peak;
            }
            peak = total;
        }
        plan_.peak_bytes = peak;

        // Physical assignment. Sequential mode shares one pool; parallel mode
        // keeps a pool per branch so branches never share buffers.
        std::vector<int> order;
        for (const auto& [root, s] : storages) {
            if (!s.external) order.push_back(root);
        }
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            const auto& sa = storages[a];
            const auto& sb = storages[b];
            return sa.start != sb.start ? sa.start < sb.start : a < b;
        });
        const int n_pools = plan_.mode == BranchMode::kParallel ? 3 : 1;
        std::vector<std::set<std::pair<uint64_t, int>>> free_pool(static_cast<size_t>(n_pools));
        std::vector<std::set<std::pair<int, int>>> active(static_cast<size_t>(n_pools)); // (end, root)
        for (int root : order) {
            Storage& s = storages[root];
            const int pool = n_pools == 1 ? 0 : s.branch;
            require(pool >= 0 && pool < n_pools, "plan: branch-parallel storage without a branch");
            auto& fp = free_pool[static_cast<size_t>(pool)];
            auto& act = active[static_cast<size_t>(pool)];
            while (!act.empty() && act.begin()->first < s.start) {
                const int done_root = act.begin()->second;
                act.erase(act.begin());
                const Storage& d = storages[done_root];
                fp.insert({plan_.physical_sizes[static_cast<size_t>(d.physical)], d.physical});
            }
            // First fit by size: smallest free buffer that is large enough.
            auto it = fp.lower_bound({s.bytes, -1});
            if (it != fp.end()) {
                s.physical = it->second;
                fp.erase(it);
            } else {
                s.physical = static_cast<int>(plan_.physical_sizes.size());
                plan_.physical_sizes.push_back(s.bytes);
            }
            act.insert({s.end, root});
        }

        for (int v = 0; v < n_values; ++v) {
            plan_.values[static_cast<size_t>(v)].physical =
                storages[storage_root(plan_, v)].physical;
        }
        uint64_t arena = storages[plan_.input_value].bytes + storages[plan_.output_value].bytes;
        for (uint64_t b : plan_.physical_sizes) arena += b;
        plan_.arena_bytes = arena;
    }

    const Model& model_;
    ExecutionPlan plan_;
};

} // namespace

ExecutionPlan build_plan(const Model& model, int packed_h, int packed_w, BranchMode mode) {
    model.config.validate();
    if (packed_h < 16 || packed_w < 16) {
        throw ConfigError("build_plan: packed dims must be at least 16x16");
    }
    return PlanBuilder(model, packed_h, packed_w, mode).build();
}

namespace {

struct ExecStats {
    std::vector<double> step_us;
    uint64_t allocated_bytes = 0;
};

Tensor execute_impl(const ExecutionPlan& plan, const Model& model, const Tensor& packed,
                    ExecStats* stats) {
    require(model.config == plan.config, "execute: model does not match the plan");
    require(packed.c == 4, "execute: packed input must have 4 channels");
    require(packed.h == plan.packed_h && packed.w == plan.packed_w,
            "execute: input dims do not match the plan");

    std::vector<std::vector<float>> arena(plan.physical_sizes.size());
    uint64_t allocated = 0;
    for (size_t i = 0; i < arena.size(); ++i) {
        arena[i].resize(plan.physical_sizes[i] / sizeof(float));
        allocated += plan.physical_sizes[i];
    }
    Tensor result(plan.packed_h * 2, plan.packed_w * 2, 3);
    allocated += result.size() * sizeof(float) + packed.size() * sizeof(float);
    if (stats) {
        stats->allocated_bytes = allocated;
        stats->step_us.assign(plan.steps.size(), 0.0);
    }

    auto buffer_of = [&](int value) -> float* {
        const int root = storage_root(plan, value);
        if (root == plan.input_value) {
            // The input is never the output of any step.
            return const_cast<float*>(packed.data.data());
        }
        if (root == plan.output_value) return result.data.data();
        return arena[static_cast<size_t>(plan.values[static_cast<size_t>(root)].physical)].data();
    };

    auto run_step = [&](size_t idx) {
        const PlanStep& s = plan.steps[idx];
        const PlanValue& vin = plan.values[static_cast<size_t>(s.in0)];
        const PlanValue& vout = plan.values[static_cast<size_t>(s.out)];
        const auto t0 = std::chrono::steady_clock::now();
        switch (s.op) {
        case StepOp::kConv:
            kern::conv2d(buffer_of(s.in0), vin.h, vin.w, resolve_conv(model, s.wref), s.stride,
                         buffer_of(s.out));
            break;
        case StepOp::kPRelu:
            kern::prelu(buffer_of(s.in0), static_cast<size_t>(vin.h) * vin.w * vin.c, vin.c,
                        resolve_act(model, s.wref).alpha.data(), buffer_of(s.out));
            break;
        case StepOp::kDepthToSpace:
            kern::depth_to_space(buffer_of(s.in0), vin.h, vin.w, vin.c, buffer_of(s.out));
            break;
        case StepOp::kGlobalAvgPool:
            kern::global_avg_pool(buffer_of(s.in0), vin.h, vin.w, vin.c, buffer_of(s.out));
            break;
        case StepOp::kSigmoid:
            kern::sigmoid(buffer_of(s.in0), static_cast<size_t>(vin.h) * vin.w * vin.c,
                          buffer_of(s.out));
            break;
        case StepOp::kAdd:
            kern::add(buffer_of(s.in0), buffer_of(s.in1),
                      static_cast<size_t>(vin.h) * vin.w * vin.c, buffer_of(s.out));
            break;
        case StepOp::kScaleInPlace:
            kern::channel_scale(buffer_of(s.in0), buffer_of(s.in1),
                                static_cast<size_t>(vin.h) * vin.w * vin.c, vin.c,
                                buffer_of(s.out));
            break;
        case StepOp::kWriteChannel:
            kern::write_channel(buffer_of(s.in0), static_cast<size_t>(vin.h) * vin.w,
                                result.data.data(), 3, s.out_channel);
            break;
        case StepOp::kClamp:
            kern::clamp01(result.data.data(), result.size());
            break;
        default:
            throw ContractError("execute: unknown step op");
        }
        if (stats) {
            const auto t1 = std::chrono::steady_clock::now();
            stats->step_us[idx] = std::chrono::duration<double, std::micro>(t1 - t0).count();
        }
        (void)vout;
    };

    if (plan.mode == BranchMode::kSequential) {
        for (size_t i = 0; i < plan.steps.size(); ++i) run_step(i);
    } else {
        std::vector<std::function<void()>> tasks;
        for (int b = 0; b < 3; ++b) {
            tasks.push_back([&, b] {
                for (size_t i = 0; i < plan.steps.size(); ++i) {
                    if (plan.steps[i].branch == b) run_step(i);
                }
            });
        }
        parallel_tasks(tasks);
        for (size_t i = 0; i < plan.steps.size(); ++i) {
            if (plan.steps[i].branch < 0) run_step(i);
        }
    }
    return result;
}

} // namespace

Tensor execute(const ExecutionPlan& plan, const Model& model, const Tensor& packed) {
    return execute_impl(plan, model, packed, nullptr);
}

void verify_plan_liveness(const ExecutionPlan& plan) {
    // Replay in plan order (branch step ranges are contiguous, so this is a
    // valid linearization of the parallel mode too) and check that the storage
    // backing every read still holds that buffer's value.
    std::map<int, int> holder; // physical id -> storage root currently stored
    auto check_read = [&](int value, const std::string& step) {
        const int root = storage_root(plan, value);
        if (root == plan.input_value || root == plan.output_value) return;
        const int phys = plan.values[static_cast<size_t>(root)].physical;
        auto it = holder.find(phys);
        require(it != holder.end() && it->second == root,
                "liveness violation: step '" + step + "' reads a reused buffer");
    };
    for (const PlanStep& s : plan.steps) {
        check_read(s.in0, s.name);
        if (s.in1 >= 0) check_read(s.in1, s.name);
        const int out_root = storage_root(plan, s.out);
        if (out_root != plan.input_value && out_root != plan.output_value) {
            holder[plan.values[static_cast<size_t>(out_root)].physical] = out_root;
        }
    }
}

namespace {

int64_t step_macs(const ExecutionPlan& plan, const Model& model, const PlanStep& s) {
    const PlanValue& vin = plan.values[static_cast<size_t>(s.in0)];
    const PlanValue& vout = plan.values[static_cast<size_t>(s.out)];
    switch (s.op) {
    case StepOp::kConv: {
        const ConvWeights& w = resolve_conv(model, s.wref);
        return static_cast<int64_t>(vout.h) * vout.w * w.kh * w.kw * w.cin * w.cout;
    }
    case StepOp::kPRelu:
    case StepOp::kSigmoid:
    case StepOp::kAdd:
    case StepOp::kScaleInPlace:
        return static_cast<int64_t>(vout.h) * vout.w * vout.c;
    case StepOp::kGlobalAvgPool:
        return static_cast<int64_t>(vin.h) * vin.w * vin.c;
    case StepOp::kDepthToSpace:
    case StepOp::kWriteChannel:
    case StepOp::kClamp:
        return 0;
    }
    return 0;
}

std::vector<uint64_t> per_step_live_bytes(const ExecutionPlan& plan) {
    // Live byte accounting per step in the sequential linearization.
    const int n_steps = static_cast<int>(plan.steps.size());
    std::map<int, std::pair<int, int>> intervals; // root -> [start, end]
    std::map<int, uint64_t> sizes;
    for (int v = 0; v < static_cast<int>(plan.values.size()); ++v) {
        const int root = storage_root(plan, v);
        const PlanValue& pv = plan.values[static_cast<size_t>(v)];
        auto& iv = intervals.emplace(root, std::make_pair(std::numeric_limits<int>::max(), -1)).first->second;
        if (v == root) iv.first = std::max(pv.def_step, 0);
        iv.second = std::max(iv.second, pv.last_use);
        auto& sz = sizes[root];
        sz = std::max(sz, pv.bytes);
    }
    std::vector<uint64_t> live(static_cast<size_t>(n_steps), 0);
    for (int t = 0; t < n_steps; ++t) {
        uint64_t sum = 0;
        for (const auto& [root, iv] : intervals) {
            if (iv.first <= t && t <= iv.second) sum += sizes[root];
        }
        live[static_cast<size_t>(t)] = sum;
    }
    return live;
}

CostReport report_from_plan(const ExecutionPlan& plan, const Model& model) {
    CostReport r;
    r.mode = plan.mode;
    r.packed_h = plan.packed_h;
    r.packed_w = plan.packed_w;
    r.peak_bytes = plan.peak_bytes;
    r.arena_bytes = plan.arena_bytes;
    const std::vector<uint64_t> live = per_step_live_bytes(plan);
    for (size_t i = 0; i < plan.steps.size(); ++i) {
        LayerCost lc;
        lc.name = plan.steps[i].name;
        lc.macs = step_macs(plan, model, plan.steps[i]);
        lc.live_bytes = live[i];
        r.layers.push_back(std::move(lc));
        r.total_macs += r.layers.back().macs;
    }
    return r;
}

} // namespace

CostReport count_flops(const Model& model, int packed_h, int packed_w) {
    const ExecutionPlan plan = build_plan(model, packed_h, packed_w, BranchMode::kSequential);
    return report_from_plan(plan, model);
}

CostReport benchmark(const Model& model, int packed_h, int packed_w, BranchMode mode,
                     int repetitions) {
    if (repetitions < 1) throw ConfigError("benchmark: repetitions must be >= 1");
    const ExecutionPlan plan = build_plan(model, packed_h, packed_w, mode);
    CostReport r = report_from_plan(plan, model);
    r.repetitions = repetitions;

    Tensor input(packed_h, packed_w, 4);
    Rng rng(0xBE9C11);
    for (auto& v : input.data) v = static_cast<float>(rng.uniform());

    std::vector<double> totals;
    std::vector<std::vector<double>> step_times(plan.steps.size());
    for (int rep = 0; rep < repetitions; ++rep) {
        ExecStats stats;
        const auto t0 = std::chrono::steady_clock::now();
        Tensor out = execute_impl(plan, model, input, &stats);
        const auto t1 = std::chrono::steady_clock::now();
        (void)out;
        totals.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
        for (size_t i = 0; i < stats.step_us.size(); ++i) step_times[i].push_back(stats.step_us[i]);
        r.measured_alloc_bytes = stats.allocated_bytes;
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    r.median_wall_us = median(totals);
    for (size_t i = 0; i < r.layers.size(); ++i) r.layers[i].time_us = median(step_times[i]);
    return r;
}

int64_t attention_block_macs(const CostReport& report) {
    int64_t total = 0;
    for (const LayerCost& lc : report.layers) {
        if (lc.name.rfind("b0.blk0.attn.", 0) == 0) total += lc.macs;
    }
    return total;
}

std::string CostReport::to_text() const {
    std::ostringstream os;
    os << "# microisp cost report\n";
    os << "mode " << (mode == BranchMode::kSequential ? "sequential" : "parallel") << "\n";
    os << "input_packed " << packed_w << "x" << packed_h << "x4\n";
    os << "total_macs " << total_macs << "\n";
    os << "peak_bytes " << peak_bytes << "\n";
    os << "arena_bytes " << arena_bytes << "\n";
    if (repetitions > 0) {
        os << "repetitions " << repetitions << "\n";
        os << "median_wall_us " << median_wall_us << "\n";
        os << "measured_alloc_bytes " << measured_alloc_bytes << "\n";
        os << "alloc_overhead_bytes "
           << (measured_alloc_bytes > peak_bytes ? measured_alloc_bytes - peak_bytes : 0) << "\n";
    }
    os << "# layer macs live_bytes time_us\n";
    for (const LayerCost& lc : layers) {
        os << "layer " << lc.name << " " << lc.macs << " " << lc.live_bytes << " " << lc.time_us
           << "\n";
    }
    return os.str();
}

} // namespace microisp

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

#include <vector>

#include "ops.hpp"

namespace microisp {

enum class OpKind {
    kInput,
    kConv,
    kPRelu,
    kSpaceToDepth,
    kDepthToSpace,
    kGlobalAvgPool,
    kSigmoid,
    kAdd,
    kChannelScale,
    kConcat3,
};

// Records the forward op sequence of one network evaluation so gradients can
// be composed by a reverse traversal. Each recorded op produces exactly one
// value; node index == value index. Not a general autodiff graph: only the op
// set the MicroISP architecture needs is supported.
//
// Parameter gradients accumulate into caller-owned flat arrays addressed by
// the param ids passed at record time; id -1 marks a non-learnable parameter
// (e.g. fixed leaky-relu slopes) and is skipped.
template <typename T>
class Tape {
public:
    int input(Image3<T> v) {
        nodes_.push_back(Node{OpKind::kInput, -1, -1, -1, 0, nullptr, nullptr, -1, -1, -1});
        values_.push_back(std::move(v));
        return last();
    }

    int conv(int x, const ConvWeightsT<T>& w, int stride, int kernel_param, int bias_param) {
        Image3<T> out = conv2d(values_[check(x)], w, stride);
        nodes_.push_back(Node{OpKind::kConv, x, -1, -1, stride, &w, nullptr, kernel_param, bias_param, -1});
        values_.push_back(std::move(out));
        return last();
    }

    int prelu_op(int x, const PReLUParamsT<T>& p, int alpha_param) {
        Image3<T> out = prelu(values_[check(x)], p);
        nodes_.push_back(Node{OpKind::kPRelu, x, -1, -1, 0, nullptr, &p, -1, -1, alpha_param});
        values_.push_back(std::move(out));
        return last();
    }

    int space_to_depth_op(int x) { return simple(OpKind::kSpaceToDepth, space_to_depth(values_[check(x)]), x); }
    int depth_to_space_op(int x) { return simple(OpKind::kDepthToSpace, depth_to_space(values_[check(x)]), x); }
    int global_avg_pool_op(int x) { return simple(OpKind::kGlobalAvgPool, global_avg_pool(values_[check(x)]), x); }
    int sigmoid_op(int x) { return simple(OpKind::kSigmoid, sigmoid(values_[check(x)]), x); }

    int add_op(int a, int b) {
        Image3<T> out = add(values_[check(a)], values_[check(b)]);
        nodes_.push_back(Node{OpKind::kAdd, a, b, -1, 0, nullptr, nullptr, -1, -1, -1});
        values_.push_back(std::move(out));
        return last();
    }

    int channel_scale_op(int x, int s) {
        Image3<T> out = channel_scale(values_[check(x)], values_[check(s)]);
        nodes_.push_back(Node{OpKind::kChannelScale, x, s, -1, 0, nullptr, nullptr, -1, -1, -1});
        values_.push_back(std::move(out));
        return last();
    }

    int concat3_op(int a, int b, int c) {
        Image3<T> out = concat_channels<T>({&values_[check(a)], &values_[check(b)], &values_[check(c)]});
        nodes_.push_back(Node{OpKind::kConcat3, a, b, c, 0, nullptr, nullptr, -1, -1, -1});
        values_.push_back(std::move(out));
        return last();
    }

    const Image3<T>& value(int id) const { return values_[check(id)]; }
    int size() const { return static_cast<int>(nodes_.size()); }

    // Seeds d(output)/d(output) = seed and walks the tape in reverse,
    // accumulating into param_grads (indexed by the param ids recorded above).
    void backward(int output, const Image3<T>& seed,
                  std::vector<std::vector<T>>& param_grads) const {
        require(seed.same_shape(values_[check(output)]), "tape backward: seed dims mismatch");
        std::vector<Image3<T>> grads(values_.size());
        grads[static_cast<size_t>(output)] = seed;

        for (int i = output; i >= 0; --i) {
            const Node& n = nodes_[static_cast<size_t>(i)];
            Image3<T>& g = grads[static_cast<size_t>(i)];
            if (g.data.empty()) continue; // value does not influence the output
            switch (n.kind) {
            case OpKind::kInput:
                break;
            case OpKind::kConv: {
                Image3<T> gx;
                ConvWeightsT<T> gw;
                conv2d_vjp(values_[static_cast<size_t>(n.in0)], *n.w, n.stride, g, &gx,
                           (n.param_kernel >= 0 || n.param_bias >= 0) ? &gw : nullptr);
                accumulate(grads, n.in0, std::move(gx));
                if (n.param_kernel >= 0) add_into(param_grads[static_cast<size_t>(n.param_kernel)], gw.kernel);
                if (n.param_bias >= 0) add_into(param_grads[static_cast<size_t>(n.param_bias)], gw.bias);
                break;
            }
            case OpKind::kPRelu: {
                Image3<T> gx;
                std::vector<T> ga;
                prelu_vjp(values_[static_cast<size_t>(n.in0)], *n.p, g, &gx,
                          n.param_alpha >= 0 ? &ga : nullptr);
                accumulate(grads, n.in0, std::move(gx));
                if (n.param_alpha >= 0) add_into(param_grads[static_cast<size_t>(n.param_alpha)], ga);
                break;
            }
            case OpKind::kSpaceToDepth:
                accumulate(grads, n.in0, depth_to_space(g));
                break;
            case OpKind::kDepthToSpace:
                accumulate(grads, n.in0, space_to_depth(g));
                break;
            case OpKind::kGlobalAvgPool: {
                Image3<T> gx;
                global_avg_pool_vjp(values_[static_cast<size_t>(n.in0)], g, &gx);
                accumulate(grads, n.in0, std::move(gx));
                break;
            }
            case OpKind::kSigmoid: {
                Image3<T> gx;
                sigmoid_vjp(values_[static_cast<size_t>(i)], g, &gx);
                accumulate(grads, n.in0, std::move(gx));
                break;
            }
            case OpKind::kAdd:
                accumulate(grads, n.in0, g);
                accumulate(grads, n.in1, g);
                break;
            case OpKind::kChannelScale: {
                Image3<T> gx, gs;
                channel_scale_vjp(values_[static_cast<size_t>(n.in0)], values_[static_cast<size_t>(n.in1)], g, &gx, &gs);
                accumulate(grads, n.in0, std::move(gx));
                accumulate(grads, n.in1, std::move(gs));
                break;
            }
            case OpKind::kConcat3: {
                const int ids[3] = {n.in0, n.in1, n.in2};
                int c0 = 0;
                for (int part = 0; part < 3; ++part) {
                    const Image3<T>& v = values_[static_cast<size_t>(ids[part])];
                    Image3<T> gp(v.h, v.w, v.c);
                    for (int y = 0; y < v.h; ++y)
                        for (int x = 0; x < v.w; ++x)
                            for (int ci = 0; ci < v.c; ++ci) gp.at(y, x, ci) = g.at(y, x, c0 + ci);
                    c0 += v.c;
                    accumulate(grads, ids[part], std::move(gp));
                }
                break;
            }
            default:
                throw ContractError("tape backward: unknown op id");
            }
            if (i != output) g = Image3<T>(); // free as we go
        }
    }

private:
    struct Node {
        OpKind kind;
        int in0, in1, in2;
        int stride;
        const ConvWeightsT<T>* w;
        const PReLUParamsT<T>* p;
        int param_kernel, param_bias, param_alpha;
    };

    int check(int id) const {
        require(id >= 0 && id < static_cast<int>(values_.size()), "tape: bad value id");
        return id;
    }

    int last() const { return static_cast<int>(values_.size()) - 1; }

    int simple(OpKind kind, Image3<T> out, int x) {
        nodes_.push_back(Node{kind, x, -1, -1, 0, nullptr, nullptr, -1, -1, -1});
        values_.push_back(std::move(out));
        return last();
    }

    static void accumulate(std::vector<Image3<T>>& grads, int id, Image3<T> g) {
        Image3<T>& slot = grads[static_cast<size_t>(id)];
        if (slot.data.empty()) {
            slot = std::move(g);
        } else {
            for (size_t i = 0; i < slot.data.size(); ++i) slot.data[i] += g.data[i];
        }
    }

    static void add_into(std::vector<T>& dst, const std::vector<T>& src) {
        require(dst.size() == src.size(), "tape: parameter gradient size mismatch");
        for (size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
    }

    std::vector<Node> nodes_;
    std::vector<Image3<T>> values_;
};

} // namespace microisp

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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ops.hpp"
#include "tape.hpp"

// The MicroISP network: a packed (R, G1, G2, B) input processed by three
// independent branches (one per output color), each a stack of residual
// building blocks with channel attention, a 3x3 tail conv and a
// depth-to-space upsample. Branch outputs concatenate to the RGB photo.

namespace microisp {

enum class AttentionVariant : uint8_t {
    kEnhanced = 0,     // strided conv stack before pooling
    kStandardPool = 1, // plain global-average-pool attention
    kNone = 2,
};

enum class ActivationVariant : uint8_t {
    kPRelu = 0,     // learned per-channel negative slope
    kLeakyRelu = 1, // fixed slope, not learned
};

struct ModelConfig {
    float depth_multiplier = 1.0f;
    AttentionVariant attention = AttentionVariant::kEnhanced;
    ActivationVariant activation = ActivationVariant::kPRelu;
    bool clamp_output = false;

    static constexpr float kLeakySlope = 0.2f;

    /// Throws ConfigError unless depth_multiplier is one of {0.25, 0.5, 1.0, 1.5}.
    void validate() const;

    /// Number of full residual blocks per branch (0 for the half-block model).
    int full_blocks() const;
    bool half_block() const { return full_blocks() == 0; }

    /// Wire encoding used by the weight file: 0 = half block, else block count.
    uint8_t blocks_code() const { return static_cast<uint8_t>(full_blocks()); }
    static float multiplier_from_blocks_code(uint8_t code);

    bool operator==(const ModelConfig&) const = default;
};

// Enhanced attention: 1x1 stride-3 reduce, three 3x3 stride-3 conv+act
// stages (an 81x spatial reduction in total), global average pool, then a
// two-conv head producing the per-channel gate logits. The standard-pool
// variant keeps only the head and pools the input directly.
template <typename T>
struct AttentionParamsT {
    ConvWeightsT<T> reduce;
    std::array<ConvWeightsT<T>, 3> body;
    std::array<PReLUParamsT<T>, 3> body_act;
    ConvWeightsT<T> head1;
    PReLUParamsT<T> head_act;
    ConvWeightsT<T> head2;
};

template <typename T>
struct BlockParamsT {
    ConvWeightsT<T> conv1;
    PReLUParamsT<T> act1;
    ConvWeightsT<T> conv2; // empty in the half-block model
    PReLUParamsT<T> act2;
    AttentionParamsT<T> attn;
};

template <typename T>
struct BranchParamsT {
    std::vector<BlockParamsT<T>> blocks;
    ConvWeightsT<T> tail;
};

template <typename T>
struct ModelT {
    ModelConfig config;
    std::array<BranchParamsT<T>, 3> branches; // order: R, G, B
};

using Model = ModelT<float>;
using AttentionParams = AttentionParamsT<float>;
using BlockParams = BlockParamsT<float>;

/// One named learnable array (kernel, bias or alpha vector).
template <typename T>
struct ParamEntry {
    std::string name;
    std::vector<T>* data;
};

// Enumerates every learnable array in a fixed, documented order
// (branch-major, block-major). Fixed leaky-relu slopes are not learnable and
// are skipped. Serialization, the optimizer and gradient buffers all share
// this order.
template <typename T>
std::vector<ParamEntry<T>> param_entries(ModelT<T>& m);

/// Total learnable scalar count.
int64_t param_count(const Model& m);

/// Builds a model with fan-in-scaled uniform kernels, zero biases and 0.25
/// PReLU slopes. Deterministic in `seed`.
Model build_model(const ModelConfig& config, uint64_t seed);

template <typename To, typename From>
ModelT<To> cast_model(const ModelT<From>& m);

/// Gate coefficients (sigmoid head output), shape 1x1x4.
template <typename T>
Image3<T> attention_coefficients(const AttentionParamsT<T>& p, AttentionVariant variant,
                                 const Image3<T>& x);

/// Full attention op: x scaled by its gate coefficients.
template <typename T>
Image3<T> attention_forward(const AttentionParamsT<T>& p, AttentionVariant variant,
                            const Image3<T>& x);

/// Reference forward pass: packed (h, w, 4) -> RGB (2h, 2w, 3).
template <typename T>
Image3<T> forward(const ModelT<T>& m, const Image3<T>& packed);

// Forward pass recorded on a tape for gradient computation. Training ignores
// config.clamp_output so gradients are never clipped; returns the output
// value id. `param_index` must follow the param_entries order and contain -1
// for arrays that are not learnable.
template <typename T>
int tape_forward(const ModelT<T>& m, Tape<T>& tape, Image3<T> packed);

// --- weight file (see README for the byte-level layout) ---

void save_weights(const Model& m, const std::string& path);
Model load_weights(const std::string& path);

/// Serializes to an in-memory buffer (same bytes as save_weights writes).
std::vector<uint8_t> serialize_weights(const Model& m);
Model deserialize_weights(const std::vector<uint8_t>& bytes);

// --- implementation of templated functions ---

namespace detail {

template <typename T>
void attention_entries(AttentionParamsT<T>& a, AttentionVariant variant, bool learn_alpha,
                       const std::string& prefix, std::vector<ParamEntry<T>>& out) {
    if (variant == AttentionVariant::kNone) return;
    if (variant == AttentionVariant::kEnhanced) {
        out.push_back({prefix + ".reduce.kernel", &a.reduce.kernel});
        out.push_back({prefix + ".reduce.bias", &a.reduce.bias});
        for (int i = 0; i < 3; ++i) {
            const std::string b = prefix + ".body" + std::to_string(i);
            out.push_back({b + ".kernel", &a.body[static_cast<size_t>(i)].kernel});
            out.push_back({b + ".bias", &a.body[static_cast<size_t>(i)].bias});
            if (learn_alpha) out.push_back({b + ".alpha", &a.body_act[static_cast<size_t>(i)].alpha});
        }
    }
    out.push_back({prefix + ".head1.kernel", &a.head1.kernel});
    out.push_back({prefix + ".head1.bias", &a.head1.bias});
    if (learn_alpha) out.push_back({prefix + ".head_act.alpha", &a.head_act.alpha});
    out.push_back({prefix + ".head2.kernel", &a.head2.kernel});
    out.push_back({prefix + ".head2.bias", &a.head2.bias});
}

} // namespace detail

template <typename T>
std::vector<ParamEntry<T>> param_entries(ModelT<T>& m) {
    const bool learn_alpha = m.config.activation == ActivationVariant::kPRelu;
    std::vector<ParamEntry<T>> out;
    for (int b = 0; b < 3; ++b) {
        const std::string bp = "b" + std::to_string(b);
        BranchParamsT<T>& branch = m.branches[static_cast<size_t>(b)];
        for (size_t k = 0; k < branch.blocks.size(); ++k) {
            const std::string kp = bp + ".blk" + std::to_string(k);
            BlockParamsT<T>& blk = branch.blocks[k];
            out.push_back({kp + ".conv1.kernel", &blk.conv1.kernel});
            out.push_back({kp + ".conv1.bias", &blk.conv1.bias});
            if (learn_alpha) out.push_back({kp + ".act1.alpha", &blk.act1.alpha});
            if (!blk.conv2.empty()) {
                out.push_back({kp + ".conv2.kernel", &blk.conv2.kernel});
                out.push_back({kp + ".conv2.bias", &blk.conv2.bias});
                if (learn_alpha) out.push_back({kp + ".act2.alpha", &blk.act2.alpha});
            }
            detail::attention_entries(blk.attn, m.config.attention, learn_alpha, kp + ".attn", out);
        }
        out.push_back({bp + ".tail.kernel", &branch.tail.kernel});
        out.push_back({bp + ".tail.bias", &branch.tail.bias});
    }
    return out;
}

template <typename To, typename From>
ModelT<To> cast_model(const ModelT<From>& m) {
    auto cast_conv = [](const ConvWeightsT<From>& w) {
        ConvWeightsT<To> out;
        out.kh = w.kh;
        out.kw = w.kw;
        out.cin = w.cin;
        out.cout = w.cout;
        out.kernel.assign(w.kernel.begin(), w.kernel.end());
        out.bias.assign(w.bias.begin(), w.bias.end());
        return out;
    };
    auto cast_act = [](const PReLUParamsT<From>& p) {
        PReLUParamsT<To> out;
        out.alpha.assign(p.alpha.begin(), p.alpha.end());
        return out;
    };
    ModelT<To> out;
    out.config = m.config;
    for (int b = 0; b < 3; ++b) {
        const BranchParamsT<From>& src = m.branches[static_cast<size_t>(b)];
        BranchParamsT<To>& dst = out.branches[static_cast<size_t>(b)];
        dst.tail = cast_conv(src.tail);
        dst.blocks.resize(src.blocks.size());
        for (size_t k = 0; k < src.blocks.size(); ++k) {
            const BlockParamsT<From>& s = src.blocks[k];
            BlockParamsT<To>& d = dst.blocks[k];
            d.conv1 = cast_conv(s.conv1);
            d.act1 = cast_act(s.act1);
            if (!s.conv2.empty()) {
                d.conv2 = cast_conv(s.conv2);
                d.act2 = cast_act(s.act2);
            }
            d.attn.reduce = cast_conv(s.attn.reduce);
            for (int i = 0; i < 3; ++i) {
                d.attn.body[static_cast<size_t>(i)] = cast_conv(s.attn.body[static_cast<size_t>(i)]);
                d.attn.body_act[static_cast<size_t>(i)] = cast_act(s.attn.body_act[static_cast<size_t>(i)]);
            }
            d.attn.head1 = cast_conv(s.attn.head1);
            d.attn.head_act = cast_act(s.attn.head_act);
            d.attn.head2 = cast_conv(s.attn.head2);
        }
    }
    return out;
}

template <typename T>
Image3<T> attention_coefficients(const AttentionParamsT<T>& p, AttentionVariant variant,
                                 const Image3<T>& x) {
    require(variant != AttentionVariant::kNone, "attention: variant none has no coefficients");
    Image3<T> pooled;
    if (variant == AttentionVariant::kEnhanced) {
        Image3<T> t = conv2d(x, p.reduce, 3);
        for (int i = 0; i < 3; ++i) {
            t = prelu(conv2d(t, p.body[static_cast<size_t>(i)], 3), p.body_act[static_cast<size_t>(i)]);
        }
        pooled = global_avg_pool(t);
    } else {
        pooled = global_avg_pool(x);
    }
    Image3<T> h = prelu(conv2d(pooled, p.head1, 1), p.head_act);
    return sigmoid(conv2d(h, p.head2, 1));
}

template <typename T>
Image3<T> attention_forward(const AttentionParamsT<T>& p, AttentionVariant variant,
                            const Image3<T>& x) {
    require(x.c == 4, "attention: input must have 4 channels");
    return channel_scale(x, attention_coefficients(p, variant, x));
}

namespace detail {

template <typename T>
Image3<T> block_forward(const BlockParamsT<T>& blk, const ModelConfig& cfg, const Image3<T>& x) {
    Image3<T> y = prelu(conv2d(x, blk.conv1, 1), blk.act1);
    if (!blk.conv2.empty()) y = prelu(conv2d(y, blk.conv2, 1), blk.act2);
    if (cfg.attention != AttentionVariant::kNone) {
        y = channel_scale(y, attention_coefficients(blk.attn, cfg.attention, y));
    }
    return add(x, y);
}

template <typename T>
Image3<T> branch_forward(const BranchParamsT<T>& branch, const ModelConfig& cfg,
                         const Image3<T>& packed) {
    Image3<T> x = packed;
    for (const BlockParamsT<T>& blk : branch.blocks) x = block_forward(blk, cfg, x);
    return depth_to_space(conv2d(x, branch.tail, 1));
}

} // namespace detail

template <typename T>
Image3<T> forward(const ModelT<T>& m, const Image3<T>& packed) {
    require(packed.c == 4, "forward: packed input must have 4 channels");
    require(packed.h >= 16 && packed.w >= 16, "forward: packed input must be at least 16x16");
    std::array<Image3<T>, 3> outs;
    for (int b = 0; b < 3; ++b) {
        outs[static_cast<size_t>(b)] =
            detail::branch_forward(m.branches[static_cast<size_t>(b)], m.config, packed);
    }
    Image3<T> rgb = concat_channels<T>({&outs[0], &outs[1], &outs[2]});
    if (m.config.clamp_output) rgb = clamp01(rgb);
    return rgb;
}

template <typename T>
int tape_forward(const ModelT<T>& m, Tape<T>& tape, Image3<T> packed) {
    require(packed.c == 4, "tape_forward: packed input must have 4 channels");
    require(packed.h >= 16 && packed.w >= 16, "tape_forward: packed input must be at least 16x16");

    // Param ids follow the param_entries enumeration; rebuild the index map.
    auto& model = const_cast<ModelT<T>&>(m);
    std::vector<ParamEntry<T>> entries = param_entries(model);
    auto index_of = [&entries](const std::vector<T>* arr) {
        for (size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].data == arr) return static_cast<int>(i);
        }
        return -1;
    };

    const int input = tape.input(std::move(packed));
    std::array<int, 3> outs{};
    for (int b = 0; b < 3; ++b) {
        const BranchParamsT<T>& branch = m.branches[static_cast<size_t>(b)];
        int x = input;
        for (const BlockParamsT<T>& blk : branch.blocks) {
            int y = tape.prelu_op(tape.conv(x, blk.conv1, 1, index_of(&blk.conv1.kernel), index_of(&blk.conv1.bias)),
                                  blk.act1, index_of(&blk.act1.alpha));
            if (!blk.conv2.empty()) {
                y = tape.prelu_op(tape.conv(y, blk.conv2, 1, index_of(&blk.conv2.kernel), index_of(&blk.conv2.bias)),
                                  blk.act2, index_of(&blk.act2.alpha));
            }
            if (m.config.attention != AttentionVariant::kNone) {
                int pooled;
                if (m.config.attention == AttentionVariant::kEnhanced) {
                    int t = tape.conv(y, blk.attn.reduce, 3, index_of(&blk.attn.reduce.kernel),
                                      index_of(&blk.attn.reduce.bias));
                    for (int i = 0; i < 3; ++i) {
                        const auto& bw = blk.attn.body[static_cast<size_t>(i)];
                        const auto& ba = blk.attn.body_act[static_cast<size_t>(i)];
                        t = tape.prelu_op(tape.conv(t, bw, 3, index_of(&bw.kernel), index_of(&bw.bias)),
                                          ba, index_of(&ba.alpha));
                    }
                    pooled = tape.global_avg_pool_op(t);
                } else {
                    pooled = tape.global_avg_pool_op(y);
                }
                int h = tape.prelu_op(tape.conv(pooled, blk.attn.head1, 1, index_of(&blk.attn.head1.kernel),
                                                index_of(&blk.attn.head1.bias)),
                                      blk.attn.head_act, index_of(&blk.attn.head_act.alpha));
                int coeff = tape.sigmoid_op(tape.conv(h, blk.attn.head2, 1, index_of(&blk.attn.head2.kernel),
                                                      index_of(&blk.attn.head2.bias)));
                y = tape.channel_scale_op(y, coeff);
            }
            x = tape.add_op(x, y);
        }
        const int t = tape.conv(x, branch.tail, 1, index_of(&branch.tail.kernel), index_of(&branch.tail.bias));
        outs[static_cast<size_t>(b)] = tape.depth_to_space_op(t);
    }
    return tape.concat3_op(outs[0], outs[1], outs[2]);
}

} // namespace microisp

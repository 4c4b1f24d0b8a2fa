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

#include "model.hpp"

#include <cmath>
#include <cstring>

#include "io_util.hpp"
#include "rng.hpp"

namespace microisp {

void ModelConfig::validate() const {
    const float m = depth_multiplier;
    if (!(m == 0.25f || m == 0.5f || m == 1.0f || m == 1.5f)) {
        throw ConfigError("depth_multiplier must be one of 0.25, 0.5, 1.0, 1.5");
    }
}

int ModelConfig::full_blocks() const {
    validate();
    if (depth_multiplier == 1.5f) return 3;
    if (depth_multiplier == 1.0f) return 2;
    if (depth_multiplier == 0.5f) return 1;
    return 0; // 0.25 -> half block
}

float ModelConfig::multiplier_from_blocks_code(uint8_t code) {
    switch (code) {
    case 0: return 0.25f;
    case 1: return 0.5f;
    case 2: return 1.0f;
    case 3: return 1.5f;
    default: throw FormatError("blocks_per_branch: invalid value " + std::to_string(code));
    }
}

int64_t param_count(const Model& m) {
    auto& mut = const_cast<Model&>(m);
    int64_t n = 0;
    for (const auto& e : param_entries(mut)) n += static_cast<int64_t>(e.data->size());
    return n;
}

namespace {

ConvWeights init_conv(int kh, int kw, int cin, int cout, Rng& rng) {
    ConvWeights w(kh, kw, cin, cout);
    const double bound = std::sqrt(1.0 / (static_cast<double>(kh) * kw * cin));
    for (auto& v : w.kernel) v = static_cast<float>(rng.uniform(-bound, bound));
    return w; // biases stay zero
}

PReLUParams init_act(int channels, ActivationVariant variant) {
    const float slope =
        variant == ActivationVariant::kLeakyRelu ? ModelConfig::kLeakySlope : 0.25f;
    return PReLUParams(channels, slope);
}

AttentionParams init_attention(const ModelConfig& cfg, Rng& rng) {
    AttentionParams a;
    if (cfg.attention == AttentionVariant::kNone) return a;
    if (cfg.attention == AttentionVariant::kEnhanced) {
        a.reduce = init_conv(1, 1, 4, 4, rng);
        for (int i = 0; i < 3; ++i) {
            a.body[static_cast<size_t>(i)] = init_conv(3, 3, 4, 4, rng);
            a.body_act[static_cast<size_t>(i)] = init_act(4, cfg.activation);
        }
    }
    a.head1 = init_conv(1, 1, 4, 4, rng);
    a.head_act = init_act(4, cfg.activation);
    a.head2 = init_conv(1, 1, 4, 4, rng);
    return a;
}

} // namespace

Model build_model(const ModelConfig& config, uint64_t seed) {
    config.validate();
    Model m;
    m.config = config;
    Rng rng(mix_seed(seed, 0x6d697370 /* "misp" */));
    const int blocks = config.half_block() ? 1 : config.full_blocks();
    for (int b = 0; b < 3; ++b) {
        BranchParams& branch = m.branches[static_cast<size_t>(b)];
        branch.blocks.resize(static_cast<size_t>(blocks));
        for (int k = 0; k < blocks; ++k) {
            BlockParams& blk = branch.blocks[static_cast<size_t>(k)];
            blk.conv1 = init_conv(3, 3, 4, 4, rng);
            blk.act1 = init_act(4, config.activation);
            if (!config.half_block()) {
                blk.conv2 = init_conv(3, 3, 4, 4, rng);
                blk.act2 = init_act(4, config.activation);
            }
            blk.attn = init_attention(config, rng);
        }
        branch.tail = init_conv(3, 3, 4, 4, rng);
    }
    return m;
}

// Weight container, little-endian throughout:
//   magic "MISP" | u16 version=1 | u8 blocks (0 = half block) | u8 attention
//   u8 activation | u8 clamp | tensor records | u32 crc32 of preceding bytes
// Each record: u16 name length | name bytes | u8 ndims | u32 dims... |
// float32 payload. Records appear in param_entries order; kernels are 4-D
// (kh, kw, cin, cout), biases and alphas 1-D.

namespace {

constexpr char kMagic[4] = {'M', 'I', 'S', 'P'};
constexpr uint16_t kVersion = 1;

struct RecordShape {
    uint8_t ndims;
    std::array<uint32_t, 4> dims;
};

RecordShape shape_of(const Model& m, const std::string& name, const std::vector<float>* arr) {
    auto& mut = const_cast<Model&>(m);
    // Kernels are identifiable by name suffix; everything else is 1-D.
    if (name.size() > 7 && name.compare(name.size() - 7, 7, ".kernel") == 0) {
        // Locate the owning ConvWeights via pointer math-free search.
        for (int b = 0; b < 3; ++b) {
            BranchParams& br = mut.branches[static_cast<size_t>(b)];
            std::vector<ConvWeights*> convs{&br.tail};
            for (auto& blk : br.blocks) {
                convs.push_back(&blk.conv1);
                convs.push_back(&blk.conv2);
                convs.push_back(&blk.attn.reduce);
                for (auto& bw : blk.attn.body) convs.push_back(&bw);
                convs.push_back(&blk.attn.head1);
                convs.push_back(&blk.attn.head2);
            }
            for (ConvWeights* cw : convs) {
                if (&cw->kernel == arr) {
                    return {4,
                            {static_cast<uint32_t>(cw->kh), static_cast<uint32_t>(cw->kw),
                             static_cast<uint32_t>(cw->cin), static_cast<uint32_t>(cw->cout)}};
                }
            }
        }
    }
    return {1, {static_cast<uint32_t>(arr->size()), 0, 0, 0}};
}

} // namespace

std::vector<uint8_t> serialize_weights(const Model& m) {
    m.config.validate();
    std::vector<uint8_t> buf;
    buf.insert(buf.end(), kMagic, kMagic + 4);
    io::put_u16(buf, kVersion);
    buf.push_back(m.config.blocks_code());
    buf.push_back(static_cast<uint8_t>(m.config.attention));
    buf.push_back(static_cast<uint8_t>(m.config.activation));
    buf.push_back(m.config.clamp_output ? 1 : 0);

    auto& mut = const_cast<Model&>(m);
    for (const auto& e : param_entries(mut)) {
        require(e.name.size() <= 0xFFFF, "weight name too long");
        io::put_u16(buf, static_cast<uint16_t>(e.name.size()));
        buf.insert(buf.end(), e.name.begin(), e.name.end());
        const RecordShape rs = shape_of(m, e.name, e.data);
        buf.push_back(rs.ndims);
        size_t elems = 1;
        for (uint8_t d = 0; d < rs.ndims; ++d) {
            io::put_u32(buf, rs.dims[d]);
            elems *= rs.dims[d];
        }
        require(elems == e.data->size(), "weight record dims inconsistent");
        for (float v : *e.data) io::put_f32(buf, v);
    }
    io::put_u32(buf, io::crc32(buf.data(), buf.size()));
    return buf;
}

Model deserialize_weights(const std::vector<uint8_t>& bytes) {
    io::Reader r(bytes.data(), bytes.size());
    if (bytes.size() < 14) throw FormatError("weight file: truncated header");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("weight file: bad magic");
    const uint32_t stored_crc = io::get_u32_at(bytes.data() + bytes.size() - 4);
    const uint32_t actual_crc = io::crc32(bytes.data(), bytes.size() - 4);
    if (stored_crc != actual_crc) throw FormatError("weight file: CRC-32 mismatch");

    r.skip(4);
    const uint16_t version = r.u16("version");
    if (version != kVersion) throw FormatError("weight file: unsupported version " + std::to_string(version));
    ModelConfig cfg;
    cfg.depth_multiplier = ModelConfig::multiplier_from_blocks_code(r.u8("blocks_per_branch"));
    const uint8_t attn = r.u8("attention_variant");
    if (attn > 2) throw FormatError("weight file: invalid attention_variant");
    cfg.attention = static_cast<AttentionVariant>(attn);
    const uint8_t act = r.u8("activation_variant");
    if (act > 1) throw FormatError("weight file: invalid activation_variant");
    cfg.activation = static_cast<ActivationVariant>(act);
    cfg.clamp_output = r.u8("clamp_flag") != 0;

    // Build the structural skeleton, then fill records in enumeration order.
    Model m = build_model(cfg, 0);
    for (const auto& e : param_entries(m)) {
        const uint16_t name_len = r.u16("record name length");
        const std::string name = r.str(name_len, "record name");
        if (name != e.name) {
            throw FormatError("weight file: expected record '" + e.name + "', found '" + name + "'");
        }
        const uint8_t ndims = r.u8("record ndims");
        if (ndims == 0 || ndims > 4) throw FormatError("weight file: record '" + name + "' has invalid ndims");
        size_t elems = 1;
        for (uint8_t d = 0; d < ndims; ++d) elems *= r.u32("record dim");
        if (elems != e.data->size()) {
            throw FormatError("weight file: record '" + name + "' has wrong element count");
        }
        for (float& v : *e.data) v = r.f32("record payload");
        for (float v : *e.data) {
            if (!std::isfinite(v)) throw FormatError("weight file: record '" + name + "' has non-finite value");
        }
    }
    if (r.remaining() != 4) throw FormatError("weight file: trailing bytes after last record");
    return m;
}

void save_weights(const Model& m, const std::string& path) {
    io::atomic_write_file(path, serialize_weights(m));
}

Model load_weights(const std::string& path) {
    return deserialize_weights(io::read_file(path));
}

} // namespace microisp

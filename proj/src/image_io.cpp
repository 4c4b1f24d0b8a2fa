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

#include "image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include "io_util.hpp"
#include "ops.hpp"
#include "rng.hpp"

namespace microisp {

namespace fs = std::filesystem;

const char* cfa_name(CfaPattern cfa) {
    switch (cfa) {
    case CfaPattern::kRGGB: return "RGGB";
    case CfaPattern::kBGGR: return "BGGR";
    case CfaPattern::kGRBG: return "GRBG";
    case CfaPattern::kGBRG: return "GBRG";
    }
    return "?";
}

void BayerImage::validate() const {
    if (width <= 0 || height <= 0 || width % 2 != 0 || height % 2 != 0) {
        throw FormatError("bayer image: dimensions must be positive and even");
    }
    if (bit_depth != 10 && bit_depth != 12 && bit_depth != 14 && bit_depth != 16) {
        throw FormatError("bayer image: bit depth must be 10, 12, 14 or 16");
    }
    const uint32_t max_code = (1u << bit_depth) - 1;
    if (!(black_level < white_level && white_level <= max_code)) {
        throw FormatError("bayer image: requires black_level < white_level <= 2^bit_depth - 1");
    }
    if (samples.size() != static_cast<size_t>(width) * height) {
        throw FormatError("bayer image: sample count does not match dimensions");
    }
}

// --- BRW1 container ---
// "BRW1" | u32 width | u32 height | u16 bit_depth | u8 cfa | u8 reserved=0 |
// u16 black_level | u16 white_level | width*height u16 samples, row-major.
// Little-endian.

namespace {

constexpr char kBrwMagic[4] = {'B', 'R', 'W', '1'};

BayerImage parse_brw1(const std::vector<uint8_t>& bytes) {
    io::Reader r(bytes.data(), bytes.size());
    r.skip(4);
    BayerImage img;
    const uint32_t w = r.u32("width");
    const uint32_t h = r.u32("height");
    if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20)) throw FormatError("BRW1: implausible dimensions");
    img.width = static_cast<int>(w);
    img.height = static_cast<int>(h);
    img.bit_depth = r.u16("bit_depth");
    const uint8_t cfa = r.u8("cfa");
    if (cfa > 3) throw FormatError("BRW1: invalid cfa code");
    img.cfa = static_cast<CfaPattern>(cfa);
    const uint8_t reserved = r.u8("reserved");
    if (reserved != 0) throw FormatError("BRW1: reserved byte must be zero");
    img.black_level = r.u16("black_level");
    img.white_level = r.u16("white_level");
    const size_t n = static_cast<size_t>(img.width) * img.height;
    if (r.remaining() != n * 2) throw FormatError("BRW1: sample payload size mismatch");
    img.samples.resize(n);
    for (size_t i = 0; i < n; ++i) img.samples[i] = r.u16("sample");
    img.validate();
    return img;
}

// Binary PGM, 16-bit only (maxval > 255); samples are big-endian per the
// netpbm spec.
BayerImage parse_pgm(const std::vector<uint8_t>& bytes) {
    size_t pos = 2; // past "P5"
    auto next_token = [&]() -> std::string {
        while (pos < bytes.size()) {
            const char ch = static_cast<char>(bytes[pos]);
            if (ch == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n') {
                ++pos;
            } else {
                break;
            }
        }
        std::string tok;
        while (pos < bytes.size()) {
            const char ch = static_cast<char>(bytes[pos]);
            if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n' || ch == '#') break;
            tok.push_back(ch);
            ++pos;
        }
        if (tok.empty()) throw FormatError("PGM: truncated header");
        return tok;
    };
    auto parse_int = [](const std::string& tok, const char* field) -> long {
        try {
            size_t idx = 0;
            const long v = std::stol(tok, &idx);
            if (idx != tok.size()) throw std::invalid_argument(tok);
            return v;
        } catch (const std::exception&) {
            throw FormatError(std::string("PGM: invalid ") + field);
        }
    };

    const long w = parse_int(next_token(), "width");
    const long h = parse_int(next_token(), "height");
    const long maxval = parse_int(next_token(), "maxval");
    if (w <= 0 || h <= 0) throw FormatError("PGM: invalid dimensions");
    if (maxval <= 255 || maxval > 65535) {
        throw FormatError("PGM: only 16-bit (maxval in 256..65535) grayscale input is supported");
    }
    ++pos; // single whitespace after maxval

    BayerImage img;
    img.width = static_cast<int>(w);
    img.height = static_cast<int>(h);
    int depth = 16;
    while (depth > 10 && maxval <= ((1 << (depth - 2)) - 1)) depth -= 2;
    img.bit_depth = depth;
    img.cfa = CfaPattern::kRGGB;
    img.black_level = 0;
    img.white_level = static_cast<uint16_t>(maxval);

    const size_t n = static_cast<size_t>(w) * static_cast<size_t>(h);
    if (bytes.size() - pos != n * 2) throw FormatError("PGM: sample payload size mismatch");
    img.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
        img.samples[i] = static_cast<uint16_t>((bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1]);
    }
    img.validate();
    return img;
}

} // namespace

BayerImage load_raw(const std::string& path) {
    const std::vector<uint8_t> bytes = io::read_file(path);
    if (bytes.size() >= 4 && std::equal(kBrwMagic, kBrwMagic + 4, bytes.begin())) {
        return parse_brw1(bytes);
    }
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
        return parse_pgm(bytes);
    }
    throw FormatError("raw file: unrecognized magic (expected BRW1 or P5): " + path);
}

void save_raw(const BayerImage& img, const std::string& path) {
    img.validate();
    std::vector<uint8_t> buf;
    buf.reserve(20 + img.samples.size() * 2);
    buf.insert(buf.end(), kBrwMagic, kBrwMagic + 4);
    io::put_u32(buf, static_cast<uint32_t>(img.width));
    io::put_u32(buf, static_cast<uint32_t>(img.height));
    io::put_u16(buf, static_cast<uint16_t>(img.bit_depth));
    buf.push_back(static_cast<uint8_t>(img.cfa));
    buf.push_back(0);
    io::put_u16(buf, img.black_level);
    io::put_u16(buf, img.white_level);
    for (uint16_t s : img.samples) io::put_u16(buf, s);
    io::atomic_write_file(path, buf);
}

Tensor normalize_raw(const BayerImage& img) {
    img.validate();
    Tensor out(img.height, img.width, 1);
    const double black = static_cast<double>(img.black_level);
    const double inv = 1.0 / (static_cast<double>(img.white_level) - black);
    for (size_t i = 0; i < img.samples.size(); ++i) {
        double v = (static_cast<double>(img.samples[i]) - black) * inv;
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        out.data[i] = static_cast<float>(v);
    }
    return out;
}

namespace {

// For each CFA pattern, the cell position (row-major within the 2x2 cell) of
// the canonical channels R, G1 (R's row), G2 (B's row), B.
constexpr std::array<std::array<int, 4>, 4> kCfaToCanonical{{
    {0, 1, 2, 3}, // RGGB
    {3, 2, 1, 0}, // BGGR
    {1, 0, 3, 2}, // GRBG
    {2, 3, 0, 1}, // GBRG
}};

} // namespace

Tensor pack_mosaic(const Tensor& mosaic, CfaPattern cfa) {
    require(mosaic.c == 1, "pack_mosaic: input must have a single channel");
    Tensor cells = space_to_depth(mosaic); // channels = cell positions
    const auto& perm = kCfaToCanonical[static_cast<size_t>(cfa)];
    Tensor out(cells.h, cells.w, 4);
    for (int y = 0; y < cells.h; ++y) {
        for (int x = 0; x < cells.w; ++x) {
            for (int ch = 0; ch < 4; ++ch) out.at(y, x, ch) = cells.at(y, x, perm[static_cast<size_t>(ch)]);
        }
    }
    return out;
}

Tensor unpack_mosaic(const Tensor& packed, CfaPattern cfa) {
    require(packed.c == 4, "unpack_mosaic: input must have 4 channels");
    const auto& perm = kCfaToCanonical[static_cast<size_t>(cfa)];
    Tensor cells(packed.h, packed.w, 4);
    for (int y = 0; y < packed.h; ++y) {
        for (int x = 0; x < packed.w; ++x) {
            for (int ch = 0; ch < 4; ++ch) cells.at(y, x, perm[static_cast<size_t>(ch)]) = packed.at(y, x, ch);
        }
    }
    return depth_to_space(cells);
}

// --- PPM ---

namespace {

uint32_t quantize(float v, uint32_t maxval) {
    double x = static_cast<double>(v);
    if (x < 0.0) x = 0.0;
    if (x > 1.0) x = 1.0;
    return static_cast<uint32_t>(std::floor(x * maxval + 0.5)); // round half up
}

} // namespace

void write_rgb(const Tensor& rgb, const std::string& path, int bit_depth) {
    require(rgb.c == 3, "write_rgb: tensor must have 3 channels");
    require(bit_depth == 8 || bit_depth == 16, "write_rgb: bit depth must be 8 or 16");
    const uint32_t maxval = bit_depth == 8 ? 255u : 65535u;
    std::string header = "P6\n" + std::to_string(rgb.w) + " " + std::to_string(rgb.h) + "\n" +
                         std::to_string(maxval) + "\n";
    std::vector<uint8_t> buf(header.begin(), header.end());
    buf.reserve(buf.size() + rgb.size() * (bit_depth / 8));
    for (size_t i = 0; i < rgb.size(); ++i) {
        const uint32_t q = quantize(rgb.data[i], maxval);
        if (bit_depth == 16) buf.push_back(static_cast<uint8_t>(q >> 8)); // big-endian
        buf.push_back(static_cast<uint8_t>(q & 0xFF));
    }
    io::atomic_write_file(path, buf);
}

Tensor load_rgb(const std::string& path) {
    const std::vector<uint8_t> bytes = io::read_file(path);
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
        throw FormatError("PPM: bad magic (expected P6): " + path);
    }
    size_t pos = 2;
    auto next_int = [&]() -> long {
        while (pos < bytes.size()) {
            const char ch = static_cast<char>(bytes[pos]);
            if (ch == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n') {
                ++pos;
            } else {
                break;
            }
        }
        long v = 0;
        bool any = false;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
            v = v * 10 + (bytes[pos] - '0');
            any = true;
            ++pos;
        }
        if (!any) throw FormatError("PPM: truncated header");
        return v;
    };
    const long w = next_int();
    const long h = next_int();
    const long maxval = next_int();
    if (w <= 0 || h <= 0) throw FormatError("PPM: invalid dimensions");
    if (maxval != 255 && maxval != 65535) throw FormatError("PPM: maxval must be 255 or 65535");
    ++pos;

    const size_t n = static_cast<size_t>(w) * static_cast<size_t>(h) * 3;
    const int bytes_per = maxval > 255 ? 2 : 1;
    if (bytes.size() - pos != n * static_cast<size_t>(bytes_per)) {
        throw FormatError("PPM: sample payload size mismatch");
    }
    Tensor out(static_cast<int>(h), static_cast<int>(w), 3);
    const float inv = 1.0f / static_cast<float>(maxval);
    for (size_t i = 0; i < n; ++i) {
        uint32_t q;
        if (bytes_per == 2) {
            q = static_cast<uint32_t>((bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1]);
        } else {
            q = bytes[pos + i];
        }
        out.data[i] = static_cast<float>(q) * inv;
    }
    return out;
}

PairLoadReport load_pairs(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir);
    std::map<std::string, std::string> raws;    // stem -> path
    std::map<std::string, std::string> targets; // stem -> path
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const fs::path p = entry.path();
        const std::string ext = p.extension().string();
        if (ext == ".brw1" || ext == ".braw" || ext == ".pgm") {
            raws[p.stem().string()] = p.string();
        } else if (ext == ".ppm") {
            targets[p.stem().string()] = p.string();
        }
    }
    PairLoadReport report;
    for (const auto& [stem, raw_path] : raws) {
        auto it = targets.find(stem);
        if (it == targets.end()) {
            report.skipped.push_back(stem + " (missing target .ppm)");
            continue;
        }
        const BayerImage raw = load_raw(raw_path);
        TrainPair pair;
        pair.name = stem;
        pair.packed = pack_mosaic(normalize_raw(raw), raw.cfa);
        pair.target = load_rgb(it->second);
        if (pair.target.h != pair.packed.h * 2 || pair.target.w != pair.packed.w * 2) {
            throw FormatError("pair '" + stem + "': target dims must be exactly 2x the packed dims");
        }
        report.pairs.push_back(std::move(pair));
    }
    for (const auto& [stem, path] : targets) {
        if (raws.find(stem) == raws.end()) report.skipped.push_back(stem + " (missing raw file)");
    }
    // std::map iteration is already name-sorted; keep the order deterministic.
    return report;
}

TrainPair synthesize_pair(uint64_t seed, int height, int width, const SynthOptions& opts) {
    require(height >= 32 && width >= 32 && height % 2 == 0 && width % 2 == 0,
            "synthesize_pair: dims must be even and at least 32");
    Rng rng(mix_seed(seed, 0x73796e74 /* "synt" */));

    // Smooth scene: per channel, a few low-frequency sinusoids normalized into
    // (0, 1).
    constexpr int kWaves = 4;
    Tensor scene(height, width, 3);
    for (int c = 0; c < 3; ++c) {
        double amp[kWaves], fy[kWaves], fx[kWaves], phase[kWaves];
        double amp_sum = 0.0;
        for (int k = 0; k < kWaves; ++k) {
            amp[k] = rng.uniform(0.3, 1.0);
            fy[k] = rng.uniform(0.25, 2.0);
            fx[k] = rng.uniform(0.25, 2.0);
            phase[k] = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
            amp_sum += amp[k];
        }
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                double s = 0.0;
                for (int k = 0; k < kWaves; ++k) {
                    s += amp[k] * std::sin(2.0 * 3.14159265358979323846 *
                                               (fy[k] * y / height + fx[k] * x / width) +
                                           phase[k]);
                }
                double v = 0.5 + 0.45 * s / amp_sum;
                if (v < 0.0) v = 0.0;
                if (v > 1.0) v = 1.0;
                scene.at(y, x, c) = static_cast<float>(v);
            }
        }
    }

    // Degrade and CFA-sample. Gain/gamma are skipped when they are exact
    // identities so the sigma=0 identity pipeline reproduces the scene bit
    // for bit.
    Tensor mosaic(height, width, 1);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const int color = (y % 2 == 0) ? (x % 2 == 0 ? 0 : 1) : (x % 2 == 0 ? 1 : 2); // RGGB
            double v = static_cast<double>(scene.at(y, x, color));
            if (opts.gamma != 1.0) v = std::pow(v, opts.gamma);
            if (opts.gains[static_cast<size_t>(color)] != 1.0) v *= opts.gains[static_cast<size_t>(color)];
            if (opts.noise_sigma > 0.0) v += opts.noise_sigma * rng.normal();
            if (v < 0.0) v = 0.0;
            if (v > 1.0) v = 1.0;
            mosaic.at(y, x, 0) = static_cast<float>(v);
        }
    }

    TrainPair pair;
    pair.packed = pack_mosaic(mosaic, CfaPattern::kRGGB);
    pair.target = std::move(scene);
    return pair;
}

void synth_dataset(const std::string& dir, int count, int size, double noise_sigma,
                   uint64_t seed) {
    if (count <= 0) throw ConfigError("synth: count must be positive");
    fs::create_directories(dir);
    SynthOptions opts;
    opts.noise_sigma = noise_sigma;
    for (int i = 0; i < count; ++i) {
        TrainPair pair = synthesize_pair(mix_seed(seed, static_cast<uint64_t>(i)), size, size, opts);
        // Re-expand the packed input to the mosaic and quantize to 16 bits.
        const Tensor mosaic = unpack_mosaic(pair.packed, CfaPattern::kRGGB);
        BayerImage raw;
        raw.width = mosaic.w;
        raw.height = mosaic.h;
        raw.bit_depth = 16;
        raw.cfa = CfaPattern::kRGGB;
        raw.black_level = 0;
        raw.white_level = 65535;
        raw.samples.resize(mosaic.size());
        for (size_t j = 0; j < mosaic.size(); ++j) {
            raw.samples[j] = static_cast<uint16_t>(quantize(mosaic.data[j], 65535u));
        }
        char stem[32];
        std::snprintf(stem, sizeof(stem), "pair%04d", i);
        save_raw(raw, (fs::path(dir) / (std::string(stem) + ".brw1")).string());
        write_rgb(pair.target, (fs::path(dir) / (std::string(stem) + ".ppm")).string(), 16);
    }
}

} // namespace microisp

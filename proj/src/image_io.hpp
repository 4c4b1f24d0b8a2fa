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

#include "tensor.hpp"

namespace microisp {

enum class CfaPattern : uint8_t { kRGGB = 0, kBGGR = 1, kGRBG = 2, kGBRG = 3 };

const char* cfa_name(CfaPattern cfa);

/// Raw sensor mosaic as read from a file, one sample per photosite.
struct BayerImage {
    int width = 0;
    int height = 0;
    int bit_depth = 16; // one of 10, 12, 14, 16
    CfaPattern cfa = CfaPattern::kRGGB;
    uint16_t black_level = 0;
    uint16_t white_level = 0;
    std::vector<uint16_t> samples; // row-major

    void validate() const;
};

// Loads a BRW1 container or a 16-bit binary PGM (P5, maxval > 255). PGM files
// carry no sensor metadata, so documented defaults apply: cfa RGGB,
// black 0, white = maxval.
BayerImage load_raw(const std::string& path);

/// Writes the BRW1 container (atomic).
void save_raw(const BayerImage& img, const std::string& path);

/// (sample - black) / (white - black), clamped to [0, 1]. Result is h x w x 1.
Tensor normalize_raw(const BayerImage& img);

// Packs a mosaic into four channels with the canonical order (R, G1, G2, B)
// regardless of the CFA pattern. G1 is the green sharing a row with R, G2 the
// green sharing a row with B.
Tensor pack_mosaic(const Tensor& mosaic, CfaPattern cfa);

/// Inverse of pack_mosaic.
Tensor unpack_mosaic(const Tensor& packed, CfaPattern cfa);

/// Writes a PPM (P6), 8-bit or 16-bit big-endian samples, round-half-up
/// quantization, values clamped to [0, 1]. Atomic.
void write_rgb(const Tensor& rgb, const std::string& path, int bit_depth);

/// Loads a PPM (P6), 8-bit or 16-bit, into [0, 1] reals.
Tensor load_rgb(const std::string& path);

/// One training sample: packed mosaic input and the RGB target at 2x size.
struct TrainPair {
    Tensor packed; // h x w x 4
    Tensor target; // 2h x 2w x 3
    std::string name;
};

struct PairLoadReport {
    std::vector<TrainPair> pairs;      // sorted by name
    std::vector<std::string> skipped;  // stems missing a counterpart file
};

// Scans a directory for raw files (.brw1/.braw/.pgm) paired with targets
// (<stem>.ppm). Raw files without a target (and vice versa) land in the
// skipped list instead of failing the load.
PairLoadReport load_pairs(const std::string& dir);

struct SynthOptions {
    double noise_sigma = 0.005;
    std::array<double, 3> gains{0.6, 1.0, 0.7};
    double gamma = 2.2; // mosaic stores scene^gamma (inverse display transform)
};

// Generates a smooth random RGB scene and its RGGB-mosaiced, degraded raw
// counterpart: mosaic = gain_c * scene_c^gamma + noise, sampled at each CFA
// site. Deterministic in `seed`. Mosaic dims are (height, width).
TrainPair synthesize_pair(uint64_t seed, int height, int width, const SynthOptions& opts = {});

/// Writes `count` synthetic pairs (BRW1 raw + 16-bit PPM target) into dir.
void synth_dataset(const std::string& dir, int count, int size, double noise_sigma,
                   uint64_t seed);

} // namespace microisp

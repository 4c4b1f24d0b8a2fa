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

#include "augment.hpp"

#include "rng.hpp"

namespace microisp {

Tensor rotate90_cw(const Tensor& img) {
    Tensor out(img.w, img.h, img.c);
    for (int y = 0; y < out.h; ++y) {
        for (int x = 0; x < out.w; ++x) {
            for (int c = 0; c < img.c; ++c) out.at(y, x, c) = img.at(img.h - 1 - x, y, c);
        }
    }
    return out;
}

Tensor flip_horizontal(const Tensor& img) {
    Tensor out(img.h, img.w, img.c);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            for (int c = 0; c < img.c; ++c) out.at(y, x, c) = img.at(y, img.w - 1 - x, c);
        }
    }
    return out;
}

Tensor flip_vertical(const Tensor& img) {
    Tensor out(img.h, img.w, img.c);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            for (int c = 0; c < img.c; ++c) out.at(y, x, c) = img.at(img.h - 1 - y, x, c);
        }
    }
    return out;
}

Tensor apply_geometry(const Tensor& img, const AugmentOps& ops) {
    Tensor out = img;
    for (int k = 0; k < (ops.rot90 & 3); ++k) out = rotate90_cw(out);
    if (ops.hflip) out = flip_horizontal(out);
    if (ops.vflip) out = flip_vertical(out);
    return out;
}

namespace {

// Finds the offset (dr, dc) in {0,1}^2 at which the transformed mosaic phases
// as RGGB again. Tracked by transforming a marker image of color codes
// (R=0, G=1, B=2) with the exact same geometry.
void rggb_offset(const AugmentOps& ops, int* dr, int* dc) {
    Tensor marker(4, 4, 1);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            marker.at(y, x, 0) =
                (y % 2 == 0) ? (x % 2 == 0 ? 0.0f : 1.0f) : (x % 2 == 0 ? 1.0f : 2.0f);
        }
    }
    const Tensor t = apply_geometry(marker, ops);
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            if (t.at(r, c, 0) == 0.0f && t.at(r, c + 1, 0) == 1.0f &&
                t.at(r + 1, c, 0) == 1.0f && t.at(r + 1, c + 1, 0) == 2.0f) {
                *dr = r;
                *dc = c;
                return;
            }
        }
    }
    throw ContractError("augment: no RGGB-phase offset found"); // unreachable
}

Tensor crop(const Tensor& img, int y0, int x0, int h, int w) {
    Tensor out(h, w, img.c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < img.c; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
        }
    }
    return out;
}

} // namespace

TrainPair augment_with(const TrainPair& pair, const AugmentOps& ops) {
    require(pair.packed.c == 4, "augment: packed input must have 4 channels");
    require(pair.target.c == 3, "augment: target must have 3 channels");
    require(pair.target.h == pair.packed.h * 2 && pair.target.w == pair.packed.w * 2,
            "augment: target dims must be exactly 2x the packed dims");

    // Work in the mosaic domain; the packed representation is RGGB-canonical.
    Tensor mosaic = unpack_mosaic(pair.packed, CfaPattern::kRGGB);
    mosaic = apply_geometry(mosaic, ops);
    Tensor target = apply_geometry(pair.target, ops);

    int dr = 0, dc = 0;
    rggb_offset(ops, &dr, &dc);
    const int ch = (mosaic.h - dr) & ~1;
    const int cw = (mosaic.w - dc) & ~1;
    const bool needs_crop = dr != 0 || dc != 0 || ch != mosaic.h || cw != mosaic.w;
    // A cropped result below 32px mosaic (16px packed) is no longer a usable
    // training sample; skip the augmentation instead.
    if (needs_crop && (ch < 32 || cw < 32)) return pair;
    if (needs_crop) {
        mosaic = crop(mosaic, dr, dc, ch, cw);
        target = crop(target, dr, dc, ch, cw);
    }

    TrainPair out;
    out.name = pair.name;
    out.packed = pack_mosaic(mosaic, CfaPattern::kRGGB);
    out.target = std::move(target);
    return out;
}

TrainPair augment_pair(const TrainPair& pair, uint64_t seed) {
    Rng rng(mix_seed(seed, 0x61756721 /* "aug!" */));
    AugmentOps ops;
    ops.rot90 = static_cast<int>(rng.below(4));
    ops.hflip = rng.below(2) == 1;
    ops.vflip = rng.below(2) == 1;
    return augment_with(pair, ops);
}

} // namespace microisp

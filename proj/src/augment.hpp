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

#include "image_io.hpp"

namespace microisp {

/// Geometric training augmentation: `rot90` quarter-turns (clockwise), then
/// an optional horizontal flip, then an optional vertical flip.
struct AugmentOps {
    bool hflip = false;
    bool vflip = false;
    int rot90 = 0; // 0..3
};

// Applies the transform to the underlying mosaic and the target coherently.
// Because a flip or rotation of an even-sized RGGB mosaic generally lands on
// a different CFA phase, the result is re-aligned by cropping up to one
// 2-pixel-aligned row/column strip, so the packed channel semantics
// (R, G1, G2, B) are preserved. Output dims may shrink by one packed unit per
// affected axis. Pairs too small to crop are returned unchanged.
TrainPair augment_with(const TrainPair& pair, const AugmentOps& ops);

/// Draws random flips/rotations from `seed` and applies them.
TrainPair augment_pair(const TrainPair& pair, uint64_t seed);

/// Generic geometric helpers (used by the augmentation oracle as well).
Tensor rotate90_cw(const Tensor& img);
Tensor flip_horizontal(const Tensor& img);
Tensor flip_vertical(const Tensor& img);
Tensor apply_geometry(const Tensor& img, const AugmentOps& ops);

} // namespace microisp

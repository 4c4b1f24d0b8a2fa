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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "error.hpp"

namespace microisp {

// Dense H x W x C array, row-major with channel-fastest ordering:
// element (y, x, c) lives at data[(y * w + x) * c_total + c]. The layout keeps
// a pixel's channels contiguous, which the 4-channel kernels rely on.
//
// Image3<float> is the production value type; Image3<double> backs the 64-bit
// gradient-check path.
template <typename T>
struct Image3 {
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<T> data;

    Image3() = default;
    Image3(int height, int width, int channels)
        : h(height), w(width), c(channels),
          data(static_cast<size_t>(height) * width * channels, T(0)) {
        require(height > 0 && width > 0 && channels > 0, "Image3: dims must be positive");
    }

    static Image3 filled(int height, int width, int channels, T value) {
        Image3 img(height, width, channels);
        for (auto& v : img.data) v = value;
        return img;
    }

    size_t size() const { return data.size(); }
    size_t pixel_count() const { return static_cast<size_t>(h) * w; }

    T& at(int y, int x, int ch) {
        return data[(static_cast<size_t>(y) * w + x) * c + ch];
    }
    T at(int y, int x, int ch) const {
        return data[(static_cast<size_t>(y) * w + x) * c + ch];
    }

    bool same_shape(const Image3& o) const { return h == o.h && w == o.w && c == o.c; }
};

using Tensor = Image3<float>;

template <typename T>
bool all_finite(const Image3<T>& img) {
    for (const T& v : img.data) {
        if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
}

template <typename To, typename From>
Image3<To> cast_image(const Image3<From>& src) {
    Image3<To> out(src.h, src.w, src.c);
    for (size_t i = 0; i < src.data.size(); ++i) out.data[i] = static_cast<To>(src.data[i]);
    return out;
}

} // namespace microisp

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
#include <cmath>
#include <functional>
#include <vector>

#include "tensor.hpp"

namespace microisp {

template <typename T>
struct LossResult {
    double value = 0.0;
    Image3<T> grad; // d(value)/d(pred)
};

/// Mean squared error over all elements; grad = 2 (pred - target) / N.
template <typename T>
LossResult<T> mse_loss(const Image3<T>& pred, const Image3<T>& target);

// Mean SSIM between two images. 11x11 Gaussian window (sigma 1.5), valid
// placements only, C1 = 0.01^2 and C2 = 0.03^2 for a dynamic range of 1,
// computed per channel and averaged. If grad is non-null it receives
// d(mean SSIM)/d(a).
template <typename T>
double ssim_mean(const Image3<T>& a, const Image3<T>& b, Image3<T>* grad);

/// SSIM loss = 1 - mean SSIM (shares the ssim_mean kernel exactly).
template <typename T>
LossResult<T> ssim_loss(const Image3<T>& pred, const Image3<T>& target);

struct CompositeWeights {
    double mse = 0.0;
    double ssim = 0.0;
    double vgg = 0.0;
};

struct CompositeNormalizers {
    double mse = 1.0;
    double ssim = 1.0;
    double vgg = 1.0;
};

/// Pluggable perceptual term: returns (loss, d loss / d pred).
template <typename T>
using PerceptualLossFn =
    std::function<std::pair<double, Image3<T>>(const Image3<T>& pred, const Image3<T>& target)>;

// Weighted sum of normalized terms: sum_k w_k * L_k / n_k. Terms with zero
// weight are not evaluated. A positive vgg weight without an extractor is a
// configuration error; no extractor ships with the library.
template <typename T>
LossResult<T> composite_loss(const Image3<T>& pred, const Image3<T>& target,
                             const CompositeWeights& w, const CompositeNormalizers& n,
                             const PerceptualLossFn<T>* vgg = nullptr);

// --- implementation ---

template <typename T>
LossResult<T> mse_loss(const Image3<T>& pred, const Image3<T>& target) {
    require(pred.same_shape(target), "mse_loss: dims mismatch");
    LossResult<T> r;
    double acc = 0.0;
    const size_t n = pred.size();
    for (size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
        acc += d * d;
    }
    r.value = acc / static_cast<double>(n);
    r.grad = Image3<T>(pred.h, pred.w, pred.c);
    const T scale = static_cast<T>(2.0 / static_cast<double>(n));
    for (size_t i = 0; i < n; ++i) r.grad.data[i] = (pred.data[i] - target.data[i]) * scale;
    return r;
}

namespace detail {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

template <typename T>
const std::array<T, kSsimWindow>& ssim_window() {
    static const std::array<T, kSsimWindow> taps = [] {
        std::array<double, kSsimWindow> w{};
        double sum = 0.0;
        for (int i = 0; i < kSsimWindow; ++i) {
            const double d = i - (kSsimWindow - 1) / 2.0;
            w[static_cast<size_t>(i)] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
            sum += w[static_cast<size_t>(i)];
        }
        std::array<T, kSsimWindow> out{};
        for (int i = 0; i < kSsimWindow; ++i) out[static_cast<size_t>(i)] = static_cast<T>(w[static_cast<size_t>(i)] / sum);
        return out;
    }();
    return taps;
}

// Separable valid-mode Gaussian correlation of an h x w plane:
// out is (h - 10) x (w - 10).
template <typename T>
void filter_valid(const std::vector<T>& plane, int h, int w, std::vector<T>& tmp,
                  std::vector<T>& out) {
    const auto& win = ssim_window<T>();
    const int ow = w - kSsimWindow + 1;
    const int oh = h - kSsimWindow + 1;
    tmp.assign(static_cast<size_t>(h) * ow, T(0));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            T acc = T(0);
            for (int k = 0; k < kSsimWindow; ++k) acc += win[static_cast<size_t>(k)] * plane[static_cast<size_t>(y) * w + x + k];
            tmp[static_cast<size_t>(y) * ow + x] = acc;
        }
    }
    out.assign(static_cast<size_t>(oh) * ow, T(0));
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            T acc = T(0);
            for (int k = 0; k < kSsimWindow; ++k) acc += win[static_cast<size_t>(k)] * tmp[static_cast<size_t>(y + k) * ow + x];
            out[static_cast<size_t>(y) * ow + x] = acc;
        }
    }
}

// Transpose of filter_valid: spreads an (h-10) x (w-10) map of window
// coefficients back onto the h x w input grid.
template <typename T>
void spread_valid(const std::vector<T>& map, int h, int w, std::vector<T>& tmp,
                  std::vector<T>& out) {
    const auto& win = ssim_window<T>();
    const int ow = w - kSsimWindow + 1;
    const int oh = h - kSsimWindow + 1;
    tmp.assign(static_cast<size_t>(h) * ow, T(0));
    for (int y = 0; y < oh; ++y) {
        for (int k = 0; k < kSsimWindow; ++k) {
            const T wk = win[static_cast<size_t>(k)];
            T* dst = tmp.data() + static_cast<size_t>(y + k) * ow;
            const T* src = map.data() + static_cast<size_t>(y) * ow;
            for (int x = 0; x < ow; ++x) dst[x] += wk * src[x];
        }
    }
    out.assign(static_cast<size_t>(h) * w, T(0));
    for (int y = 0; y < h; ++y) {
        const T* src = tmp.data() + static_cast<size_t>(y) * ow;
        T* dst = out.data() + static_cast<size_t>(y) * w;
        for (int x = 0; x < ow; ++x) {
            const T v = src[x];
            for (int k = 0; k < kSsimWindow; ++k) dst[x + k] += win[static_cast<size_t>(k)] * v;
        }
    }
}

} // namespace detail

template <typename T>
double ssim_mean(const Image3<T>& a, const Image3<T>& b, Image3<T>* grad) {
    require(a.same_shape(b), "ssim: dims mismatch");
    require(a.h >= detail::kSsimWindow && a.w >= detail::kSsimWindow,
            "ssim: image smaller than the 11x11 window");
    const int h = a.h, w = a.w, ch = a.c;
    const int oh = h - detail::kSsimWindow + 1;
    const int ow = w - detail::kSsimWindow + 1;
    const T c1 = static_cast<T>(detail::kSsimC1);
    const T c2 = static_cast<T>(detail::kSsimC2);

    if (grad) *grad = Image3<T>(h, w, ch);

    std::vector<T> x(static_cast<size_t>(h) * w), y(static_cast<size_t>(h) * w);
    std::vector<T> xx(x.size()), yy(x.size()), xy(x.size());
    std::vector<T> mx, my, mxx, myy, mxy, tmp;
    std::vector<T> p1, p2, p3, s1, s2, s3;

    double total = 0.0;
    for (int c = 0; c < ch; ++c) {
        for (int i = 0; i < h * w; ++i) {
            const T xv = a.data[static_cast<size_t>(i) * ch + c];
            const T yv = b.data[static_cast<size_t>(i) * ch + c];
            x[static_cast<size_t>(i)] = xv;
            y[static_cast<size_t>(i)] = yv;
            xx[static_cast<size_t>(i)] = xv * xv;
            yy[static_cast<size_t>(i)] = yv * yv;
            xy[static_cast<size_t>(i)] = xv * yv;
        }
        detail::filter_valid(x, h, w, tmp, mx);
        detail::filter_valid(y, h, w, tmp, my);
        detail::filter_valid(xx, h, w, tmp, mxx);
        detail::filter_valid(yy, h, w, tmp, myy);
        detail::filter_valid(xy, h, w, tmp, mxy);

        if (grad) {
            p1.assign(mx.size(), T(0));
            p2.assign(mx.size(), T(0));
            p3.assign(mx.size(), T(0));
        }
        for (size_t i = 0; i < mx.size(); ++i) {
            const T ux = mx[i], uy = my[i];
            const T sx2 = mxx[i] - ux * ux;
            const T sy2 = myy[i] - uy * uy;
            const T sxy = mxy[i] - ux * uy;
            const T a1 = T(2) * ux * uy + c1;
            const T a2 = T(2) * sxy + c2;
            const T b1 = ux * ux + uy * uy + c1;
            const T b2 = sx2 + sy2 + c2;
            const T s = (a1 * a2) / (b1 * b2);
            total += static_cast<double>(s);
            if (grad) {
                const T common = T(1) / (b1 * b2);
                p1[i] = T(2) * common * uy * (a2 - a1) - T(2) * s * ux / b1 + T(2) * s * ux / b2;
                p2[i] = T(2) * a1 * common;
                p3[i] = -T(2) * s / b2;
            }
        }
        if (grad) {
            detail::spread_valid(p1, h, w, tmp, s1);
            detail::spread_valid(p2, h, w, tmp, s2);
            detail::spread_valid(p3, h, w, tmp, s3);
            const T inv_m = static_cast<T>(1.0 / (static_cast<double>(oh) * ow * ch));
            for (int i = 0; i < h * w; ++i) {
                const T gi = s1[static_cast<size_t>(i)] + y[static_cast<size_t>(i)] * s2[static_cast<size_t>(i)] +
                             x[static_cast<size_t>(i)] * s3[static_cast<size_t>(i)];
                grad->data[static_cast<size_t>(i) * ch + c] = gi * inv_m;
            }
        }
    }
    return total / (static_cast<double>(oh) * ow * ch);
}

template <typename T>
LossResult<T> ssim_loss(const Image3<T>& pred, const Image3<T>& target) {
    LossResult<T> r;
    Image3<T> g;
    r.value = 1.0 - ssim_mean(pred, target, &g);
    for (auto& v : g.data) v = -v;
    r.grad = std::move(g);
    return r;
}

template <typename T>
LossResult<T> composite_loss(const Image3<T>& pred, const Image3<T>& target,
                             const CompositeWeights& w, const CompositeNormalizers& n,
                             const PerceptualLossFn<T>* vgg) {
    require(pred.same_shape(target), "composite_loss: dims mismatch");
    if (w.mse < 0 || w.ssim < 0 || w.vgg < 0) throw ConfigError("composite_loss: weights must be >= 0");
    if (w.mse + w.ssim + w.vgg <= 0) throw ConfigError("composite_loss: at least one weight must be > 0");
    if (n.mse <= 0 || n.ssim <= 0 || n.vgg <= 0) throw ConfigError("composite_loss: normalizers must be positive");
    if (w.vgg > 0 && (vgg == nullptr || !*vgg)) {
        throw ConfigError("composite_loss: vgg weight set but no feature extractor supplied");
    }

    LossResult<T> out;
    out.grad = Image3<T>(pred.h, pred.w, pred.c);
    auto fold = [&out](double weight, double normalizer, double value, const Image3<T>& grad) {
        const double k = weight / normalizer;
        out.value += k * value;
        const T kt = static_cast<T>(k);
        for (size_t i = 0; i < grad.data.size(); ++i) out.grad.data[i] += kt * grad.data[i];
    };
    if (w.mse > 0) {
        LossResult<T> r = mse_loss(pred, target);
        fold(w.mse, n.mse, r.value, r.grad);
    }
    if (w.ssim > 0) {
        LossResult<T> r = ssim_loss(pred, target);
        fold(w.ssim, n.ssim, r.value, r.grad);
    }
    if (w.vgg > 0) {
        auto [value, grad] = (*vgg)(pred, target);
        require(grad.same_shape(pred), "composite_loss: vgg gradient dims mismatch");
        fold(w.vgg, n.vgg, value, grad);
    }
    return out;
}

} // namespace microisp

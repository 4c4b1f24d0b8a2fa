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

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "parallel.hpp"
#include "tensor.hpp"

// Tensor kernels for the MicroISP graph, forward and backward.
//
// Determinism rules observed by every kernel here:
//   * accumulation order inside a convolution tap sum is fixed:
//     kernel-row, then kernel-col, then input channel;
//   * reductions over pixels run in row-major pixel order;
//   * internal parallelism only splits independent output pixels, never a
//     single accumulation chain.
// Identical inputs therefore produce bitwise-identical outputs for any thread
// count.
//
// The kern:: layer operates on raw buffers so the planned executor can run on
// preallocated storage; the Image3 wrappers below add allocation and contract
// checks.

namespace microisp {

template <typename T>
struct ConvWeightsT {
    int kh = 0;
    int kw = 0;
    int cin = 0;
    int cout = 0;
    // kernel[((ky * kw + kx) * cin + ci) * cout + co]
    std::vector<T> kernel;
    std::vector<T> bias;

    ConvWeightsT() = default;
    ConvWeightsT(int kh_, int kw_, int cin_, int cout_)
        : kh(kh_), kw(kw_), cin(cin_), cout(cout_),
          kernel(static_cast<size_t>(kh_) * kw_ * cin_ * cout_, T(0)),
          bias(static_cast<size_t>(cout_), T(0)) {}

    bool empty() const { return kernel.empty(); }

    void validate() const {
        require((kh == 1 || kh == 3) && (kw == 1 || kw == 3), "conv kernel dims must be 1 or 3");
        require(cin >= 1 && cout >= 1, "conv channel counts must be positive");
        require(kernel.size() == static_cast<size_t>(kh) * kw * cin * cout, "conv kernel size mismatch");
        require(bias.size() == static_cast<size_t>(cout), "conv bias size mismatch");
    }

    T& at(int ky, int kx, int ci, int co) {
        return kernel[((static_cast<size_t>(ky) * kw + kx) * cin + ci) * cout + co];
    }
    T at(int ky, int kx, int ci, int co) const {
        return kernel[((static_cast<size_t>(ky) * kw + kx) * cin + ci) * cout + co];
    }
};

using ConvWeights = ConvWeightsT<float>;

template <typename T>
struct PReLUParamsT {
    std::vector<T> alpha; // one negative slope per channel

    PReLUParamsT() = default;
    explicit PReLUParamsT(int channels, T slope = T(0.25))
        : alpha(static_cast<size_t>(channels), slope) {}

    bool empty() const { return alpha.empty(); }
};

using PReLUParams = PReLUParamsT<float>;

/// Output extent of a same-padded convolution: ceil(n / stride).
inline int conv_out_dim(int n, int stride) { return (n + stride - 1) / stride; }

// Leading (top/left) padding for "same" zero padding. Total padding is
// max((out-1)*stride + k - n, 0); the odd pixel goes to the bottom/right side.
inline int conv_pad_before(int n, int k, int stride) {
    int out = conv_out_dim(n, stride);
    int total = (out - 1) * stride + k - n;
    if (total < 0) total = 0;
    return total / 2;
}

namespace kern {

template <typename T>
void conv2d(const T* xd, int xh, int xw, const ConvWeightsT<T>& w, int stride, T* od) {
    const int oh = conv_out_dim(xh, stride);
    const int ow = conv_out_dim(xw, stride);
    const int pt = conv_pad_before(xh, w.kh, stride);
    const int pl = conv_pad_before(xw, w.kw, stride);
    const T* kd = w.kernel.data();
    const int cin = w.cin, cout = w.cout, kw = w.kw, kh = w.kh;

    const int64_t work_per_row = static_cast<int64_t>(ow) * kh * kw * cin * cout;
    const int64_t grain = std::max<int64_t>(1, 32768 / std::max<int64_t>(1, work_per_row));

    parallel_for(oh, grain, [&](int64_t row_begin, int64_t row_end) {
        std::vector<T> acc(static_cast<size_t>(cout));
        for (int64_t oy = row_begin; oy < row_end; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                for (int co = 0; co < cout; ++co) acc[static_cast<size_t>(co)] = w.bias[static_cast<size_t>(co)];
                const int iy0 = static_cast<int>(oy) * stride - pt;
                const int ix0 = ox * stride - pl;
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = iy0 + ky;
                    if (iy < 0 || iy >= xh) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ix0 + kx;
                        if (ix < 0 || ix >= xw) continue;
                        const T* px = xd + (static_cast<size_t>(iy) * xw + ix) * cin;
                        const T* kp = kd + (static_cast<size_t>(ky) * kw + kx) * cin * cout;
                        for (int ci = 0; ci < cin; ++ci) {
                            const T v = px[ci];
                            const T* kc = kp + static_cast<size_t>(ci) * cout;
                            for (int co = 0; co < cout; ++co) acc[static_cast<size_t>(co)] += v * kc[co];
                        }
                    }
                }
                T* po = od + (static_cast<size_t>(oy) * ow + ox) * cout;
                for (int co = 0; co < cout; ++co) po[co] = acc[static_cast<size_t>(co)];
            }
        }
    });
}

template <typename T>
void prelu(const T* xd, size_t n, int c, const T* alpha, T* od) {
    for (size_t i = 0; i < n; ++i) {
        const T v = xd[i];
        od[i] = v >= T(0) ? v : alpha[i % static_cast<size_t>(c)] * v;
    }
}

template <typename T>
void space_to_depth(const T* xd, int xh, int xw, int xc, T* od) {
    const int oh = xh / 2, ow = xw / 2, oc = xc * 4;
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            T* po = od + (static_cast<size_t>(y) * ow + x) * oc;
            for (int ci = 0; ci < xc; ++ci) {
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        po[ci * 4 + dy * 2 + dx] =
                            xd[(static_cast<size_t>(2 * y + dy) * xw + (2 * x + dx)) * xc + ci];
                    }
                }
            }
        }
    }
}

template <typename T>
void depth_to_space(const T* xd, int xh, int xw, int xc, T* od) {
    const int oc = xc / 4, ow = xw * 2;
    for (int y = 0; y < xh; ++y) {
        for (int x = 0; x < xw; ++x) {
            const T* px = xd + (static_cast<size_t>(y) * xw + x) * xc;
            for (int co = 0; co < oc; ++co) {
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        od[(static_cast<size_t>(2 * y + dy) * ow + (2 * x + dx)) * oc + co] =
                            px[co * 4 + dy * 2 + dx];
                    }
                }
            }
        }
    }
}

/// Per-channel spatial mean, accumulated in double in row-major pixel order.
template <typename T>
void global_avg_pool(const T* xd, int xh, int xw, int xc, T* od) {
    std::vector<double> acc(static_cast<size_t>(xc), 0.0);
    const size_t n = static_cast<size_t>(xh) * xw * xc;
    for (size_t i = 0; i < n; ++i) acc[i % static_cast<size_t>(xc)] += static_cast<double>(xd[i]);
    const double inv = 1.0 / (static_cast<double>(xh) * xw);
    for (int c = 0; c < xc; ++c) od[c] = static_cast<T>(acc[static_cast<size_t>(c)] * inv);
}

template <typename T>
void sigmoid(const T* xd, size_t n, T* od) {
    for (size_t i = 0; i < n; ++i) od[i] = T(1) / (T(1) + std::exp(-xd[i]));
}

template <typename T>
void add(const T* a, const T* b, size_t n, T* od) {
    for (size_t i = 0; i < n; ++i) od[i] = a[i] + b[i];
}

/// Safe with od == xd (pure elementwise).
template <typename T>
void channel_scale(const T* xd, const T* sd, size_t n, int c, T* od) {
    for (size_t i = 0; i < n; ++i) od[i] = xd[i] * sd[i % static_cast<size_t>(c)];
}

/// Copies a single-channel plane into channel `ch` of an interleaved buffer.
template <typename T>
void write_channel(const T* src, size_t pixels, T* dst, int dst_c, int ch) {
    for (size_t i = 0; i < pixels; ++i) dst[i * static_cast<size_t>(dst_c) + ch] = src[i];
}

template <typename T>
void clamp01(T* xd, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        T v = xd[i];
        if (v < T(0)) v = T(0);
        if (v > T(1)) v = T(1);
        xd[i] = v;
    }
}

} // namespace kern

// --- Image3 wrappers ---

template <typename T>
Image3<T> conv2d(const Image3<T>& x, const ConvWeightsT<T>& w, int stride) {
    w.validate();
    require(stride == 1 || stride == 3, "conv2d: stride must be 1 or 3");
    require(x.c == w.cin, "conv2d: input channels do not match kernel");
    Image3<T> out(conv_out_dim(x.h, stride), conv_out_dim(x.w, stride), w.cout);
    kern::conv2d(x.data.data(), x.h, x.w, w, stride, out.data.data());
    return out;
}

// Gradients of conv2d w.r.t. input and weights. grad_x is computed per input
// pixel (gather form, fixed tap order); grad_w/grad_bias accumulate over
// output pixels in row-major order.
template <typename T>
void conv2d_vjp(const Image3<T>& x, const ConvWeightsT<T>& w, int stride,
                const Image3<T>& upstream, Image3<T>* grad_x, ConvWeightsT<T>* grad_w) {
    w.validate();
    require(stride == 1 || stride == 3, "conv2d_vjp: stride must be 1 or 3");
    require(x.c == w.cin, "conv2d_vjp: input channels do not match kernel");
    const int oh = conv_out_dim(x.h, stride);
    const int ow = conv_out_dim(x.w, stride);
    require(upstream.h == oh && upstream.w == ow && upstream.c == w.cout,
            "conv2d_vjp: upstream gradient dims do not match conv output");
    const int pt = conv_pad_before(x.h, w.kh, stride);
    const int pl = conv_pad_before(x.w, w.kw, stride);
    const int cin = w.cin, cout = w.cout, kw = w.kw, kh = w.kh;

    if (grad_x) {
        *grad_x = Image3<T>(x.h, x.w, x.c);
        T* gd = grad_x->data.data();
        const T* ud = upstream.data.data();
        const T* kd = w.kernel.data();
        const int64_t work_per_row = static_cast<int64_t>(x.w) * kh * kw * cout;
        const int64_t grain = std::max<int64_t>(1, 32768 / std::max<int64_t>(1, work_per_row));
        parallel_for(x.h, grain, [&](int64_t row_begin, int64_t row_end) {
            for (int64_t iy = row_begin; iy < row_end; ++iy) {
                for (int ix = 0; ix < x.w; ++ix) {
                    T* gp = gd + (iy * x.w + ix) * cin;
                    for (int ky = 0; ky < kh; ++ky) {
                        const int ty = static_cast<int>(iy) + pt - ky;
                        if (ty < 0 || ty % stride != 0) continue;
                        const int oy = ty / stride;
                        if (oy >= oh) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int tx = ix + pl - kx;
                            if (tx < 0 || tx % stride != 0) continue;
                            const int ox = tx / stride;
                            if (ox >= ow) continue;
                            const T* up = ud + (static_cast<size_t>(oy) * ow + ox) * cout;
                            const T* kp = kd + (static_cast<size_t>(ky) * kw + kx) * cin * cout;
                            for (int ci = 0; ci < cin; ++ci) {
                                T acc = T(0);
                                const T* kc = kp + static_cast<size_t>(ci) * cout;
                                for (int co = 0; co < cout; ++co) acc += kc[co] * up[co];
                                gp[ci] += acc;
                            }
                        }
                    }
                }
            }
        });
    }

    if (grad_w) {
        *grad_w = ConvWeightsT<T>(kh, kw, cin, cout);
        const T* xd = x.data.data();
        const T* ud = upstream.data.data();
        for (int oy = 0; oy < oh; ++oy) {
            const int iy0 = oy * stride - pt;
            for (int ox = 0; ox < ow; ++ox) {
                const int ix0 = ox * stride - pl;
                const T* up = ud + (static_cast<size_t>(oy) * ow + ox) * cout;
                for (int co = 0; co < cout; ++co) grad_w->bias[static_cast<size_t>(co)] += up[co];
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = iy0 + ky;
                    if (iy < 0 || iy >= x.h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ix0 + kx;
                        if (ix < 0 || ix >= x.w) continue;
                        const T* px = xd + (static_cast<size_t>(iy) * x.w + ix) * cin;
                        T* gw = grad_w->kernel.data() +
                                (static_cast<size_t>(ky) * kw + kx) * cin * cout;
                        for (int ci = 0; ci < cin; ++ci) {
                            const T v = px[ci];
                            T* gc = gw + static_cast<size_t>(ci) * cout;
                            for (int co = 0; co < cout; ++co) gc[co] += v * up[co];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
Image3<T> prelu(const Image3<T>& x, const PReLUParamsT<T>& p) {
    require(p.alpha.size() == static_cast<size_t>(x.c), "prelu: alpha length must equal channels");
    Image3<T> out(x.h, x.w, x.c);
    kern::prelu(x.data.data(), x.size(), x.c, p.alpha.data(), out.data.data());
    return out;
}

template <typename T>
void prelu_vjp(const Image3<T>& x, const PReLUParamsT<T>& p, const Image3<T>& upstream,
               Image3<T>* grad_x, std::vector<T>* grad_alpha) {
    require(p.alpha.size() == static_cast<size_t>(x.c), "prelu_vjp: alpha length must equal channels");
    require(upstream.same_shape(x), "prelu_vjp: upstream dims mismatch");
    const size_t n = x.size();
    const size_t c = static_cast<size_t>(x.c);
    if (grad_x) {
        *grad_x = Image3<T>(x.h, x.w, x.c);
        for (size_t i = 0; i < n; ++i) {
            const T v = x.data[i];
            grad_x->data[i] = v >= T(0) ? upstream.data[i] : p.alpha[i % c] * upstream.data[i];
        }
    }
    if (grad_alpha) {
        grad_alpha->assign(c, T(0));
        for (size_t i = 0; i < n; ++i) {
            const T v = x.data[i];
            if (v < T(0)) (*grad_alpha)[i % c] += v * upstream.data[i];
        }
    }
}

// 2x2 space-to-depth. Output channel order groups the four cell positions
// (row-major scan of the 2x2 cell) per input channel:
//   out(y, x, ci*4 + (dy*2 + dx)) = in(2y + dy, 2x + dx, ci)
template <typename T>
Image3<T> space_to_depth(const Image3<T>& x) {
    require(x.h % 2 == 0 && x.w % 2 == 0, "space_to_depth: height and width must be even");
    Image3<T> out(x.h / 2, x.w / 2, x.c * 4);
    kern::space_to_depth(x.data.data(), x.h, x.w, x.c, out.data.data());
    return out;
}

/// Exact inverse of space_to_depth.
template <typename T>
Image3<T> depth_to_space(const Image3<T>& x) {
    require(x.c % 4 == 0, "depth_to_space: channels must be divisible by 4");
    Image3<T> out(x.h * 2, x.w * 2, x.c / 4);
    kern::depth_to_space(x.data.data(), x.h, x.w, x.c, out.data.data());
    return out;
}

template <typename T>
Image3<T> global_avg_pool(const Image3<T>& x) {
    Image3<T> out(1, 1, x.c);
    kern::global_avg_pool(x.data.data(), x.h, x.w, x.c, out.data.data());
    return out;
}

template <typename T>
void global_avg_pool_vjp(const Image3<T>& x, const Image3<T>& upstream, Image3<T>* grad_x) {
    require(upstream.h == 1 && upstream.w == 1 && upstream.c == x.c,
            "global_avg_pool_vjp: upstream must be 1x1xC");
    *grad_x = Image3<T>(x.h, x.w, x.c);
    const T inv = static_cast<T>(1.0 / static_cast<double>(x.pixel_count()));
    const size_t n = x.size();
    for (size_t i = 0; i < n; ++i) grad_x->data[i] = upstream.data[i % static_cast<size_t>(x.c)] * inv;
}

template <typename T>
Image3<T> sigmoid(const Image3<T>& x) {
    Image3<T> out(x.h, x.w, x.c);
    kern::sigmoid(x.data.data(), x.size(), out.data.data());
    return out;
}

/// Sigmoid backward from the saved forward output s: g * s * (1 - s).
template <typename T>
void sigmoid_vjp(const Image3<T>& out, const Image3<T>& upstream, Image3<T>* grad_x) {
    require(upstream.same_shape(out), "sigmoid_vjp: upstream dims mismatch");
    *grad_x = Image3<T>(out.h, out.w, out.c);
    for (size_t i = 0; i < out.size(); ++i) {
        const T s = out.data[i];
        grad_x->data[i] = upstream.data[i] * s * (T(1) - s);
    }
}

template <typename T>
Image3<T> add(const Image3<T>& a, const Image3<T>& b) {
    require(a.same_shape(b), "add: dims mismatch");
    Image3<T> out(a.h, a.w, a.c);
    kern::add(a.data.data(), b.data.data(), a.size(), out.data.data());
    return out;
}

/// Broadcast multiply of x by a 1x1xC coefficient tensor.
template <typename T>
Image3<T> channel_scale(const Image3<T>& x, const Image3<T>& s) {
    require(s.h == 1 && s.w == 1, "channel_scale: scale must be 1x1xC");
    require(s.c == x.c, "channel_scale: channel counts must match");
    Image3<T> out(x.h, x.w, x.c);
    kern::channel_scale(x.data.data(), s.data.data(), x.size(), x.c, out.data.data());
    return out;
}

template <typename T>
void channel_scale_vjp(const Image3<T>& x, const Image3<T>& s, const Image3<T>& upstream,
                       Image3<T>* grad_x, Image3<T>* grad_s) {
    require(upstream.same_shape(x), "channel_scale_vjp: upstream dims mismatch");
    const size_t c = static_cast<size_t>(x.c);
    if (grad_x) {
        *grad_x = Image3<T>(x.h, x.w, x.c);
        for (size_t i = 0; i < x.size(); ++i) grad_x->data[i] = upstream.data[i] * s.data[i % c];
    }
    if (grad_s) {
        *grad_s = Image3<T>(1, 1, x.c);
        for (size_t i = 0; i < x.size(); ++i) grad_s->data[i % c] += upstream.data[i] * x.data[i];
    }
}

/// Channel concatenation in argument order; spatial dims must match.
template <typename T>
Image3<T> concat_channels(const std::vector<const Image3<T>*>& parts) {
    require(!parts.empty(), "concat_channels: no inputs");
    int total_c = 0;
    for (const auto* p : parts) {
        require(p->h == parts[0]->h && p->w == parts[0]->w, "concat_channels: spatial dims mismatch");
        total_c += p->c;
    }
    Image3<T> out(parts[0]->h, parts[0]->w, total_c);
    for (int y = 0; y < out.h; ++y) {
        for (int x = 0; x < out.w; ++x) {
            int co = 0;
            for (const auto* p : parts) {
                for (int ci = 0; ci < p->c; ++ci) out.at(y, x, co++) = p->at(y, x, ci);
            }
        }
    }
    return out;
}

template <typename T>
Image3<T> clamp01(const Image3<T>& x) {
    Image3<T> out = x;
    kern::clamp01(out.data.data(), out.size());
    return out;
}

} // namespace microisp

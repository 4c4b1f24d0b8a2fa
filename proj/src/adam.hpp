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
#include <cstdint>
#include <vector>

#include "error.hpp"

namespace microisp {

// ADAM optimizer state; m/v mirror the parameter array layout. Only the
// learning rate comes from the training schedule, the remaining
// hyperparameters use the standard defaults.
template <typename T>
struct AdamStateT {
    int64_t step = 0;
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;

    static AdamStateT zeros_like(const std::vector<std::vector<T>>& shapes) {
        AdamStateT s;
        s.m.reserve(shapes.size());
        s.v.reserve(shapes.size());
        for (const auto& a : shapes) {
            s.m.emplace_back(a.size(), T(0));
            s.v.emplace_back(a.size(), T(0));
        }
        return s;
    }
};

using AdamState = AdamStateT<float>;

/// One ADAM update with bias correction. params[i] and grads[i] must match
/// the state layout elementwise.
template <typename T>
void adam_step(const std::vector<std::vector<T>*>& params,
               const std::vector<std::vector<T>>& grads, AdamStateT<T>& state, T lr) {
    require(lr > T(0), "adam_step: lr must be positive");
    require(params.size() == grads.size() && params.size() == state.m.size(),
            "adam_step: parameter/gradient/state group counts differ");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(static_cast<double>(state.beta1), static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(static_cast<double>(state.beta2), static_cast<double>(state.step));
    const T inv_bc1 = static_cast<T>(1.0 / bc1);
    const T inv_bc2 = static_cast<T>(1.0 / bc2);
    const T one_m_b1 = T(1) - state.beta1;
    const T one_m_b2 = T(1) - state.beta2;

    for (size_t g = 0; g < params.size(); ++g) {
        std::vector<T>& p = *params[g];
        const std::vector<T>& grad = grads[g];
        require(p.size() == grad.size() && p.size() == state.m[g].size(),
                "adam_step: group size mismatch");
        std::vector<T>& m = state.m[g];
        std::vector<T>& v = state.v[g];
        for (size_t i = 0; i < p.size(); ++i) {
            const T gi = grad[i];
            m[i] = state.beta1 * m[i] + one_m_b1 * gi;
            v[i] = state.beta2 * v[i] + one_m_b2 * gi * gi;
            const T m_hat = m[i] * inv_bc1;
            const T v_hat = v[i] * inv_bc2;
            p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

} // namespace microisp

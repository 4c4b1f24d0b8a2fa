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

#include <string>
#include <vector>

#include "executor.hpp"
#include "tensor.hpp"

namespace microisp {

// Peak signal-to-noise ratio in dB: 10 log10(max_value^2 / MSE), MSE
// accumulated in double. Capped at 99.0 dB (identical images would otherwise
// be infinite); the cap applies to any value above it.
double psnr(const Tensor& a, const Tensor& b, double max_value = 1.0);

/// Mean SSIM (shares the training SSIM kernel: ssim_loss == 1 - ssim_metric).
double ssim_metric(const Tensor& a, const Tensor& b);

struct MetricsRow {
    std::string name;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct MetricsReport {
    std::vector<MetricsRow> rows; // sorted by name
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    int count = 0;

    std::string to_text() const;
};

// Runs inference over every pair in the dataset directory through the planned
// executor and reports per-image and mean PSNR/SSIM. Rows are ordered by
// filename regardless of directory enumeration order.
MetricsReport evaluate_dataset(const Model& model, const std::string& dir,
                               BranchMode mode = BranchMode::kSequential);

} // namespace microisp

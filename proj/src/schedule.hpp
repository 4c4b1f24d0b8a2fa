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
#include <string>
#include <vector>

namespace microisp {

struct StageConfig {
    int epochs = 1;
    double lr = 2e-5;
    double w_mse = 0.0;
    double w_ssim = 0.0;
    double w_vgg = 0.0;
    bool normalize_terms = false; // freeze per-term normalizers on the first batch
};

struct TrainingSchedule {
    std::vector<StageConfig> stages;
    int batch_size = 50;
    uint64_t seed = 0;
    bool augment = true;

    void validate() const;
};

// The published three-stage recipe: 200 epochs of MSE, then 200 epochs of the
// normalized SSIM+MSE combination (the perceptual term is available only
// through the pluggable extractor interface and is omitted by default), then
// 100 epochs with SSIM:MSE weighted 2:1. Learning rate 2e-5, batch size 50.
TrainingSchedule paper_schedule();

/// Same structure scaled down for desk-size experiments (20/20/10 epochs,
/// batch size 8).
TrainingSchedule desk_schedule();

/// Parses the key/value schedule text format (see `microisp train --help`).
TrainingSchedule parse_schedule(const std::string& text);

/// "paper", "desk", or a path to a schedule file.
TrainingSchedule resolve_schedule(const std::string& spec);

std::string format_schedule(const TrainingSchedule& s);

} // namespace microisp

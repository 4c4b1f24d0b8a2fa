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

#include "schedule.hpp"

#include <fstream>
#include <sstream>

#include "error.hpp"

namespace microisp {

void TrainingSchedule::validate() const {
    if (stages.empty()) throw ConfigError("schedule: at least one stage required");
    if (batch_size < 1) throw ConfigError("schedule: batch_size must be >= 1");
    for (size_t i = 0; i < stages.size(); ++i) {
        const StageConfig& s = stages[i];
        const std::string where = "schedule stage " + std::to_string(i + 1);
        if (s.epochs < 1) throw ConfigError(where + ": epochs must be >= 1");
        if (s.lr <= 0) throw ConfigError(where + ": lr must be positive");
        if (s.w_mse < 0 || s.w_ssim < 0 || s.w_vgg < 0) {
            throw ConfigError(where + ": loss weights must be >= 0");
        }
        if (s.w_mse + s.w_ssim + s.w_vgg <= 0) {
            throw ConfigError(where + ": at least one loss weight must be > 0");
        }
    }
}

TrainingSchedule paper_schedule() {
    TrainingSchedule s;
    s.batch_size = 50;
    s.stages = {
        {200, 2e-5, 1.0, 0.0, 0.0, false},
        {200, 2e-5, 0.25, 0.5, 0.0, true},
        {100, 2e-5, 1.0, 2.0, 0.0, true},
    };
    return s;
}

TrainingSchedule desk_schedule() {
    TrainingSchedule s;
    s.batch_size = 8;
    s.stages = {
        {20, 2e-5, 1.0, 0.0, 0.0, false},
        {20, 2e-5, 0.25, 0.5, 0.0, true},
        {10, 2e-5, 1.0, 2.0, 0.0, true},
    };
    return s;
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw ConfigError("schedule: invalid boolean for '" + key + "': " + v);
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        size_t idx = 0;
        const double d = std::stod(v, &idx);
        if (idx != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("schedule: invalid number for '" + key + "': " + v);
    }
}

} // namespace

TrainingSchedule parse_schedule(const std::string& text) {
    TrainingSchedule sched;
    sched.stages.clear();
    StageConfig* stage = nullptr;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string key, value;
        if (!(ls >> key)) continue;
        ls >> value;
        std::string extra;
        if (ls >> extra) {
            throw ConfigError("schedule line " + std::to_string(line_no) + ": unexpected token '" + extra + "'");
        }

        if (key == "stage") {
            sched.stages.emplace_back();
            sched.stages.back().w_mse = 0.0;
            stage = &sched.stages.back();
            continue;
        }
        if (value.empty()) {
            throw ConfigError("schedule line " + std::to_string(line_no) + ": missing value for '" + key + "'");
        }
        if (stage == nullptr) {
            if (key == "batch_size") sched.batch_size = static_cast<int>(parse_double(value, key));
            else if (key == "seed") sched.seed = static_cast<uint64_t>(parse_double(value, key));
            else if (key == "augment") sched.augment = parse_bool(value, key);
            else throw ConfigError("schedule line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        } else {
            if (key == "epochs") stage->epochs = static_cast<int>(parse_double(value, key));
            else if (key == "lr") stage->lr = parse_double(value, key);
            else if (key == "w_mse") stage->w_mse = parse_double(value, key);
            else if (key == "w_ssim") stage->w_ssim = parse_double(value, key);
            else if (key == "w_vgg") stage->w_vgg = parse_double(value, key);
            else if (key == "normalize") stage->normalize_terms = parse_bool(value, key);
            else throw ConfigError("schedule line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    sched.validate();
    return sched;
}

TrainingSchedule resolve_schedule(const std::string& spec) {
    if (spec.empty() || spec == "desk") return desk_schedule();
    if (spec == "paper") return paper_schedule();
    std::ifstream f(spec);
    if (!f) throw IoError("schedule file not found: " + spec);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_schedule(buf.str());
}

std::string format_schedule(const TrainingSchedule& s) {
    std::ostringstream os;
    os << "batch_size " << s.batch_size << "\n";
    os << "seed " << s.seed << "\n";
    os << "augment " << (s.augment ? "on" : "off") << "\n";
    for (const StageConfig& st : s.stages) {
        os << "stage\n";
        os << "  epochs " << st.epochs << "\n";
        os << "  lr " << st.lr << "\n";
        os << "  w_mse " << st.w_mse << "\n";
        os << "  w_ssim " << st.w_ssim << "\n";
        os << "  w_vgg " << st.w_vgg << "\n";
        os << "  normalize " << (st.normalize_terms ? "on" : "off") << "\n";
    }
    return os.str();
}

} // namespace microisp

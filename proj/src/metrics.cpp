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

#include "metrics.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "image_io.hpp"
#include "loss.hpp"

namespace microisp {

namespace {
constexpr double kPsnrCap = 99.0;
}

double psnr(const Tensor& a, const Tensor& b, double max_value) {
    require(a.same_shape(b), "psnr: dims mismatch");
    require(max_value > 0.0, "psnr: max_value must be positive");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(a.size());
    if (mse == 0.0) return kPsnrCap;
    const double v = 10.0 * std::log10(max_value * max_value / mse);
    return v > kPsnrCap ? kPsnrCap : v;
}

double ssim_metric(const Tensor& a, const Tensor& b) { return ssim_mean<float>(a, b, nullptr); }

MetricsReport evaluate_dataset(const Model& model, const std::string& dir, BranchMode mode) {
    const PairLoadReport loaded = load_pairs(dir);
    if (loaded.pairs.empty()) throw ConfigError("evaluate: no usable pairs in " + dir);

    MetricsReport report;
    std::map<std::pair<int, int>, ExecutionPlan> plans; // per input size
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (const TrainPair& pair : loaded.pairs) {
        const auto key = std::make_pair(pair.packed.h, pair.packed.w);
        auto it = plans.find(key);
        if (it == plans.end()) {
            it = plans.emplace(key, build_plan(model, pair.packed.h, pair.packed.w, mode)).first;
        }
        const Tensor pred = execute(it->second, model, pair.packed);
        MetricsRow row;
        row.name = pair.name;
        row.psnr = psnr(pred, pair.target, 1.0);
        row.ssim = ssim_metric(pred, pair.target);
        psnr_sum += row.psnr;
        ssim_sum += row.ssim;
        report.rows.push_back(std::move(row));
    }
    report.count = static_cast<int>(report.rows.size());
    report.mean_psnr = psnr_sum / report.count;
    report.mean_ssim = ssim_sum / report.count;
    return report;
}

std::string MetricsReport::to_text() const {
    std::ostringstream os;
    os << "# image psnr_db ssim\n";
    os.setf(std::ios::fixed);
    os.precision(6);
    for (const MetricsRow& r : rows) os << r.name << " " << r.psnr << " " << r.ssim << "\n";
    os << "mean " << mean_psnr << " " << mean_ssim << " over " << count << " images\n";
    return os.str();
}

} // namespace microisp

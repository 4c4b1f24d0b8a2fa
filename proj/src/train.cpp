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

#include "train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "augment.hpp"
#include "io_util.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace microisp {

namespace fs = std::filesystem;

namespace {

constexpr uint64_t kShuffleStream = 0x73687566; // "shuf"
constexpr uint64_t kAugmentStream = 0x61756766; // "augf"

struct SampleLoss {
    double total = 0.0;
    double mse_term = 0.0; // raw MSE, also used for epoch PSNR reporting
    std::vector<std::vector<float>> grads;
};

// Loss terms and parameter gradients for one (possibly augmented) sample.
SampleLoss sample_loss_and_grads(const Model& model, const TrainPair& pair,
                                 const StageConfig& stage, const CompositeNormalizers& norm,
                                 const TrainOptions& opts, size_t n_groups) {
    SampleLoss out;
    out.grads.clear();

    Tape<float> tape;
    const int out_id = tape_forward(model, tape, pair.packed);
    const Tensor& pred = tape.value(out_id);

    Image3<float> total_grad(pred.h, pred.w, pred.c);
    {
        LossResult<float> r = mse_loss(pred, pair.target);
        out.mse_term = r.value;
        if (stage.w_mse > 0) {
            const double k = stage.w_mse / norm.mse;
            out.total += k * r.value;
            const float kf = static_cast<float>(k);
            for (size_t i = 0; i < total_grad.data.size(); ++i) total_grad.data[i] += kf * r.grad.data[i];
        }
    }
    if (stage.w_ssim > 0) {
        LossResult<float> r = ssim_loss(pred, pair.target);
        const double k = stage.w_ssim / norm.ssim;
        out.total += k * r.value;
        const float kf = static_cast<float>(k);
        for (size_t i = 0; i < total_grad.data.size(); ++i) total_grad.data[i] += kf * r.grad.data[i];
    }
    if (stage.w_vgg > 0) {
        if (opts.vgg == nullptr || !*opts.vgg) {
            throw ConfigError("training: w_vgg > 0 but no perceptual feature extractor supplied");
        }
        auto [value, grad] = (*opts.vgg)(pred, pair.target);
        const double k = stage.w_vgg / norm.vgg;
        out.total += k * value;
        const float kf = static_cast<float>(k);
        for (size_t i = 0; i < total_grad.data.size(); ++i) total_grad.data[i] += kf * grad.data[i];
    }

    auto& mut = const_cast<Model&>(model);
    std::vector<ParamEntry<float>> entries = param_entries(mut);
    require(entries.size() == n_groups, "training: parameter group count changed");
    out.grads.reserve(n_groups);
    for (const auto& e : entries) out.grads.emplace_back(e.data->size(), 0.0f);
    tape.backward(out_id, total_grad, out.grads);
    return out;
}

// Raw (unnormalized) term values on a batch, used to freeze the per-stage
// normalizers.
CompositeNormalizers freeze_normalizers(const Model& model, const std::vector<TrainPair>& data,
                                        const std::vector<size_t>& batch_indices,
                                        const StageConfig& stage, const TrainingSchedule& sched,
                                        int stage_index, const TrainOptions& opts) {
    CompositeNormalizers norm;
    if (!stage.normalize_terms) return norm;
    double mse_sum = 0.0, ssim_sum = 0.0, vgg_sum = 0.0;
    for (size_t i = 0; i < batch_indices.size(); ++i) {
        TrainPair pair = data[batch_indices[i]];
        if (sched.augment) {
            pair = augment_pair(pair, mix_seed(sched.seed, kAugmentStream,
                                               static_cast<uint64_t>(stage_index) << 32 | 0,
                                               batch_indices[i]));
        }
        Tensor pred = forward(model, pair.packed);
        if (stage.w_mse > 0) mse_sum += mse_loss(pred, pair.target).value;
        if (stage.w_ssim > 0) ssim_sum += ssim_mean(pred, pair.target, nullptr);
        if (stage.w_vgg > 0) {
            if (opts.vgg == nullptr || !*opts.vgg) {
                throw ConfigError("training: w_vgg > 0 but no perceptual feature extractor supplied");
            }
            vgg_sum += (*opts.vgg)(pred, pair.target).first;
        }
    }
    const double n = static_cast<double>(batch_indices.size());
    // Guard against a degenerate zero first-batch term; the term then runs
    // unnormalized.
    if (stage.w_mse > 0 && mse_sum > 0) norm.mse = mse_sum / n;
    if (stage.w_ssim > 0) {
        const double ssim_loss_mean = 1.0 - ssim_sum / n;
        if (ssim_loss_mean > 0) norm.ssim = ssim_loss_mean;
    }
    if (stage.w_vgg > 0 && vgg_sum > 0) norm.vgg = vgg_sum / n;
    return norm;
}

std::string schedule_fingerprint(const Model& model, const TrainingSchedule& sched) {
    std::ostringstream os;
    os << format_schedule(sched) << "blocks " << static_cast<int>(model.config.blocks_code())
       << " attn " << static_cast<int>(model.config.attention) << " act "
       << static_cast<int>(model.config.activation) << " clamp " << model.config.clamp_output;
    const std::string s = os.str();
    std::ostringstream hex;
    hex << std::hex << io::crc32(reinterpret_cast<const uint8_t*>(s.data()), s.size());
    return hex.str();
}

} // namespace

void train_stage(Model& model, const std::vector<TrainPair>& data, const StageConfig& stage,
                 int stage_index, const TrainingSchedule& sched, AdamState& adam,
                 std::vector<EpochStats>& history, const TrainOptions& opts) {
    if (data.empty()) throw ConfigError("training: dataset is empty");

    std::vector<ParamEntry<float>> entries = param_entries(model);
    const size_t n_groups = entries.size();

    // Freeze normalizers on the first batch of the stage, before any update.
    std::vector<size_t> first_batch;
    {
        std::vector<size_t> order(data.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng(mix_seed(sched.seed, kShuffleStream, static_cast<uint64_t>(stage_index), 0));
        for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        const size_t bs = std::min(static_cast<size_t>(sched.batch_size), order.size());
        first_batch.assign(order.begin(), order.begin() + static_cast<long>(bs));
    }
    const CompositeNormalizers norm =
        freeze_normalizers(model, data, first_batch, stage, sched, stage_index, opts);

    int64_t adam_steps_taken = 0;
    for (int epoch = 0; epoch < stage.epochs; ++epoch) {
        std::vector<size_t> order(data.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng(mix_seed(sched.seed, kShuffleStream, static_cast<uint64_t>(stage_index),
                                 static_cast<uint64_t>(epoch)));
        for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double epoch_loss = 0.0;
        double epoch_mse = 0.0;
        size_t samples_seen = 0;

        for (size_t batch_start = 0; batch_start < order.size();
             batch_start += static_cast<size_t>(sched.batch_size)) {
            const size_t batch_end =
                std::min(order.size(), batch_start + static_cast<size_t>(sched.batch_size));
            const size_t bs = batch_end - batch_start;

            // Per-sample losses and gradients, computed independently
            // (possibly in parallel), reduced in sample-index order below.
            std::vector<SampleLoss> results(bs);
            parallel_for(static_cast<int64_t>(bs), 1, [&](int64_t lo, int64_t hi) {
                for (int64_t s = lo; s < hi; ++s) {
                    const size_t idx = order[batch_start + static_cast<size_t>(s)];
                    TrainPair pair = data[idx];
                    if (sched.augment) {
                        pair = augment_pair(
                            pair, mix_seed(sched.seed, kAugmentStream,
                                           static_cast<uint64_t>(stage_index) << 32 |
                                               static_cast<uint64_t>(epoch),
                                           idx));
                    }
                    results[static_cast<size_t>(s)] =
                        sample_loss_and_grads(model, pair, stage, norm, opts, n_groups);
                }
            });

            double batch_loss = 0.0;
            std::vector<std::vector<double>> acc(n_groups);
            for (size_t g = 0; g < n_groups; ++g) acc[g].assign(entries[g].data->size(), 0.0);
            for (size_t s = 0; s < bs; ++s) { // fixed reduction order
                const SampleLoss& r = results[s];
                if (!std::isfinite(r.total)) {
                    std::ostringstream os;
                    os << "training: non-finite loss at stage " << stage_index + 1 << " epoch "
                       << epoch + 1 << " batch " << (batch_start / sched.batch_size) + 1;
                    throw NumericError(os.str());
                }
                batch_loss += r.total;
                epoch_mse += r.mse_term;
                for (size_t g = 0; g < n_groups; ++g) {
                    const auto& src = r.grads[g];
                    auto& dst = acc[g];
                    for (size_t i = 0; i < src.size(); ++i) dst[i] += static_cast<double>(src[i]);
                }
            }
            epoch_loss += batch_loss;
            samples_seen += bs;

            std::vector<std::vector<float>> mean_grads(n_groups);
            const double inv_bs = 1.0 / static_cast<double>(bs);
            for (size_t g = 0; g < n_groups; ++g) {
                mean_grads[g].resize(acc[g].size());
                for (size_t i = 0; i < acc[g].size(); ++i) {
                    mean_grads[g][i] = static_cast<float>(acc[g][i] * inv_bs);
                }
            }
            std::vector<std::vector<float>*> params(n_groups);
            for (size_t g = 0; g < n_groups; ++g) params[g] = entries[g].data;
            adam_step(params, mean_grads, adam, static_cast<float>(stage.lr));
            ++adam_steps_taken;

            if (opts.max_adam_steps > 0 && adam_steps_taken >= opts.max_adam_steps) break;
        }

        EpochStats stats;
        stats.stage = stage_index + 1;
        stats.epoch = epoch + 1;
        stats.loss = epoch_loss / static_cast<double>(samples_seen);
        const double mean_mse = epoch_mse / static_cast<double>(samples_seen);
        stats.psnr_db = mean_mse > 0 ? 10.0 * std::log10(1.0 / mean_mse) : 99.0;
        history.push_back(stats);
        if (opts.on_epoch) opts.on_epoch(stats);

        if (opts.stop_at_psnr_db > 0 && stats.psnr_db >= opts.stop_at_psnr_db) return;
        if (opts.max_adam_steps > 0 && adam_steps_taken >= opts.max_adam_steps) return;
    }
}

TrainResult train_loop(Model& model, const std::vector<TrainPair>& data,
                       const TrainingSchedule& sched, const TrainOptions& opts) {
    sched.validate();
    if (data.empty()) throw ConfigError("training: dataset is empty");
    for (const TrainPair& p : data) {
        require(p.target.h == p.packed.h * 2 && p.target.w == p.packed.w * 2 && p.target.c == 3,
                "training: pair '" + p.name + "' has mismatched dims");
    }

    const std::string fingerprint = schedule_fingerprint(model, sched);
    size_t start_stage = 0;
    if (opts.resume && !opts.checkpoint_dir.empty()) {
        const fs::path state_path = fs::path(opts.checkpoint_dir) / "train_state.txt";
        if (fs::exists(state_path)) {
            const std::vector<uint8_t> raw = io::read_file(state_path.string());
            std::string text(reinterpret_cast<const char*>(raw.data()), raw.size());
            std::istringstream in(text);
            std::string key;
            size_t completed = 0;
            std::string fp;
            while (in >> key) {
                if (key == "completed_stages") in >> completed;
                else if (key == "fingerprint") in >> fp;
                else { std::string skip; in >> skip; }
            }
            if (fp != fingerprint) {
                throw ConfigError("resume: checkpoint was produced by a different schedule/config");
            }
            if (completed > 0) {
                const fs::path w = fs::path(opts.checkpoint_dir) /
                                   ("stage" + std::to_string(completed) + ".misp");
                model = load_weights(w.string());
                start_stage = completed;
            }
        }
    }

    TrainResult result;
    for (size_t s = start_stage; s < sched.stages.size(); ++s) {
        // A fresh optimizer per stage makes the stage boundary an exact
        // resume point.
        std::vector<ParamEntry<float>> entries = param_entries(model);
        std::vector<std::vector<float>> shapes;
        shapes.reserve(entries.size());
        for (const auto& e : entries) shapes.emplace_back(e.data->size(), 0.0f);
        AdamState adam = AdamState::zeros_like(shapes);

        train_stage(model, data, sched.stages[s], static_cast<int>(s), sched, adam,
                    result.history, opts);

        if (!opts.checkpoint_dir.empty()) {
            fs::create_directories(opts.checkpoint_dir);
            save_weights(model, (fs::path(opts.checkpoint_dir) /
                                 ("stage" + std::to_string(s + 1) + ".misp"))
                                    .string());
            std::ostringstream st;
            st << "completed_stages " << (s + 1) << "\n";
            st << "fingerprint " << fingerprint << "\n";
            io::atomic_write_file((fs::path(opts.checkpoint_dir) / "train_state.txt").string(),
                                  st.str());
        }
    }
    return result;
}

// --- gradient check ---

namespace {

double gradcheck_loss(const ModelT<double>& m, const Image3<double>& packed,
                      const Image3<double>& target, const CompositeWeights& w) {
    const Image3<double> pred = forward(m, packed);
    double total = 0.0;
    if (w.mse > 0) total += w.mse * mse_loss(pred, target).value;
    if (w.ssim > 0) total += w.ssim * (1.0 - ssim_mean(pred, target, nullptr));
    return total;
}

} // namespace

GradcheckReport gradcheck(const ModelConfig& config, double tolerance, uint64_t seed) {
    config.validate();
    if (tolerance <= 0) throw ConfigError("gradcheck: tolerance must be positive");

    const Model model_f = build_model(config, mix_seed(seed, 0x67636b31));
    ModelT<double> model = cast_model<double>(model_f);

    constexpr int kH = 16, kW = 16;
    Rng rng(mix_seed(seed, 0x67636b32));
    Image3<double> packed(kH, kW, 4);
    for (auto& v : packed.data) v = rng.uniform();
    Image3<double> target(kH * 2, kW * 2, 3);
    for (auto& v : target.data) v = rng.uniform();

    CompositeWeights w;
    w.mse = 1.0;
    w.ssim = 1.0;

    const std::vector<std::vector<double>> analytic =
        model_parameter_gradients(model, packed, target, w);

    std::vector<ParamEntry<double>> entries = param_entries(model);
    GradcheckReport report;
    report.tolerance = tolerance;
    report.pass = true;
    report.groups.resize(entries.size());

    constexpr double kEps = 1e-3;
    for (size_t g = 0; g < entries.size(); ++g) {
        GradcheckGroup& group = report.groups[g];
        group.name = entries[g].name;
        const size_t n = entries[g].data->size();
        std::vector<double> rel(n, 0.0);
        parallel_for(static_cast<int64_t>(n), 1, [&](int64_t lo, int64_t hi) {
            // Per-chunk model copy; elements are perturbed and restored one at
            // a time.
            ModelT<double> local = model;
            std::vector<ParamEntry<double>> local_entries = param_entries(local);
            std::vector<double>& arr = *local_entries[g].data;
            for (int64_t i = lo; i < hi; ++i) {
                const double saved = arr[static_cast<size_t>(i)];
                arr[static_cast<size_t>(i)] = saved + kEps;
                const double lp = gradcheck_loss(local, packed, target, w);
                arr[static_cast<size_t>(i)] = saved - kEps;
                const double lm = gradcheck_loss(local, packed, target, w);
                arr[static_cast<size_t>(i)] = saved;
                const double fd = (lp - lm) / (2.0 * kEps);
                const double an = analytic[g][static_cast<size_t>(i)];
                const double denom = std::max({std::abs(an), std::abs(fd), 1e-6});
                rel[static_cast<size_t>(i)] = std::abs(an - fd) / denom;
            }
        });
        for (double r : rel) group.max_rel_err = std::max(group.max_rel_err, r);
        group.pass = group.max_rel_err <= tolerance;
        if (!group.pass) report.pass = false;
    }
    return report;
}

std::string GradcheckReport::to_text() const {
    std::ostringstream os;
    os << "# gradient check: analytic vs central finite differences (64-bit, eps 1e-3)\n";
    os << "tolerance " << tolerance << "\n";
    for (const GradcheckGroup& g : groups) {
        os << (g.pass ? "PASS " : "FAIL ") << g.name << " max_rel_err " << g.max_rel_err << "\n";
    }
    os << (pass ? "RESULT PASS" : "RESULT FAIL") << " (" << groups.size() << " groups)\n";
    return os.str();
}

} // namespace microisp

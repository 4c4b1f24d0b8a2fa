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

#include "microisp/microisp.h"

#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include "executor.hpp"
#include "image_io.hpp"
#include "io_util.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "train.hpp"
#include "version.hpp"

struct misp_model {
    microisp::Model m;
};

struct misp_tensor {
    microisp::Tensor t;
};

struct misp_plan {
    microisp::ExecutionPlan p;
};

namespace {

thread_local std::string t_last_error;

void set_error(const std::string& msg) { t_last_error = msg; }

template <typename Fn>
misp_status wrap(Fn&& fn) {
    try {
        fn();
        return MISP_OK;
    } catch (const microisp::ContractError& e) {
        set_error(e.what());
        return MISP_ERROR_CONTRACT;
    } catch (const microisp::ConfigError& e) {
        set_error(e.what());
        return MISP_ERROR_CONFIG;
    } catch (const microisp::FormatError& e) {
        set_error(e.what());
        return MISP_ERROR_FORMAT;
    } catch (const microisp::IoError& e) {
        set_error(e.what());
        return MISP_ERROR_IO;
    } catch (const microisp::NumericError& e) {
        set_error(e.what());
        return MISP_ERROR_NUMERIC;
    } catch (const std::bad_alloc&) {
        set_error("out of memory");
        return MISP_ERROR_UNKNOWN;
    } catch (const std::exception& e) {
        set_error(e.what());
        return MISP_ERROR_UNKNOWN;
    }
}

misp_status invalid(const char* msg) {
    set_error(msg);
    return MISP_ERROR_INVALID_ARGUMENT;
}

bool to_config(const misp_model_config* in, microisp::ModelConfig* out) {
    if (in == nullptr) return false;
    if (in->attention < 0 || in->attention > 2 || in->activation < 0 || in->activation > 1) {
        return false;
    }
    out->depth_multiplier = in->depth_multiplier;
    out->attention = static_cast<microisp::AttentionVariant>(in->attention);
    out->activation = static_cast<microisp::ActivationVariant>(in->activation);
    out->clamp_output = in->clamp_output != 0;
    return true;
}

void from_config(const microisp::ModelConfig& in, misp_model_config* out) {
    out->depth_multiplier = in.depth_multiplier;
    out->attention = static_cast<int32_t>(in.attention);
    out->activation = static_cast<int32_t>(in.activation);
    out->clamp_output = in.clamp_output ? 1 : 0;
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.data(), s.size());
    out[s.size()] = '\0';
    return out;
}

} // namespace

extern "C" {

const char* misp_version(void) { return microisp::kVersionString; }

const char* misp_status_name(misp_status status) {
    switch (status) {
    case MISP_OK: return "ok";
    case MISP_ERROR_INVALID_ARGUMENT: return "invalid argument";
    case MISP_ERROR_CONTRACT: return "contract violation";
    case MISP_ERROR_CONFIG: return "configuration error";
    case MISP_ERROR_FORMAT: return "format error";
    case MISP_ERROR_IO: return "io error";
    case MISP_ERROR_NUMERIC: return "numeric error";
    case MISP_ERROR_UNKNOWN: return "unknown error";
    }
    return "?";
}

const char* misp_last_error(void) { return t_last_error.c_str(); }

void misp_string_free(char* s) { delete[] s; }

void misp_set_threads(int32_t n) { microisp::set_max_threads(n); }

void misp_default_config(misp_model_config* out) {
    if (out == nullptr) return;
    from_config(microisp::ModelConfig{}, out);
}

misp_status misp_tensor_create(int32_t height, int32_t width, int32_t channels, const float* data,
                               misp_tensor** out) {
    if (out == nullptr) return invalid("misp_tensor_create: out is null");
    *out = nullptr;
    return wrap([&] {
        microisp::require(height > 0 && width > 0 && channels > 0,
                          "misp_tensor_create: dims must be positive");
        auto* t = new misp_tensor{microisp::Tensor(height, width, channels)};
        if (data != nullptr) {
            std::memcpy(t->t.data.data(), data, t->t.size() * sizeof(float));
        }
        *out = t;
    });
}

void misp_tensor_free(misp_tensor* t) { delete t; }

int32_t misp_tensor_height(const misp_tensor* t) { return t ? t->t.h : 0; }
int32_t misp_tensor_width(const misp_tensor* t) { return t ? t->t.w : 0; }
int32_t misp_tensor_channels(const misp_tensor* t) { return t ? t->t.c : 0; }
const float* misp_tensor_data(const misp_tensor* t) { return t ? t->t.data.data() : nullptr; }

misp_status misp_model_build(const misp_model_config* config, uint64_t seed, misp_model** out) {
    if (out == nullptr) return invalid("misp_model_build: out is null");
    *out = nullptr;
    microisp::ModelConfig cfg;
    if (!to_config(config, &cfg)) return invalid("misp_model_build: invalid config");
    return wrap([&] { *out = new misp_model{microisp::build_model(cfg, seed)}; });
}

misp_status misp_model_load(const char* path, misp_model** out) {
    if (out == nullptr || path == nullptr) return invalid("misp_model_load: null argument");
    *out = nullptr;
    return wrap([&] { *out = new misp_model{microisp::load_weights(path)}; });
}

misp_status misp_model_save(const misp_model* model, const char* path) {
    if (model == nullptr || path == nullptr) return invalid("misp_model_save: null argument");
    return wrap([&] { microisp::save_weights(model->m, path); });
}

void misp_model_free(misp_model* model) { delete model; }

misp_status misp_model_get_config(const misp_model* model, misp_model_config* out) {
    if (model == nullptr || out == nullptr) return invalid("misp_model_get_config: null argument");
    from_config(model->m.config, out);
    return MISP_OK;
}

int64_t misp_model_param_count(const misp_model* model) {
    return model ? microisp::param_count(model->m) : 0;
}

int32_t misp_model_blocks_per_branch(const misp_model* model) {
    return model ? static_cast<int32_t>(model->m.config.blocks_code()) : -1;
}

misp_status misp_model_forward(const misp_model* model, const misp_tensor* packed,
                               misp_tensor** out) {
    if (model == nullptr || packed == nullptr || out == nullptr) {
        return invalid("misp_model_forward: null argument");
    }
    *out = nullptr;
    return wrap([&] { *out = new misp_tensor{microisp::forward(model->m, packed->t)}; });
}

misp_status misp_plan_build(const misp_model* model, int32_t packed_height, int32_t packed_width,
                            int32_t branch_mode, misp_plan** out) {
    if (model == nullptr || out == nullptr) return invalid("misp_plan_build: null argument");
    if (branch_mode < 0 || branch_mode > 1) return invalid("misp_plan_build: invalid branch mode");
    *out = nullptr;
    return wrap([&] {
        *out = new misp_plan{microisp::build_plan(model->m, packed_height, packed_width,
                                                  static_cast<microisp::BranchMode>(branch_mode))};
    });
}

void misp_plan_free(misp_plan* plan) { delete plan; }

uint64_t misp_plan_peak_bytes(const misp_plan* plan) { return plan ? plan->p.peak_bytes : 0; }
uint64_t misp_plan_arena_bytes(const misp_plan* plan) { return plan ? plan->p.arena_bytes : 0; }

misp_status misp_plan_execute(const misp_plan* plan, const misp_model* model,
                              const misp_tensor* packed, misp_tensor** out) {
    if (plan == nullptr || model == nullptr || packed == nullptr || out == nullptr) {
        return invalid("misp_plan_execute: null argument");
    }
    *out = nullptr;
    return wrap([&] { *out = new misp_tensor{microisp::execute(plan->p, model->m, packed->t)}; });
}

misp_status misp_load_raw_packed(const char* path, misp_tensor** out) {
    if (path == nullptr || out == nullptr) return invalid("misp_load_raw_packed: null argument");
    *out = nullptr;
    return wrap([&] {
        const microisp::BayerImage raw = microisp::load_raw(path);
        *out = new misp_tensor{microisp::pack_mosaic(microisp::normalize_raw(raw), raw.cfa)};
    });
}

misp_status misp_write_rgb(const misp_tensor* rgb, const char* path, int32_t bit_depth) {
    if (rgb == nullptr || path == nullptr) return invalid("misp_write_rgb: null argument");
    return wrap([&] { microisp::write_rgb(rgb->t, path, bit_depth); });
}

misp_status misp_synth_dataset(const char* dir, int32_t count, int32_t size, double noise_sigma,
                               uint64_t seed) {
    if (dir == nullptr) return invalid("misp_synth_dataset: dir is null");
    return wrap([&] { microisp::synth_dataset(dir, count, size, noise_sigma, seed); });
}

misp_status misp_train(const char* data_dir, const char* schedule_spec, const char* out_dir,
                       const misp_model_config* config, uint64_t seed, int32_t resume,
                       misp_train_progress_fn progress, void* user_data) {
    if (data_dir == nullptr || out_dir == nullptr) return invalid("misp_train: null argument");
    microisp::ModelConfig cfg;
    if (!to_config(config, &cfg)) return invalid("misp_train: invalid config");
    return wrap([&] {
        namespace fs = std::filesystem;
        microisp::TrainingSchedule sched =
            microisp::resolve_schedule(schedule_spec == nullptr ? "" : schedule_spec);
        sched.seed = seed;
        const microisp::PairLoadReport loaded = microisp::load_pairs(data_dir);
        if (loaded.pairs.empty()) {
            throw microisp::ConfigError(std::string("train: no usable pairs in ") + data_dir);
        }

        microisp::Model model = microisp::build_model(cfg, seed);
        microisp::TrainOptions opts;
        opts.checkpoint_dir = out_dir;
        opts.resume = resume != 0;
        if (progress != nullptr) {
            opts.on_epoch = [progress, user_data](const microisp::EpochStats& s) {
                progress(s.stage, s.epoch, s.loss, s.psnr_db, user_data);
            };
        }
        fs::create_directories(out_dir);
        const microisp::TrainResult result =
            microisp::train_loop(model, loaded.pairs, sched, opts);

        microisp::save_weights(model, (fs::path(out_dir) / "weights.misp").string());
        std::string history = "# stage epoch loss psnr_db\n";
        for (const auto& e : result.history) {
            history += std::to_string(e.stage) + " " + std::to_string(e.epoch) + " " +
                       std::to_string(e.loss) + " " + std::to_string(e.psnr_db) + "\n";
        }
        if (!loaded.skipped.empty()) {
            history += "# skipped pairs:\n";
            for (const auto& s : loaded.skipped) history += "# " + s + "\n";
        }
        microisp::io::atomic_write_file((fs::path(out_dir) / "history.txt").string(), history);
    });
}

misp_status misp_psnr(const misp_tensor* a, const misp_tensor* b, double max_value, double* out) {
    if (a == nullptr || b == nullptr || out == nullptr) return invalid("misp_psnr: null argument");
    return wrap([&] { *out = microisp::psnr(a->t, b->t, max_value); });
}

misp_status misp_ssim(const misp_tensor* a, const misp_tensor* b, double* out) {
    if (a == nullptr || b == nullptr || out == nullptr) return invalid("misp_ssim: null argument");
    return wrap([&] { *out = microisp::ssim_metric(a->t, b->t); });
}

misp_status misp_evaluate(const misp_model* model, const char* data_dir, int32_t branch_mode,
                          char** report_out) {
    if (model == nullptr || data_dir == nullptr || report_out == nullptr) {
        return invalid("misp_evaluate: null argument");
    }
    if (branch_mode < 0 || branch_mode > 1) return invalid("misp_evaluate: invalid branch mode");
    *report_out = nullptr;
    return wrap([&] {
        const microisp::MetricsReport report = microisp::evaluate_dataset(
            model->m, data_dir, static_cast<microisp::BranchMode>(branch_mode));
        *report_out = dup_string(report.to_text());
    });
}

misp_status misp_gradcheck(const misp_model_config* config, double tolerance, uint64_t seed,
                           char** report_out, int32_t* passed_out) {
    microisp::ModelConfig cfg;
    if (!to_config(config, &cfg)) return invalid("misp_gradcheck: invalid config");
    if (report_out != nullptr) *report_out = nullptr;
    return wrap([&] {
        const microisp::GradcheckReport report = microisp::gradcheck(cfg, tolerance, seed);
        if (report_out != nullptr) *report_out = dup_string(report.to_text());
        if (passed_out != nullptr) *passed_out = report.pass ? 1 : 0;
    });
}

misp_status misp_count_flops(const misp_model* model, int32_t packed_height, int32_t packed_width,
                             char** report_out) {
    if (model == nullptr || report_out == nullptr) return invalid("misp_count_flops: null argument");
    *report_out = nullptr;
    return wrap([&] {
        *report_out =
            dup_string(microisp::count_flops(model->m, packed_height, packed_width).to_text());
    });
}

misp_status misp_benchmark(const misp_model* model, int32_t packed_height, int32_t packed_width,
                           int32_t branch_mode, int32_t repetitions, char** report_out) {
    if (model == nullptr || report_out == nullptr) return invalid("misp_benchmark: null argument");
    if (branch_mode < 0 || branch_mode > 1) return invalid("misp_benchmark: invalid branch mode");
    *report_out = nullptr;
    return wrap([&] {
        *report_out = dup_string(microisp::benchmark(model->m, packed_height, packed_width,
                                                     static_cast<microisp::BranchMode>(branch_mode),
                                                     repetitions)
                                     .to_text());
    });
}

} // extern "C"

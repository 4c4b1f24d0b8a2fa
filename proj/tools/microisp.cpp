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

// microisp command-line tool. Everything goes through the shared-library C
// API (microisp/microisp.h); this file is deliberately free of core headers.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "microisp/microisp.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct CommonFlags {
    uint64_t seed = 0;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonFlags* flags) {
    cmd->add_option("--seed", flags->seed, "Seed for all randomness (default 0)");
    cmd->add_option("--threads", flags->threads,
                    "Max worker threads; 0 = hardware count. Outputs are identical for any value");
}

struct ConfigFlags {
    double depth = 1.0;
    std::string attention = "enhanced";
    std::string activation = "prelu";
    bool clamp = false;
};

void add_config(CLI::App* cmd, ConfigFlags* flags) {
    cmd->add_option("--depth", flags->depth, "Depth multiplier: 0.25, 0.5, 1.0 or 1.5")
        ->check(CLI::IsMember({0.25, 0.5, 1.0, 1.5}));
    cmd->add_option("--attention", flags->attention, "Attention variant")
        ->check(CLI::IsMember({"enhanced", "standard", "none"}));
    cmd->add_option("--activation", flags->activation, "Activation variant")
        ->check(CLI::IsMember({"prelu", "leaky"}));
    cmd->add_flag("--clamp", flags->clamp, "Clamp inference output to [0,1]");
}

misp_model_config make_config(const ConfigFlags& flags) {
    misp_model_config cfg;
    misp_default_config(&cfg);
    cfg.depth_multiplier = static_cast<float>(flags.depth);
    cfg.attention = flags.attention == "enhanced" ? MISP_ATTENTION_ENHANCED
                    : flags.attention == "standard" ? MISP_ATTENTION_STANDARD_POOL
                                                    : MISP_ATTENTION_NONE;
    cfg.activation = flags.activation == "prelu" ? MISP_ACTIVATION_PRELU : MISP_ACTIVATION_LEAKY_RELU;
    cfg.clamp_output = flags.clamp ? 1 : 0;
    return cfg;
}

int fail(misp_status status) {
    std::fprintf(stderr, "error (%s): %s\n", misp_status_name(status), misp_last_error());
    return kExitRuntime;
}

[[nodiscard]] bool parse_branch_mode(const std::string& s, int32_t* out) {
    if (s == "sequential") {
        *out = MISP_BRANCH_SEQUENTIAL;
        return true;
    }
    if (s == "parallel") {
        *out = MISP_BRANCH_PARALLEL;
        return true;
    }
    return false;
}

// Report files follow the same rule as every other output: write to a
// temporary name, rename on success.
bool atomic_write_text(const std::string& path, const std::string& text) {
    namespace fs = std::filesystem;
    const fs::path tmp = fs::path(path).concat(".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) return false;
        f << text;
        f.flush();
        if (!f) return false;
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    return !ec;
}

struct StringHolder {
    char* s = nullptr;
    ~StringHolder() { misp_string_free(s); }
};

void progress_printer(int32_t stage, int32_t epoch, double loss, double psnr_db, void*) {
    std::fprintf(stderr, "stage %d epoch %d loss %.6g psnr %.2f dB\n", stage, epoch, loss, psnr_db);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"MicroISP: train and run a tiny RAW-to-RGB network"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "Train a model on a raw/target pair directory");
    CommonFlags train_common;
    ConfigFlags train_config;
    std::string train_data, train_schedule = "desk", train_out;
    bool train_resume = false;
    add_common(train, &train_common);
    add_config(train, &train_config);
    train->add_option("--data", train_data, "Dataset directory (raw .brw1/.braw/.pgm + .ppm targets)")
        ->required();
    train->add_option("--schedule", train_schedule,
                      "Schedule: 'paper', 'desk', or a schedule file. File keys: top-level "
                      "batch_size <n>, seed <n>, augment on|off; then per stage: 'stage' followed "
                      "by epochs <n>, lr <x>, w_mse <x>, w_ssim <x>, w_vgg <x>, normalize on|off");
    train->add_option("--out", train_out, "Output directory (weights.misp, history.txt, checkpoints)")
        ->required();
    train->add_flag("--resume", train_resume, "Resume from the last completed stage in --out");

    // infer
    auto* infer = app.add_subcommand("infer", "Render a raw file to an RGB image");
    CommonFlags infer_common;
    std::string infer_weights, infer_input, infer_output, infer_mode = "sequential";
    int infer_depth = 8;
    bool infer_report_mem = false;
    add_common(infer, &infer_common);
    infer->add_option("--weights", infer_weights, "Weight file (.misp)")->required();
    infer->add_option("--input", infer_input, "Raw input (BRW1 or 16-bit PGM)")->required();
    infer->add_option("--output", infer_output, "Output PPM path")->required();
    infer->add_option("--branch-mode", infer_mode, "Branch execution: sequential or parallel")
        ->check(CLI::IsMember({"sequential", "parallel"}));
    infer->add_option("--depth", infer_depth, "Output bit depth: 8 or 16")
        ->check(CLI::IsMember({8, 16}));
    infer->add_flag("--report-mem", infer_report_mem, "Print planned peak/arena bytes");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate PSNR/SSIM over a dataset directory");
    CommonFlags eval_common;
    std::string eval_weights, eval_data, eval_report, eval_mode = "sequential";
    add_common(eval, &eval_common);
    eval->add_option("--weights", eval_weights, "Weight file (.misp)")->required();
    eval->add_option("--data", eval_data, "Dataset directory")->required();
    eval->add_option("--report", eval_report, "Write the report here instead of stdout");
    eval->add_option("--branch-mode", eval_mode, "Branch execution: sequential or parallel")
        ->check(CLI::IsMember({"sequential", "parallel"}));

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck",
                                         "Check model gradients against finite differences");
    CommonFlags gc_common;
    ConfigFlags gc_config;
    double gc_tolerance = 1e-4;
    add_common(gradcheck, &gc_common);
    add_config(gradcheck, &gc_config);
    gradcheck->add_option("--tolerance", gc_tolerance, "Max relative error per parameter group");

    // bench
    auto* bench = app.add_subcommand("bench", "Benchmark planned inference");
    CommonFlags bench_common;
    ConfigFlags bench_config;
    std::string bench_weights, bench_resolution = "1920x1080", bench_mode = "sequential";
    int bench_reps = 5;
    add_common(bench, &bench_common);
    add_config(bench, &bench_config);
    bench->add_option("--weights", bench_weights, "Weight file; omitted = fresh seeded model");
    bench->add_option("--resolution", bench_resolution, "Mosaic resolution WxH (e.g. 8000x4000)");
    bench->add_option("--mode", bench_mode, "Branch execution: sequential or parallel")
        ->check(CLI::IsMember({"sequential", "parallel"}));
    bench->add_option("--reps", bench_reps, "Repetitions (median reported)")
        ->check(CLI::PositiveNumber);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic training dataset");
    CommonFlags synth_common;
    std::string synth_out;
    int synth_count = 8, synth_size = 64;
    double synth_sigma = 0.005;
    add_common(synth, &synth_common);
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--count", synth_count, "Number of pairs")->check(CLI::PositiveNumber);
    synth->add_option("--size", synth_size, "Mosaic size in pixels (even, >= 32)");
    synth->add_option("--noise-sigma", synth_sigma, "Gaussian noise sigma on the raw mosaic");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "usage error: %s (try 'microisp --help')\n", e.what());
        return kExitUsage;
    }

    if (train->parsed()) {
        misp_set_threads(train_common.threads);
        const misp_model_config cfg = make_config(train_config);
        const misp_status st =
            misp_train(train_data.c_str(), train_schedule.c_str(), train_out.c_str(), &cfg,
                       train_common.seed, train_resume ? 1 : 0, progress_printer, nullptr);
        if (st != MISP_OK) return fail(st);
        std::printf("wrote %s\n", (std::filesystem::path(train_out) / "weights.misp").string().c_str());
        return kExitOk;
    }

    if (infer->parsed()) {
        misp_set_threads(infer_common.threads);
        int32_t mode = 0;
        if (!parse_branch_mode(infer_mode, &mode)) return kExitUsage;

        misp_model* model = nullptr;
        misp_status st = misp_model_load(infer_weights.c_str(), &model);
        if (st != MISP_OK) return fail(st);
        std::unique_ptr<misp_model, decltype(&misp_model_free)> model_guard(model, misp_model_free);

        misp_tensor* packed = nullptr;
        st = misp_load_raw_packed(infer_input.c_str(), &packed);
        if (st != MISP_OK) return fail(st);
        std::unique_ptr<misp_tensor, decltype(&misp_tensor_free)> packed_guard(packed, misp_tensor_free);

        misp_plan* plan = nullptr;
        st = misp_plan_build(model, misp_tensor_height(packed), misp_tensor_width(packed), mode, &plan);
        if (st != MISP_OK) return fail(st);
        std::unique_ptr<misp_plan, decltype(&misp_plan_free)> plan_guard(plan, misp_plan_free);

        if (infer_report_mem) {
            std::printf("planned peak activation bytes: %llu\n",
                        static_cast<unsigned long long>(misp_plan_peak_bytes(plan)));
            std::printf("planned arena bytes: %llu\n",
                        static_cast<unsigned long long>(misp_plan_arena_bytes(plan)));
        }

        misp_tensor* rgb = nullptr;
        st = misp_plan_execute(plan, model, packed, &rgb);
        if (st != MISP_OK) return fail(st);
        std::unique_ptr<misp_tensor, decltype(&misp_tensor_free)> rgb_guard(rgb, misp_tensor_free);

        st = misp_write_rgb(rgb, infer_output.c_str(), infer_depth);
        if (st != MISP_OK) return fail(st);
        return kExitOk;
    }

    if (eval->parsed()) {
        misp_set_threads(eval_common.threads);
        int32_t mode = 0;
        if (!parse_branch_mode(eval_mode, &mode)) return kExitUsage;
        misp_model* model = nullptr;
        misp_status st = misp_model_load(eval_weights.c_str(), &model);
        if (st != MISP_OK) return fail(st);
        std::unique_ptr<misp_model, decltype(&misp_model_free)> model_guard(model, misp_model_free);

        StringHolder report;
        st = misp_evaluate(model, eval_data.c_str(), mode, &report.s);
        if (st != MISP_OK) return fail(st);
        if (eval_report.empty()) {
            std::fputs(report.s, stdout);
        } else if (!atomic_write_text(eval_report, report.s)) {
            std::fprintf(stderr, "error: cannot write report to %s\n", eval_report.c_str());
            return kExitRuntime;
        }
        return kExitOk;
    }

    if (gradcheck->parsed()) {
        misp_set_threads(gc_common.threads);
        const misp_model_config cfg = make_config(gc_config);
        StringHolder report;
        int32_t passed = 0;
        const misp_status st =
            misp_gradcheck(&cfg, gc_tolerance, gc_common.seed, &report.s, &passed);
        if (st != MISP_OK) return fail(st);
        std::fputs(report.s, stdout);
        return passed ? kExitOk : kExitRuntime;
    }

    if (bench->parsed()) {
        misp_set_threads(bench_common.threads);
        int32_t mode = 0;
        if (!parse_branch_mode(bench_mode, &mode)) return kExitUsage;
        int w = 0, h = 0;
        if (std::sscanf(bench_resolution.c_str(), "%dx%d", &w, &h) != 2 || w <= 0 || h <= 0 ||
            w % 2 != 0 || h % 2 != 0) {
            std::fprintf(stderr, "usage error: --resolution must be WxH with even dims\n");
            return kExitUsage;
        }

        misp_model* model = nullptr;
        misp_status st;
        if (!bench_weights.empty()) {
            st = misp_model_load(bench_weights.c_str(), &model);
        } else {
            const misp_model_config cfg = make_config(bench_config);
            st = misp_model_build(&cfg, bench_common.seed, &model);
        }
        if (st != MISP_OK) return fail(st);
        std::unique_ptr<misp_model, decltype(&misp_model_free)> model_guard(model, misp_model_free);

        StringHolder report;
        st = misp_benchmark(model, h / 2, w / 2, mode, bench_reps, &report.s);
        if (st != MISP_OK) return fail(st);
        std::fputs(report.s, stdout);
        return kExitOk;
    }

    if (synth->parsed()) {
        misp_set_threads(synth_common.threads);
        const misp_status st = misp_synth_dataset(synth_out.c_str(), synth_count, synth_size,
                                                  synth_sigma, synth_common.seed);
        if (st != MISP_OK) return fail(st);
        std::printf("wrote %d pairs to %s\n", synth_count, synth_out.c_str());
        return kExitOk;
    }

    return kExitUsage;
}

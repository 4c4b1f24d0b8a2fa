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

#include "parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace microisp {

namespace {

std::atomic<int> g_max_threads{0};
thread_local int t_region_depth = 0;

int hardware_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

} // namespace

void set_max_threads(int n) { g_max_threads.store(n, std::memory_order_relaxed); }

int max_threads() {
    int n = g_max_threads.load(std::memory_order_relaxed);
    return n <= 0 ? hardware_threads() : n;
}

void parallel_for(int64_t n, int64_t min_grain,
                  const std::function<void(int64_t, int64_t)>& body) {
    if (n <= 0) return;
    const int threads = max_threads();
    if (threads <= 1 || t_region_depth > 0 || n < std::max<int64_t>(min_grain, 2)) {
        body(0, n);
        return;
    }
    const int chunks = static_cast<int>(std::min<int64_t>(threads, n));
    const int64_t base = n / chunks;
    const int64_t rem = n % chunks;

    std::exception_ptr first_error;
    std::mutex error_mu;
    const int parent_depth = t_region_depth;

    auto run_chunk = [&](int64_t begin, int64_t end) {
        t_region_depth = parent_depth + 1;
        try {
            body(begin, end);
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mu);
            if (!first_error) first_error = std::current_exception();
        }
        t_region_depth = parent_depth;
    };

    std::vector<std::thread> workers;
    workers.reserve(static_cast<size_t>(chunks) - 1);
    int64_t begin = 0;
    for (int i = 0; i < chunks; ++i) {
        int64_t end = begin + base + (i < rem ? 1 : 0);
        if (i + 1 == chunks) {
            run_chunk(begin, end);
        } else {
            workers.emplace_back(run_chunk, begin, end);
        }
        begin = end;
    }
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);
}

void parallel_tasks(const std::vector<std::function<void()>>& tasks) {
    parallel_for(static_cast<int64_t>(tasks.size()), 1,
                 [&](int64_t begin, int64_t end) {
                     for (int64_t i = begin; i < end; ++i) tasks[static_cast<size_t>(i)]();
                 });
}

} // namespace microisp

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
#include <functional>
#include <vector>

namespace microisp {

/// Caps library-internal parallelism. n <= 0 selects the hardware thread count.
void set_max_threads(int n);
int max_threads();

// Runs body(begin, end) over [0, n) split into contiguous chunks, one chunk
// per worker. Chunks never overlap, so results are bitwise identical for any
// thread count as long as body(i) depends only on index i. Runs serially when
// n < min_grain, when max_threads() == 1, or inside another parallel region.
void parallel_for(int64_t n, int64_t min_grain,
                  const std::function<void(int64_t, int64_t)>& body);

/// Runs each task; tasks run concurrently when threads are available.
void parallel_tasks(const std::vector<std::function<void()>>& tasks);

} // namespace microisp

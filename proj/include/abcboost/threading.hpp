// Copyright 2026 The ABCBoost Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace abcboost {

/**
 * Resolve a requested worker count to a concrete one.
 *
 * @param[in] requested value of the --threads flag; <= 0 means "auto"
 * @return requested if positive; otherwise the ABCBOOST_THREADS environment
 *         variable if set and positive; otherwise hardware concurrency.
 */
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ABCBOOST_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

/**
 * Run fn(task, worker) for every task index in [0, n_tasks).
 *
 * Tasks must write only to task-indexed slots; workers may keep scratch
 * keyed by their worker id (< n_threads). Because no two tasks share
 * mutable state and all cross-task reductions happen after this call
 * returns, results are bit-identical for every thread count.
 */
inline void parallel_tasks(std::size_t n_tasks, int n_threads,
                           const std::function<void(std::size_t, int)>& fn) {
  if (n_tasks == 0) return;
  if (n_threads <= 1 || n_tasks == 1) {
    for (std::size_t i = 0; i < n_tasks; ++i) fn(i, 0);
    return;
  }
  std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(n_threads), n_tasks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n_tasks) break;
        try {
          fn(i, static_cast<int>(w));
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace abcboost

// Copyright 2026 The W2S Label Engine Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace w2s {

/// Runs fn(i) for i in [0, n) on at most `concurrency` threads. Work items
/// are claimed in index order; the first exception stops further claims
/// and is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t concurrency, Fn&& fn) {
  concurrency = std::max<std::size_t>(1, std::min(concurrency, n));
  if (concurrency == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  {
    std::vector<std::jthread> workers;
    workers.reserve(concurrency);
    for (std::size_t t = 0; t < concurrency; ++t) {
      workers.emplace_back([&] {
        while (!failed.load()) {
          const std::size_t i = next.fetch_add(1);
          if (i >= n) return;
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (!error) error = std::current_exception();
            failed = true;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

/// Ordered map: out[i] = fn(i) regardless of completion order.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t n, std::size_t concurrency, Fn&& fn) {
  std::vector<std::optional<T>> slots(n);
  parallel_for(n, concurrency, [&](std::size_t i) { slots[i].emplace(fn(i)); });
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace w2s

// Copyright 2026 The sdlr Authors
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

// Fixed-partition parallel execution over ensemble samples.
//
// Samples are split into chunks of kChunkSize independent of the worker
// count. Reductions combine per-chunk partials in chunk order, so results are
// bit-identical for any number of workers.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "sdlr/random.hpp"

namespace sdlr {

inline constexpr Eigen::Index kChunkSize = 256;

// Worker cap from SDLR_THREADS, defaulting to the hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("SDLR_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1U : hw;
}

inline Eigen::Index chunk_count(Eigen::Index count) {
  return (count + kChunkSize - 1) / kChunkSize;
}

// Calls f(chunk, begin, end) for every chunk of [0, count). When several
// chunks throw, the exception of the lowest chunk index is rethrown.
template <typename F>
void parallel_chunks(Eigen::Index count, F&& f) {
  const Eigen::Index chunks = chunk_count(count);
  if (chunks == 0) return;
  const unsigned workers = static_cast<unsigned>(
      std::min<Eigen::Index>(worker_count(), chunks));
  auto bounds = [count](Eigen::Index c) {
    const Eigen::Index b = c * kChunkSize;
    return std::pair{b, std::min(count, b + kChunkSize)};
  };
  if (workers <= 1) {
    for (Eigen::Index c = 0; c < chunks; ++c) {
      const auto [b, e] = bounds(c);
      f(c, b, e);
    }
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(chunks));
  std::atomic<Eigen::Index> next{0};
  auto run = [&] {
    for (Eigen::Index c = next++; c < chunks; c = next++) {
      try {
        const auto [b, e] = bounds(c);
        f(c, b, e);
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

// Standard normal increments, one row per sample and one column per channel.
inline Eigen::MatrixXd draw_noise(const NoiseSource& source, Eigen::Index samples,
                                  std::uint64_t step, Eigen::Index channels) {
  Eigen::MatrixXd xi(samples, channels);
  for (Eigen::Index i = 0; i < samples; ++i) {
    for (Eigen::Index j = 0; j < channels; ++j) {
      xi(i, j) = source.normal(static_cast<std::uint64_t>(i), step,
                               static_cast<std::uint64_t>(j));
    }
  }
  return xi;
}

}  // namespace sdlr

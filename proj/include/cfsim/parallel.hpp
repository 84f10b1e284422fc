// Copyright 2026 The cfsim Authors
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

#ifndef CFSIM_PARALLEL_HPP
#define CFSIM_PARALLEL_HPP

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace cfsim {

/// Split [0, n) into contiguous blocks and run fn(begin, end) on each, using
/// `threads` OS threads (1 = run inline). Callers derive every random value
/// from (seed, row), so the partition never changes results. The first
/// exception thrown by any block is rethrown in the calling thread.
template <typename Fn>
void parallel_for(size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    fn(size_t{0}, n);
    return;
  }
  size_t nthreads = static_cast<size_t>(threads);
  if (nthreads > n) nthreads = n;
  const size_t chunk = (n + nthreads - 1) / nthreads;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(nthreads);
  for (size_t t = 0; t < nthreads; ++t) {
    const size_t begin = t * chunk;
    const size_t end = (begin + chunk < n) ? begin + chunk : n;
    if (begin >= end) break;
    pool.emplace_back([&, t, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace cfsim

#endif  // CFSIM_PARALLEL_HPP

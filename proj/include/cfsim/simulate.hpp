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

#ifndef CFSIM_SIMULATE_HPP
#define CFSIM_SIMULATE_HPP

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "cfsim/errors.hpp"
#include "cfsim/model.hpp"
#include "cfsim/parallel.hpp"
#include "cfsim/rng.hpp"
#include "cfsim/table.hpp"

namespace cfsim {

/// Forward simulation: draw every exogenous column i.i.d. from its declared
/// distribution and evaluate the structural expressions in topological order.
///
/// Columns present in `d0` are copied bit-exactly instead of being generated;
/// observed columns in d0 must bring their full parent closure along (the
/// copied values are trusted, not re-derived). Every fresh value depends only
/// on (seed, column name, row index), so results are identical for any thread
/// count.
inline ParticleTable simulate(const Scm& m, size_t n, std::uint64_t seed,
                              const ParticleTable* d0 = nullptr,
                              int threads = 1) {
  ParticleTable out;
  for (const auto& name : m.column_names()) out.add_col(name, n);

  std::set<std::string> provided;
  if (d0 != nullptr) {
    if (d0->rows() != n) {
      throw ModelError("d0 has " + std::to_string(d0->rows()) +
                       " rows, expected " + std::to_string(n));
    }
    for (const auto& name : d0->names()) {
      if (!out.has_col(name)) {
        throw ModelError("d0 column '" + name + "' is not in the model");
      }
      provided.insert(name);
    }
    for (const auto& name : d0->names()) {
      int vi = m.var_index(name);
      if (vi < 0) continue;  // exogenous columns carry no requirements
      const auto& inf = m.info(vi);
      auto require = [&](const std::string& parent) {
        if (!provided.count(parent)) {
          throw ModelError("d0 provides '" + name + "' but not its parent '" +
                           parent + "'");
        }
      };
      for (const auto& p : inf.parents) require(p);
      for (const auto& g : inf.global_parents) require(g);
      if (inf.uses_error) require(Scm::error_col_name(name));
    }
    for (const auto& name : d0->names()) out.col(name) = d0->col(name);
  }

  for (const auto& bg : m.background_columns()) {
    if (provided.count(bg.name)) continue;
    const std::uint64_t key = rng::derive(seed, bg.name);
    auto& col = out.col(static_cast<size_t>(bg.col));
    const ErrorDist dist = bg.dist;
    parallel_for(n, threads, [&col, key, dist](size_t begin, size_t end) {
      for (size_t r = begin; r < end; ++r) {
        col[r] = dist.quantile(rng::uniform01(key, r));
      }
    });
  }

  auto ptrs = out.col_ptrs();
  const double* const* cols = ptrs.data();
  for (int vi : m.topo_order()) {
    const auto& v = m.variable(vi);
    if (provided.count(v.name)) continue;
    const auto& inf = m.info(vi);
    auto& col = out.col(static_cast<size_t>(inf.col));
    parallel_for(n, threads, [&](size_t begin, size_t end) {
      for (size_t r = begin; r < end; ++r) {
        col[r] = inf.prog.eval_row(cols, r);
      }
    });
  }
  return out;
}

}  // namespace cfsim

#endif  // CFSIM_SIMULATE_HPP

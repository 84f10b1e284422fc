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

#ifndef CFSIM_TESTS_UNIT_HELPERS_HPP
#define CFSIM_TESTS_UNIT_HELPERS_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "cfsim/conditioning.hpp"
#include "cfsim/model.hpp"
#include "cfsim/simulate.hpp"
#include "cfsim/table.hpp"

namespace cfsim_test {

inline std::string models_dir() { return CFSIM_MODELS_DIR; }

inline std::string model_path(const std::string& file) {
  return models_dir() + "/" + file;
}

/// Re-derives every observed column from the table's exogenous columns and
/// checks that the stored values satisfy the structural equations. Conditioned
/// continuous variables may be off by the root-finding tolerance.
inline void check_consistent(const cfsim::Scm& m, const cfsim::ParticleTable& t,
                             double tol = 1e-6) {
  cfsim::ParticleTable exo = t.select_cols(cfsim::background_names(m));
  cfsim::ParticleTable redo = cfsim::simulate(m, t.rows(), 0, &exo, 1);
  for (const auto& v : m.variables()) {
    const auto& got = t.col(v.name);
    const auto& want = redo.col(v.name);
    for (size_t r = 0; r < t.rows(); ++r) {
      if (cfsim::is_na(want[r]) && cfsim::is_na(got[r])) continue;
      const double bound = tol * std::max(1.0, std::fabs(want[r]));
      if (!(std::fabs(got[r] - want[r]) <= bound)) {
        CAPTURE(v.name, r, got[r], want[r]);
        FAIL("stored value breaks the structural equation");
      }
    }
  }
}

/// Two-sample Kolmogorov-Smirnov statistic: the largest gap between the two
/// empirical distribution functions.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  size_t i = 0;
  size_t j = 0;
  double gap = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    gap = std::max(gap, std::fabs(static_cast<double>(i) / na -
                                  static_cast<double>(j) / nb));
  }
  return gap;
}

/// Three-variable linear Gaussian chain used throughout: z = u, x = z + u,
/// y = x + z + u, all errors standard normal.
inline cfsim::Scm chain_model() {
  cfsim::ModelSpec spec;
  auto add = [&spec](const std::string& name, const std::string& source) {
    cfsim::VariableSpec v;
    v.name = name;
    v.error_dist = cfsim::ErrorDist::normal(0, 1);
    v.expr = cfsim::parse_expr(source);
    v.monotonicity = cfsim::Monotonicity::kAdditive;
    spec.variables.push_back(std::move(v));
  };
  add("z", "u");
  add("x", "z + u");
  add("y", "x + z + u");
  return cfsim::Scm::build(spec);
}

}  // namespace cfsim_test

#endif  // CFSIM_TESTS_UNIT_HELPERS_HPP

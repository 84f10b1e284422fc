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

#ifndef CFSIM_COUNTERFACTUAL_HPP
#define CFSIM_COUNTERFACTUAL_HPP

// Counterfactual sampling in three steps: update the exogenous variables by
// the evidence, replace the intervened variables with constants, and push the
// updated exogenous sample through the modified model. The output rows pair
// the factual exogenous values with the counterfactual endogenous values.
// The model is first restricted to the ancestors of everything the query
// touches; that restriction leaves the answer's distribution unchanged and
// can shrink the simulation considerably.

#include <algorithm>
#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "cfsim/conditioning.hpp"
#include "cfsim/errors.hpp"
#include "cfsim/model.hpp"
#include "cfsim/simulate.hpp"
#include "cfsim/stats.hpp"
#include "cfsim/table.hpp"

namespace cfsim {

struct CounterfactualQuery {
  std::vector<Condition> conditions;
  Intervention intervention;
  std::vector<std::string> targets;
  size_t n = 10000;
  std::uint64_t seed = 0;
  bool prune = true;  // restrict to ancestors of targets/evidence/intervention
  ConditioningOptions opts;
};

inline ParticleTable simulate_counterfactual(const Scm& m,
                                             const CounterfactualQuery& q) {
  if (q.targets.empty()) {
    throw ModelError("counterfactual query has no target variables");
  }
  std::set<std::string> touched;
  for (const auto& t : q.targets) {
    m.require_var(t);
    if (q.intervention.assignments.count(t)) {
      throw ModelError("target '" + t + "' is intervened on; its "
                       "counterfactual value is the constant you set");
    }
    touched.insert(t);
  }
  for (const auto& c : q.conditions) {
    m.require_var(c.variable);
    touched.insert(c.variable);
  }
  for (const auto& [name, value] : q.intervention.assignments) {
    m.require_var(name);
    touched.insert(name);
  }

  const Scm pruned = q.prune ? m.ancestral_prune(touched) : m;

  ParticleTable evidence;
  if (q.conditions.empty()) {
    evidence = simulate(pruned, q.n, rng::derive(q.seed, "prior"), nullptr,
                        q.opts.threads);
  } else {
    evidence = simulate_multiple_conditions(pruned, q.n, q.conditions, q.seed,
                                            q.opts);
  }

  const Scm submodel = pruned.intervene(q.intervention);
  ParticleTable bg = evidence.select_cols(background_names(pruned));
  ParticleTable out = simulate(submodel, q.n, rng::derive(q.seed, "world"),
                               &bg, q.opts.threads);
  out.ancestry = evidence.ancestry;
  out.diag = evidence.diag;
  out.weights = evidence.weights;
  return out;
}

// --------------------------------------------------------------------------
// Summaries
// --------------------------------------------------------------------------

inline constexpr std::array<double, 7> kSummaryQuantiles = {
    0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99};

struct ColumnSummary {
  std::string name;
  double mean = kNa;
  double variance = kNa;
  std::array<double, 7> quantiles{};  // at kSummaryQuantiles
};

struct TableSummary {
  std::vector<ColumnSummary> columns;
  size_t rows = 0;
  double ess = kNa;
  double unique_fraction = kNa;
  size_t na_roots = 0;
};

/// Linear-interpolation quantile on a sorted copy (the common "type 7"
/// definition; a one-row sample returns that row for every level).
inline double quantile(std::vector<double> x, double p) {
  if (x.empty()) return kNa;
  std::sort(x.begin(), x.end());
  const double h = p * static_cast<double>(x.size() - 1);
  const size_t lo = static_cast<size_t>(h);
  if (lo + 1 >= x.size()) return x.back();
  const double frac = h - static_cast<double>(lo);
  return x[lo] + frac * (x[lo + 1] - x[lo]);
}

inline TableSummary summarize(const ParticleTable& t,
                              const std::vector<std::string>& targets = {}) {
  TableSummary s;
  s.rows = t.rows();
  s.ess = t.diag.ess;
  s.unique_fraction = unique_row_fraction(t);
  s.na_roots = t.diag.na_roots;
  for (const auto& name : targets.empty() ? t.names() : targets) {
    const auto& col = t.col(name);
    ColumnSummary cs;
    cs.name = name;
    cs.mean = mean(col);
    cs.variance = variance(col);
    for (size_t i = 0; i < kSummaryQuantiles.size(); ++i) {
      cs.quantiles[i] = quantile(col, kSummaryQuantiles[i]);
    }
    s.columns.push_back(std::move(cs));
  }
  return s;
}

}  // namespace cfsim

#endif  // CFSIM_COUNTERFACTUAL_HPP

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

// Counterfactual fairness audit. A case fixes the factual evidence of one
// individual; the audit sweeps every combination of sensitive values s,
// simulates the counterfactual world do(S = s, W = w) under that evidence
// (w are the outcome's non-sensitive parents, held at their factual values),
// and feeds each simulated table to the predictor. The case's score is the
// spread between the largest and smallest per-combination mean prediction;
// a fair predictor scores exactly zero. The alternative mode intervenes on
// the sensitive variables alone.

#ifndef CFSIM_FAIRNESS_HPP
#define CFSIM_FAIRNESS_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cfsim/conditioning.hpp"
#include "cfsim/counterfactual.hpp"
#include "cfsim/errors.hpp"
#include "cfsim/math.hpp"
#include "cfsim/model.hpp"
#include "cfsim/predictor.hpp"
#include "cfsim/rng.hpp"
#include "cfsim/simulate.hpp"
#include "cfsim/stats.hpp"
#include "cfsim/table.hpp"

namespace cfsim {

/// One sensitive variable and the values the audit sweeps. Continuous
/// sensitive variables need an explicit grid; there is no default.
struct SensitiveSpec {
  std::string name;
  std::vector<double> values;
};

enum class FairnessMode {
  kDefinition5,  // intervene on S and on the outcome's other parents
  kKusner,       // intervene on S only
};

/// Audit-wide configuration: what is predicted, what is protected, and how
/// each counterfactual world is simulated.
struct FairnessAudit {
  std::string outcome;
  std::vector<SensitiveSpec> sensitive;
  FairnessMode mode = FairnessMode::kDefinition5;
  size_t n = 1000;  // rows per sensitive-value combination
  std::uint64_t seed = 0;
  bool prune = true;
  ConditioningOptions opts;
};

/// One individual's factual evidence, split as the audit needs it:
/// `w_conditions` cover exactly the outcome's observed parents outside the
/// sensitive set, `c_conditions` cover the rest of the observed evidence
/// (which may include the factual sensitive values, never the outcome).
struct FairnessCase {
  std::vector<Condition> w_conditions;
  std::vector<Condition> c_conditions;
};

/// Aggregate cutoff for "close to fair": cases whose spread stays below this
/// count toward the near-zero percentage.
inline constexpr double kSmallDifference = 0.01;

struct CellResult {
  std::vector<double> s_values;  // grid values, one per sensitive variable
  double mean_prediction = kNa;
  bool infeasible = false;
  std::string note;
};

struct CaseReport {
  std::vector<CellResult> cells;
  double difference = kNa;  // max - min of cell means; NA if any cell failed
  bool failed = false;
};

struct AggregateReport {
  size_t cases_run = 0;
  size_t cases_completed = 0;
  size_t cases_failed = 0;
  double zero_pct = kNa;    // completed cases with difference exactly 0
  double small_pct = kNa;   // completed cases with difference < kSmallDifference
  double median_difference = kNa;
  double max_difference = kNa;
  std::vector<CaseReport> cases;
};

namespace detail {

inline std::set<std::string> condition_vars(const std::vector<Condition>& cs) {
  std::set<std::string> out;
  for (const auto& c : cs) {
    if (!out.insert(c.variable).second) {
      throw ModelError("condition set names '" + c.variable + "' twice");
    }
  }
  return out;
}

/// The outcome's observed parents that are not sensitive: the variables the
/// main mode holds fixed by intervention.
inline std::set<std::string> w_variables(const Scm& m,
                                         const FairnessAudit& audit) {
  const int yi = m.require_var(audit.outcome);
  std::set<std::string> out;
  for (const auto& p : m.info(yi).parents) out.insert(p);
  for (const auto& s : audit.sensitive) out.erase(s.name);
  return out;
}

inline void validate_audit(const Scm& m, const FairnessAudit& audit) {
  m.require_var(audit.outcome);
  if (audit.sensitive.empty()) {
    throw ModelError("fairness audit has no sensitive variables");
  }
  std::set<std::string> seen;
  for (const auto& s : audit.sensitive) {
    m.require_var(s.name);
    if (s.name == audit.outcome) {
      throw ModelError("outcome '" + audit.outcome +
                       "' cannot be a sensitive variable");
    }
    if (!seen.insert(s.name).second) {
      throw ModelError("sensitive variable '" + s.name + "' repeats");
    }
    if (s.values.empty()) {
      throw ModelError("sensitive variable '" + s.name +
                       "' has an empty value grid");
    }
    for (double v : s.values) {
      if (!std::isfinite(v)) {
        throw ModelError("sensitive variable '" + s.name +
                         "' has a non-finite grid value");
      }
    }
  }
  if (audit.n < 1) throw ModelError("fairness audit needs n >= 1");
}

inline void validate_case(const Scm& m, const FairnessAudit& audit,
                          const FairnessCase& fc) {
  const std::set<std::string> w_vars = condition_vars(fc.w_conditions);
  const std::set<std::string> expected = w_variables(m, audit);
  if (w_vars != expected) {
    std::string want;
    for (const auto& v : expected) want += (want.empty() ? "" : ", ") + v;
    throw ModelError(
        "case must fix exactly the outcome's non-sensitive parents {" + want +
        "}");
  }
  const std::set<std::string> c_vars = condition_vars(fc.c_conditions);
  for (const auto& v : c_vars) {
    m.require_var(v);
    if (v == audit.outcome) {
      throw ModelError("the outcome '" + audit.outcome +
                       "' cannot appear among the case conditions");
    }
    if (w_vars.count(v)) {
      throw ModelError("variable '" + v +
                       "' appears in both condition groups of the case");
    }
  }
}

/// Row-major sweep over the Cartesian grid of sensitive values; the last
/// sensitive variable varies fastest.
inline std::vector<std::vector<double>> sensitive_grid(
    const std::vector<SensitiveSpec>& sensitive) {
  std::vector<std::vector<double>> combos{{}};
  for (const auto& s : sensitive) {
    std::vector<std::vector<double>> next;
    next.reserve(combos.size() * s.values.size());
    for (const auto& prefix : combos) {
      for (double v : s.values) {
        std::vector<double> row = prefix;
        row.push_back(v);
        next.push_back(std::move(row));
      }
    }
    combos = std::move(next);
  }
  return combos;
}

}  // namespace detail

/// Audits one case: one counterfactual simulation per sensitive-value
/// combination, then the spread of mean predictions. Infeasible evidence in
/// any combination marks the case failed (its spread would be meaningless);
/// predictor protocol failures propagate.
inline CaseReport evaluate_fairness(Predictor& pred, const Scm& m,
                                    const FairnessAudit& audit,
                                    const FairnessCase& fc,
                                    std::uint64_t case_seed) {
  detail::validate_audit(m, audit);
  detail::validate_case(m, audit, fc);

  std::vector<Condition> conditions = fc.w_conditions;
  conditions.insert(conditions.end(), fc.c_conditions.begin(),
                    fc.c_conditions.end());

  CaseReport report;
  const auto grid = detail::sensitive_grid(audit.sensitive);
  for (size_t cell = 0; cell < grid.size(); ++cell) {
    CellResult res;
    res.s_values = grid[cell];

    Intervention iv;
    for (size_t k = 0; k < audit.sensitive.size(); ++k) {
      iv.assignments[audit.sensitive[k].name] = grid[cell][k];
    }
    if (audit.mode == FairnessMode::kDefinition5) {
      for (const auto& w : fc.w_conditions) {
        iv.assignments[w.variable] = w.value;
      }
    }

    CounterfactualQuery q;
    q.conditions = conditions;
    q.intervention = iv;
    for (const auto& v : m.variables()) {
      if (!iv.assignments.count(v.name)) q.targets.push_back(v.name);
    }
    q.n = audit.n;
    q.seed = rng::derive(case_seed, "cell:" + std::to_string(cell));
    q.prune = audit.prune;
    q.opts = audit.opts;

    try {
      const ParticleTable world = simulate_counterfactual(m, q);
      std::vector<std::string> view_cols;
      for (const auto& v : m.variables()) {
        if (world.has_col(v.name)) view_cols.push_back(v.name);
      }
      const ParticleTable view = world.select_cols(view_cols);
      res.mean_prediction = mean(pred.predict(view));
    } catch (const InfeasibleEvidenceError& e) {
      res.infeasible = true;
      res.note = e.what();
      report.failed = true;
    }
    report.cells.push_back(std::move(res));
  }

  if (!report.failed && !report.cells.empty()) {
    double lo = report.cells[0].mean_prediction;
    double hi = lo;
    for (const auto& c : report.cells) {
      lo = std::min(lo, c.mean_prediction);
      hi = std::max(hi, c.mean_prediction);
    }
    report.difference = hi - lo;
  }
  return report;
}

/// Draws whole observed rows from the model and turns each into a case: the
/// outcome's non-sensitive parents become the first condition group and
/// every other observed variable except the outcome (factual sensitive
/// values included) becomes the second.
inline std::vector<FairnessCase> sample_cases(const Scm& m,
                                              const FairnessAudit& audit,
                                              size_t count,
                                              std::uint64_t seed) {
  detail::validate_audit(m, audit);
  const std::set<std::string> w_vars = detail::w_variables(m, audit);
  const ParticleTable draws =
      simulate(m, count, rng::derive(seed, "cases"), nullptr,
               audit.opts.threads);
  std::vector<FairnessCase> cases(count);
  for (size_t r = 0; r < count; ++r) {
    FairnessCase& fc = cases[r];
    for (const auto& v : m.variables()) {
      if (v.name == audit.outcome) continue;
      const double value = draws.col(v.name)[r];
      if (w_vars.count(v.name)) {
        fc.w_conditions.push_back({v.name, value});
      } else {
        fc.c_conditions.push_back({v.name, value});
      }
    }
  }
  return cases;
}

/// Audits many cases and aggregates: the share of exactly fair cases, the
/// share below the near-zero cutoff, and the median and maximum spread. Cases
/// with infeasible cells are counted but excluded from the aggregates.
inline AggregateReport evaluate_fairness_batch(
    Predictor& pred, const Scm& m, const FairnessAudit& audit,
    const std::vector<FairnessCase>& cases) {
  AggregateReport agg;
  agg.cases_run = cases.size();
  std::vector<double> diffs;
  for (size_t i = 0; i < cases.size(); ++i) {
    CaseReport r = evaluate_fairness(
        pred, m, audit, cases[i],
        rng::derive(audit.seed, "case:" + std::to_string(i)));
    if (r.failed) {
      ++agg.cases_failed;
    } else {
      ++agg.cases_completed;
      diffs.push_back(r.difference);
    }
    agg.cases.push_back(std::move(r));
  }
  if (!diffs.empty()) {
    const double total = static_cast<double>(diffs.size());
    size_t zero = 0, small = 0;
    for (double d : diffs) {
      if (d == 0.0) ++zero;
      if (d < kSmallDifference) ++small;
    }
    agg.zero_pct = 100.0 * static_cast<double>(zero) / total;
    agg.small_pct = 100.0 * static_cast<double>(small) / total;
    std::sort(diffs.begin(), diffs.end());
    const size_t mid = diffs.size() / 2;
    agg.median_difference = diffs.size() % 2 == 1
                                ? diffs[mid]
                                : 0.5 * (diffs[mid - 1] + diffs[mid]);
    agg.max_difference = diffs.back();
  }
  return agg;
}

}  // namespace cfsim

#endif  // CFSIM_FAIRNESS_HPP

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

#ifndef CFSIM_CONDITIONING_HPP
#define CFSIM_CONDITIONING_HPP

// Conditional sampling by sequential importance resampling. For evidence on
// a continuous variable C = c, each particle's dedicated error is replaced by
// the unique value solving f_C(u, parents) = c (analytically for additive
// noise, by bracketed bisection otherwise), the particle is weighted by the
// error density at that root divided by df_C/du there (change of variables),
// and the population is resampled by those weights. Discrete evidence keeps
// the matching particles and resamples among them. Multiple conditions are
// processed in topological order; everything already conditioned on, plus its
// ancestors, is frozen and carried into the next stage's proposal.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cfsim/errors.hpp"
#include "cfsim/model.hpp"
#include "cfsim/parallel.hpp"
#include "cfsim/rng.hpp"
#include "cfsim/simulate.hpp"
#include "cfsim/stats.hpp"
#include "cfsim/table.hpp"

namespace cfsim {

struct Condition {
  std::string variable;
  double value = 0.0;
};

struct RootFindConfig {
  double bracket_lo_q = 1e-9;   // quantiles of the error distribution that
  double bracket_hi_q = 1.0 - 1e-9;  // seed the initial bracket
  int max_expansions = 64;      // geometric bracket growth steps
  int max_iter = 200;           // bisection iterations
  double tol = 0.0;             // absolute |f - c| tolerance; 0 = auto

  double tol_for(double c) const {
    return tol > 0.0 ? tol : 1e-9 * std::max(1.0, std::fabs(c));
  }
};

enum class ResampleScheme { kMultinomial, kSystematic };

struct ConditioningOptions {
  ResampleScheme scheme = ResampleScheme::kMultinomial;
  RootFindConfig root;
  int threads = 1;
  /// Skip the final resampling and return the weighted particle set instead.
  /// Honored by the single-continuous-condition entry point only.
  bool weighted_sample = false;
};

// --------------------------------------------------------------------------
// Root finding
// --------------------------------------------------------------------------

/// Solve f_C(u, parents at `row`) = c for the dedicated error u and store the
/// result in the error cell. Returns the root, or NA when no error value can
/// reach c (the weight must then be zero). Non-monotone behavior over the
/// initial bracket raises ModelError.
inline double find_root(const Scm& m, int var, double c, ParticleTable& t,
                        size_t row, const RootFindConfig& cfg,
                        const std::vector<const double*>& ptrs) {
  const VariableSpec& v = m.variable(var);
  const Scm::VarInfo& inf = m.info(var);
  double& u_cell = t.col(static_cast<size_t>(inf.error_col))[row];
  const double* const* cols = ptrs.data();

  auto f_at = [&](double u) {
    u_cell = u;
    return inf.prog.eval_row(cols, row);
  };

  if (v.monotonicity == Monotonicity::kAdditive) {
    const double g = f_at(0.0);
    const double root = is_na(g) ? kNa : c - g;
    u_cell = root;
    return root;
  }

  double lo = v.error_dist.quantile(cfg.bracket_lo_q);
  double hi = v.error_dist.quantile(cfg.bracket_hi_q);
  double flo = f_at(lo);
  double fhi = f_at(hi);
  if (is_na(flo) || is_na(fhi)) {
    u_cell = kNa;
    return kNa;
  }
  if (flo > fhi) {
    throw ModelError("variable '" + v.name +
                     "' is declared monotonic but decreases in its error "
                     "term (f(" + format_double(lo) + ") = " +
                     format_double(flo) + " > f(" + format_double(hi) +
                     ") = " + format_double(fhi) + ")");
  }

  double width = hi - lo;
  for (int k = 0; flo > c; ++k) {
    if (k == cfg.max_expansions) {
      u_cell = kNa;
      return kNa;
    }
    lo -= width;
    width *= 2.0;
    flo = f_at(lo);
    if (is_na(flo)) {
      u_cell = kNa;
      return kNa;
    }
  }
  width = hi - lo;
  for (int k = 0; fhi < c; ++k) {
    if (k == cfg.max_expansions) {
      u_cell = kNa;
      return kNa;
    }
    hi += width;
    width *= 2.0;
    fhi = f_at(hi);
    if (is_na(fhi)) {
      u_cell = kNa;
      return kNa;
    }
  }

  const double tol = cfg.tol_for(c);
  if (std::fabs(flo - c) <= tol) {
    u_cell = lo;
    return lo;
  }
  if (std::fabs(fhi - c) <= tol) {
    u_cell = hi;
    return hi;
  }
  for (int it = 0; it < cfg.max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f_at(mid);
    if (is_na(fm)) {
      u_cell = kNa;
      return kNa;
    }
    if (std::fabs(fm - c) <= tol) {
      u_cell = mid;
      return mid;
    }
    if (fm < c) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  u_cell = kNa;
  return kNa;
}

// --------------------------------------------------------------------------
// Importance weights
// --------------------------------------------------------------------------

/// Importance weight of one particle given the root already stored in the
/// error cell: the error density at the root for additive noise, density
/// divided by a central-difference slope otherwise. NA roots weigh zero.
inline double condition_weight(const Scm& m, int var, ParticleTable& t,
                               size_t row,
                               const std::vector<const double*>& ptrs) {
  const VariableSpec& v = m.variable(var);
  const Scm::VarInfo& inf = m.info(var);
  double& u_cell = t.col(static_cast<size_t>(inf.error_col))[row];
  const double root = u_cell;
  if (is_na(root)) return 0.0;
  const double density = v.error_dist.pdf(root);
  if (v.monotonicity == Monotonicity::kAdditive || density == 0.0) {
    return density;
  }
  const double h = std::max(1e-6, 1e-6 * std::fabs(root));
  const double* const* cols = ptrs.data();
  u_cell = root + h;
  const double f_hi = inf.prog.eval_row(cols, row);
  u_cell = root - h;
  const double f_lo = inf.prog.eval_row(cols, row);
  u_cell = root;
  const double slope = (f_hi - f_lo) / (2.0 * h);
  if (!(slope > 0.0)) {
    throw ModelError("variable '" + v.name +
                     "' is declared monotonic but has slope " +
                     format_double(slope) + " in its error term at u = " +
                     format_double(root));
  }
  return density / slope;
}

// --------------------------------------------------------------------------
// Resampling
// --------------------------------------------------------------------------

/// Draw `n` row indices with replacement, copy counts proportional to the
/// weights in expectation. Multinomial uses one uniform per draw; systematic
/// uses a single offset over a stratified grid (equal weights then reproduce
/// each row exactly once when n matches).
inline std::vector<size_t> resample_indices(const std::vector<double>& w,
                                            size_t n, ResampleScheme scheme,
                                            std::uint64_t seed) {
  double total = 0.0;
  for (double x : w) {
    if (x < 0.0 || !std::isfinite(x)) {
      throw ModelError("resampling weight " + format_double(x) +
                       " is not a finite nonnegative number");
    }
    total += x;
  }
  if (!(total > 0.0)) {
    throw InfeasibleEvidenceError("all resampling weights are zero", {});
  }
  std::vector<double> cum(w.size());
  double acc = 0.0;
  for (size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    cum[i] = acc;
  }
  cum.back() = total;  // guard against accumulation drift

  std::vector<size_t> idx(n);
  if (scheme == ResampleScheme::kMultinomial) {
    for (size_t i = 0; i < n; ++i) {
      const double x = rng::uniform01(seed, i) * total;
      idx[i] = static_cast<size_t>(
          std::upper_bound(cum.begin(), cum.end(), x) - cum.begin());
      if (idx[i] >= w.size()) idx[i] = w.size() - 1;
    }
  } else {
    const double offset = rng::uniform01(seed, 0);
    const double step = total / static_cast<double>(n);
    size_t j = 0;
    for (size_t i = 0; i < n; ++i) {
      const double x = (static_cast<double>(i) + offset) * step;
      while (j + 1 < w.size() && cum[j] <= x) ++j;
      idx[i] = j;
    }
  }
  return idx;
}

/// Table-level resampling; the result carries composed ancestry, equal
/// weights, and degeneracy diagnostics. The unique fraction records how many
/// distinct source rows this resampling step drew.
inline ParticleTable resample(const ParticleTable& t, size_t n,
                              const std::vector<double>& w,
                              ResampleScheme scheme, std::uint64_t seed) {
  if (w.size() != t.rows()) {
    throw ModelError("weight vector has " + std::to_string(w.size()) +
                     " entries, table has " + std::to_string(t.rows()));
  }
  auto idx = resample_indices(w, n, scheme, seed);
  ParticleTable out = t.select_rows(idx);
  out.diag = t.diag;
  out.diag.ess = effective_sample_size(w);
  std::sort(idx.begin(), idx.end());
  const size_t distinct =
      std::unique(idx.begin(), idx.end()) - idx.begin();
  out.diag.unique_fraction =
      n == 0 ? kNa : static_cast<double>(distinct) / static_cast<double>(n);
  return out;
}

// --------------------------------------------------------------------------
// Conditioning pipelines
// --------------------------------------------------------------------------

namespace detail {

inline void check_condition_var(const Scm& m, const Condition& cond) {
  int vi = m.require_var(cond.variable);
  const VariableSpec& v = m.variable(vi);
  if (!std::isfinite(cond.value)) {
    throw ModelError("condition value for '" + cond.variable +
                     "' is not finite");
  }
  if (v.kind == VarKind::kContinuous &&
      v.monotonicity == Monotonicity::kNone) {
    throw ModelError(
        "cannot condition on continuous variable '" + cond.variable +
        "': it declares no monotonicity for its error term");
  }
}

inline std::string condition_text(const Condition& cond) {
  return cond.variable + " = " + format_double(cond.value);
}

}  // namespace detail

inline std::vector<std::string> background_names(const Scm& m) {
  std::vector<std::string> names;
  names.reserve(m.background_columns().size());
  for (const auto& bg : m.background_columns()) names.push_back(bg.name);
  return names;
}

/// Evidence on one continuous variable: propose, solve for the error roots,
/// weight, resample, then re-derive every observed column from the updated
/// exogenous columns. With opts.weighted_sample the resampling step is
/// skipped and normalized weights are attached instead.
inline ParticleTable simulate_continuous_condition(
    const Scm& m, size_t n, const Condition& cond, std::uint64_t seed,
    const ConditioningOptions& opts = {}, const ParticleTable* d0 = nullptr) {
  detail::check_condition_var(m, cond);
  const int vi = m.require_var(cond.variable);
  if (m.variable(vi).kind != VarKind::kContinuous) {
    throw ModelError("condition on '" + cond.variable +
                     "' used the continuous pipeline but the variable is "
                     "discrete");
  }

  ParticleTable d = simulate(m, n, rng::derive(seed, "propose"), d0,
                             opts.threads);
  if (d0 != nullptr && !d0->ancestry.empty()) d.ancestry = d0->ancestry;

  // The proposal's view of C, for diagnostics, before roots overwrite the
  // error column.
  double f_min = kNa;
  double f_max = kNa;
  for (double x : d.col(cond.variable)) {
    if (is_na(x)) continue;
    if (is_na(f_min) || x < f_min) f_min = x;
    if (is_na(f_max) || x > f_max) f_max = x;
  }

  auto ptrs = d.col_ptrs();
  std::vector<double> w(n, 0.0);
  parallel_for(n, opts.threads, [&](size_t begin, size_t end) {
    for (size_t r = begin; r < end; ++r) {
      find_root(m, vi, cond.value, d, r, opts.root, ptrs);
      w[r] = condition_weight(m, vi, d, r, ptrs);
    }
  });
  size_t na_roots = 0;
  {
    const auto& uc = d.col(static_cast<size_t>(m.info(vi).error_col));
    for (size_t r = 0; r < n; ++r) {
      if (is_na(uc[r])) ++na_roots;
    }
  }

  double total = 0.0;
  for (double x : w) total += x;
  if (!(total > 0.0)) {
    InfeasibleEvidenceError::Diagnostics diag;
    diag.condition = detail::condition_text(cond);
    diag.na_roots = na_roots;
    diag.observed_min = f_min;
    diag.observed_max = f_max;
    throw InfeasibleEvidenceError(
        "no particle satisfies '" + diag.condition +
            "' with positive weight (simulated range [" +
            format_double(f_min) + ", " + format_double(f_max) + "], " +
            std::to_string(na_roots) + " of " + std::to_string(n) +
            " rows had no root)",
        diag);
  }

  if (opts.weighted_sample) {
    // Re-derive the observed columns from the updated errors so every
    // positive-weight row satisfies the condition, then attach normalized
    // weights. NA-root rows keep weight zero and NA downstream values.
    ParticleTable bg = d.select_cols(background_names(m));
    ParticleTable out =
        simulate(m, n, rng::derive(seed, "weighted"), &bg, opts.threads);
    out.ancestry = d.ancestry;
    out.weights.resize(n);
    for (size_t r = 0; r < n; ++r) out.weights[r] = w[r] / total;
    out.diag.ess = effective_sample_size(w);
    out.diag.na_roots = na_roots;
    return out;
  }

  ParticleTable picked =
      resample(d, n, w, opts.scheme, rng::derive(seed, "resample"));
  picked.diag.na_roots = na_roots;
  ParticleTable bg = picked.select_cols(background_names(m));
  ParticleTable out =
      simulate(m, n, rng::derive(seed, "resim"), &bg, opts.threads);
  out.ancestry = picked.ancestry;
  out.diag = picked.diag;
  return out;
}

/// Evidence on a discrete variable: keep the rows that already satisfy it
/// and resample among them. No root finding and no re-derivation needed.
inline ParticleTable simulate_discrete_condition(
    const Scm& m, size_t n, const Condition& cond, std::uint64_t seed,
    const ConditioningOptions& opts = {}, const ParticleTable* d0 = nullptr) {
  detail::check_condition_var(m, cond);
  const int vi = m.require_var(cond.variable);
  if (m.variable(vi).kind != VarKind::kDiscrete) {
    throw ModelError("condition on '" + cond.variable +
                     "' used the discrete pipeline but the variable is "
                     "continuous");
  }

  ParticleTable d = simulate(m, n, rng::derive(seed, "propose"), d0,
                             opts.threads);
  if (d0 != nullptr && !d0->ancestry.empty()) d.ancestry = d0->ancestry;

  const auto& c_col = d.col(cond.variable);
  std::vector<double> w(n, 0.0);
  size_t matches = 0;
  for (size_t r = 0; r < n; ++r) {
    if (c_col[r] == cond.value) {
      w[r] = 1.0;
      ++matches;
    }
  }
  if (matches == 0) {
    InfeasibleEvidenceError::Diagnostics diag;
    diag.condition = detail::condition_text(cond);
    for (size_t r = 0; r < n && diag.marginal.size() < 64; ++r) {
      if (!is_na(c_col[r])) ++diag.marginal[c_col[r]];
    }
    throw InfeasibleEvidenceError(
        "no simulated particle has " + diag.condition + " (n = " +
            std::to_string(n) + "); the value may be structurally impossible",
        diag);
  }
  return resample(d, n, w, opts.scheme, rng::derive(seed, "resample"));
}

/// Evidence on several variables, processed in topological order. After
/// handling condition k, the conditioned variable and all of its ancestors
/// (including exogenous columns) are frozen; the next stage copies them and
/// proposes fresh values only for what remains free.
inline ParticleTable simulate_multiple_conditions(
    const Scm& m, size_t n, std::vector<Condition> conditions,
    std::uint64_t seed, const ConditioningOptions& opts = {}) {
  if (conditions.empty()) {
    throw ModelError("condition set is empty");
  }
  std::set<std::string> seen;
  for (const auto& cond : conditions) {
    detail::check_condition_var(m, cond);
    if (!seen.insert(cond.variable).second) {
      throw ModelError("variable '" + cond.variable +
                       "' appears in two conditions");
    }
  }
  std::stable_sort(conditions.begin(), conditions.end(),
                   [&m](const Condition& a, const Condition& b) {
                     return m.topo_position(m.require_var(a.variable)) <
                            m.topo_position(m.require_var(b.variable));
                   });

  ConditioningOptions stage_opts = opts;
  stage_opts.weighted_sample = false;

  ParticleTable d;
  std::set<std::string> fixed;
  size_t total_na_roots = 0;
  for (size_t k = 0; k < conditions.size(); ++k) {
    const Condition& cond = conditions[k];
    const std::uint64_t stage_seed =
        rng::derive(seed, "condition:" + std::to_string(k));
    ParticleTable frozen;
    const ParticleTable* d0 = nullptr;
    if (k > 0) {
      std::vector<std::string> keep;
      for (const auto& name : m.column_names()) {
        if (fixed.count(name)) keep.push_back(name);
      }
      frozen = d.select_cols(keep);
      d0 = &frozen;
    }
    try {
      const bool discrete =
          m.variable(m.require_var(cond.variable)).kind == VarKind::kDiscrete;
      d = discrete ? simulate_discrete_condition(m, n, cond, stage_seed,
                                                 stage_opts, d0)
                   : simulate_continuous_condition(m, n, cond, stage_seed,
                                                   stage_opts, d0);
    } catch (const InfeasibleEvidenceError& e) {
      auto diag = e.diagnostics();
      diag.condition_index = static_cast<int>(k);
      throw InfeasibleEvidenceError(
          std::string(e.what()) + " (condition " + std::to_string(k + 1) +
              " of " + std::to_string(conditions.size()) + ")",
          diag);
    }
    total_na_roots += d.diag.na_roots;
    auto closure = m.ancestral_columns({cond.variable});
    fixed.insert(closure.begin(), closure.end());
  }
  d.diag.na_roots = total_na_roots;
  return d;
}

}  // namespace cfsim

#endif  // CFSIM_CONDITIONING_HPP

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

// Benchmark harness: draws random linear-Gaussian models, conditions them
// with the particle sampler, and scores the result against the exact
// conditional distribution. Each round reports the unique-row percentage,
// the mean and SD of the standardized evaluation variable, a one-sample
// Kolmogorov-Smirnov statistic, and the error in one pairwise correlation.

#ifndef CFSIM_BENCH_HPP
#define CFSIM_BENCH_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "cfsim/conditioning.hpp"
#include "cfsim/errors.hpp"
#include "cfsim/gaussian.hpp"
#include "cfsim/math.hpp"
#include "cfsim/model.hpp"
#include "cfsim/rng.hpp"
#include "cfsim/simulate.hpp"
#include "cfsim/stats.hpp"
#include "cfsim/table.hpp"

namespace cfsim {

/// Law for random structural coefficients: uniform magnitude in
/// [min_magnitude, max_magnitude] with an independent random sign. The lower
/// cutoff keeps sampled edges from degenerating into near-zero links; the
/// default window spreads the stock cases from easy (case A keeps about half
/// of its rows unique) to hard (case E collapses under nine conditions).
struct CoefficientLaw {
  double min_magnitude = 0.1;
  double max_magnitude = 2.5;

  void validate() const {
    if (!(min_magnitude >= 0.0) || !(max_magnitude > min_magnitude)) {
      throw ModelError("coefficient magnitudes must satisfy 0 <= min < max");
    }
  }

  double draw(rng::Sequence& seq) const {
    const double mag =
        min_magnitude + (max_magnitude - min_magnitude) * seq.next_uniform01();
    return (seq.next_bits() & 1ull) ? mag : -mag;
  }

  std::string str() const {
    return "sign * uniform(" + format_double(min_magnitude) + ", " +
           format_double(max_magnitude) + ")";
  }
};

/// One benchmark setting: the shape of the random models, how many variables
/// are conditioned on per round, and the evaluation schedule.
struct BenchCase {
  std::string name = "custom";
  int v_count = 5;                // observed variables per model
  int conditions = 1;             // conditioning variables per round
  double degree = 3.0;            // expected neighbors per observed variable
  double confounder_ratio = 0.0;  // expected global confounders per variable
  CoefficientLaw coefficients;
  int rounds = 100;
  std::vector<size_t> n_grid{1000};
  std::uint64_t seed = 0;

  void validate() const {
    if (v_count < 1) throw ModelError("benchmark case has no variables");
    if (conditions < 0 || conditions >= v_count) {
      throw ModelError(
          "condition count must leave at least one variable unconditioned");
    }
    if (!(degree >= 0.0) || degree >= static_cast<double>(v_count)) {
      throw ModelError("mean degree must lie in [0, |V|)");
    }
    if (!(confounder_ratio >= 0.0)) {
      throw ModelError("confounder ratio must be nonnegative");
    }
    coefficients.validate();
    if (rounds < 1) throw ModelError("benchmark case needs at least one round");
    if (n_grid.empty()) throw ModelError("benchmark case has an empty n grid");
    for (size_t n : n_grid) {
      if (n < 2) throw ModelError("benchmark sample sizes must be at least 2");
    }
  }

  /// One-line description of the sampling choices, for report headers.
  std::string settings_note() const {
    return "edges: p = degree/(|V|-1) per ordered pair; coefficients: " +
           coefficients.str() +
           "; confounders: round(ratio*|V|) on uniform variable pairs; "
           "condition values drawn from the model's own joint";
  }
};

/// Random linear-Gaussian model with the case's shape. Every variable keeps a
/// unit-coefficient dedicated error; global confounders load on two distinct
/// uniformly chosen variables. Edge probability degree/(|V|-1) over pairs that
/// respect the variable order gives each variable the requested expected
/// number of neighbors.
inline GaussianScm random_gaussian_scm(const BenchCase& bc,
                                       std::uint64_t round_seed) {
  bc.validate();
  const int j = bc.v_count;
  const int confounders =
      static_cast<int>(std::lround(bc.confounder_ratio * j));
  const int h = j + confounders;
  rng::Sequence seq(round_seed);

  GaussianScm g;
  g.b0 = Eigen::VectorXd::Zero(j);
  g.B1 = Eigen::MatrixXd::Zero(j, j);
  g.B2 = Eigen::MatrixXd::Zero(j, h);
  g.v_names.reserve(j);
  g.u_names.reserve(h);
  for (int i = 0; i < j; ++i) {
    g.v_names.push_back("v" + std::to_string(i + 1));
  }
  // Dedicated errors reuse the names the particle engine gives error columns,
  // so oracle components and table columns can be matched by name alone.
  for (int i = 0; i < j; ++i) {
    g.u_names.push_back("u_v" + std::to_string(i + 1));
    g.B2(i, i) = 1.0;
  }
  for (int k = 0; k < confounders; ++k) {
    g.u_names.push_back("c" + std::to_string(k + 1));
  }

  for (int i = 0; i < j; ++i) g.b0(i) = bc.coefficients.draw(seq);
  const double p_edge =
      j > 1 ? bc.degree / static_cast<double>(j - 1) : 0.0;
  for (int child = 1; child < j; ++child) {
    for (int parent = 0; parent < child; ++parent) {
      if (seq.next_uniform01() < p_edge) {
        g.B1(child, parent) = bc.coefficients.draw(seq);
      }
    }
  }
  for (int k = 0; k < confounders; ++k) {
    const int a = static_cast<int>(seq.next_below(j));
    int b = j > 1 ? static_cast<int>(seq.next_below(j - 1)) : a;
    if (b >= a) ++b;
    g.B2(a, j + k) = bc.coefficients.draw(seq);
    if (b < j) g.B2(b, j + k) = bc.coefficients.draw(seq);
  }
  g.validate();
  return g;
}

/// Scores from one (round, n) run. NA correlation difference means fewer than
/// two variables stayed unconditioned.
struct BenchRound {
  bool infeasible = false;
  double unique_pct = kNa;
  double z_mean = kNa;
  double z_sd = kNa;
  double ks = kNa;
  double cor_diff = kNa;
  double seconds = kNa;
};

/// Aggregated scores for one (case, n): means across completed rounds, with
/// min and max for the two standardized statistics.
struct BenchRow {
  std::string case_name;
  size_t n = 0;
  int rounds_completed = 0;
  int rounds_infeasible = 0;
  double unique_pct = kNa;
  double z_mean = kNa;
  double z_mean_min = kNa;
  double z_mean_max = kNa;
  double z_sd = kNa;
  double z_sd_min = kNa;
  double z_sd_max = kNa;
  double ks = kNa;
  double cor_diff = kNa;
  double seconds_per_round = kNa;
};

struct BenchReport {
  std::string settings;
  std::vector<BenchRow> rows;
  std::vector<std::vector<BenchRound>> rounds;  // [n grid index][round]
};

namespace detail {

/// First `take` entries of a random permutation of {0, ..., count-1}.
inline std::vector<int> draw_without_replacement(int count, int take,
                                                 rng::Sequence& seq) {
  std::vector<int> pool(count);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < take; ++i) {
    const int swap_with =
        i + static_cast<int>(seq.next_below(static_cast<std::uint64_t>(count - i)));
    std::swap(pool[i], pool[swap_with]);
  }
  pool.resize(take);
  return pool;
}

}  // namespace detail

/// Runs every round of a case across its n grid. Each round draws a fresh
/// model, picks the conditioning set, an evaluation variable, and a
/// correlation pair uniformly, reads condition values off one simulated row,
/// and compares the particle sample with the closed-form conditional law.
/// Rounds whose evidence defeats the sampler are counted and excluded.
inline BenchReport run_case(const BenchCase& bc,
                            const ConditioningOptions& opts = {}) {
  bc.validate();
  BenchReport rep;
  rep.settings = bc.settings_note();
  rep.rounds.assign(bc.n_grid.size(),
                    std::vector<BenchRound>(static_cast<size_t>(bc.rounds)));

  for (int r = 0; r < bc.rounds; ++r) {
    const std::uint64_t round_key =
        rng::derive(bc.seed, "round:" + std::to_string(r));
    const GaussianScm g =
        random_gaussian_scm(bc, rng::derive(round_key, "model"));
    const Scm scm = to_scm(g);

    // A full random permutation: the first entries become the conditioning
    // set and everything after stays free for evaluation.
    rng::Sequence pick(rng::derive(round_key, "choose"));
    const std::vector<int> chosen =
        detail::draw_without_replacement(bc.v_count, bc.v_count, pick);
    const std::vector<int> cond_idx(chosen.begin(),
                                    chosen.begin() + bc.conditions);
    const std::vector<int> free_idx(chosen.begin() + bc.conditions,
                                    chosen.end());
    const int eval_idx =
        free_idx[pick.next_below(free_idx.size())];
    int pair_a = -1, pair_b = -1;
    if (free_idx.size() >= 2) {
      const auto pair = detail::draw_without_replacement(
          static_cast<int>(free_idx.size()), 2, pick);
      pair_a = free_idx[pair[0]];
      pair_b = free_idx[pair[1]];
    }

    // Evidence values come from the model's own joint, so they are always
    // attainable (if not always easy for the importance sampler).
    std::vector<Condition> conditions;
    std::map<std::string, double> fixed;
    if (bc.conditions > 0) {
      const ParticleTable one =
          simulate(scm, 1, rng::derive(round_key, "evidence"));
      for (int ci : cond_idx) {
        const std::string& nm = g.v_names[static_cast<size_t>(ci)];
        const double value = one.col(nm)[0];
        conditions.push_back({nm, value});
        fixed[nm] = value;
      }
    }

    const GaussianDist truth =
        bc.conditions > 0 ? condition(g, fixed) : marginal(g);
    const std::string& eval_name = g.v_names[static_cast<size_t>(eval_idx)];
    const double mu = truth.mean_of(eval_name);
    const double sd = std::sqrt(truth.var_of(eval_name));
    if (!(sd > 0.0)) {
      throw ModelError("conditional SD of '" + eval_name +
                       "' is not positive; evidence is degenerate");
    }
    double rho = kNa;
    if (pair_a >= 0) {
      rho = truth.correlation_of(g.v_names[static_cast<size_t>(pair_a)],
                                 g.v_names[static_cast<size_t>(pair_b)]);
    }

    for (size_t gi = 0; gi < bc.n_grid.size(); ++gi) {
      const size_t n = bc.n_grid[gi];
      BenchRound& out = rep.rounds[gi][static_cast<size_t>(r)];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const ParticleTable t =
            bc.conditions > 0
                ? simulate_multiple_conditions(
                      scm, n, conditions,
                      rng::derive(round_key, "n:" + std::to_string(n)), opts)
                : simulate(scm, n,
                           rng::derive(round_key, "n:" + std::to_string(n)),
                           nullptr, opts.threads);
        const std::vector<double>& x = t.col(eval_name);
        std::vector<double> z(x.size());
        for (size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mu) / sd;
        out.z_mean = mean(z);
        out.z_sd = stdev(z);
        out.ks = ks_statistic(
            x, [&](double v) { return norm_cdf((v - mu) / sd); });
        out.unique_pct = 100.0 * unique_row_fraction(t, g.v_names);
        if (pair_a >= 0 && !is_na(rho)) {
          const double rs =
              correlation(t.col(g.v_names[static_cast<size_t>(pair_a)]),
                          t.col(g.v_names[static_cast<size_t>(pair_b)]));
          if (!is_na(rs)) out.cor_diff = rs - rho;
        }
      } catch (const InfeasibleEvidenceError&) {
        out.infeasible = true;
      }
      const auto t1 = std::chrono::steady_clock::now();
      out.seconds = std::chrono::duration<double>(t1 - t0).count();
    }
  }

  for (size_t gi = 0; gi < bc.n_grid.size(); ++gi) {
    BenchRow row;
    row.case_name = bc.name;
    row.n = bc.n_grid[gi];
    std::vector<double> uniq, zm, zs, ks, cd, secs;
    for (const BenchRound& out : rep.rounds[gi]) {
      if (out.infeasible) {
        ++row.rounds_infeasible;
        continue;
      }
      ++row.rounds_completed;
      uniq.push_back(out.unique_pct);
      zm.push_back(out.z_mean);
      zs.push_back(out.z_sd);
      ks.push_back(out.ks);
      secs.push_back(out.seconds);
      if (!is_na(out.cor_diff)) cd.push_back(out.cor_diff);
    }
    if (row.rounds_completed > 0) {
      row.unique_pct = mean(uniq);
      row.z_mean = mean(zm);
      row.z_mean_min = *std::min_element(zm.begin(), zm.end());
      row.z_mean_max = *std::max_element(zm.begin(), zm.end());
      row.z_sd = mean(zs);
      row.z_sd_min = *std::min_element(zs.begin(), zs.end());
      row.z_sd_max = *std::max_element(zs.begin(), zs.end());
      row.ks = mean(ks);
      row.seconds_per_round = mean(secs);
      if (!cd.empty()) row.cor_diff = mean(cd);
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

/// The five stock settings, ordered from easy to hard. Rounds, the n grid,
/// and the seed keep their defaults; callers override them as needed.
inline std::vector<BenchCase> bench_presets() {
  std::vector<BenchCase> cases(5);
  cases[0].name = "A";
  cases[0].v_count = 5;
  cases[0].conditions = 1;
  cases[0].degree = 3.0;
  cases[0].confounder_ratio = 0.0;
  cases[1].name = "B";
  cases[1].v_count = 10;
  cases[1].conditions = 4;
  cases[1].degree = 5.0;
  cases[1].confounder_ratio = 1.0;
  cases[2].name = "C";
  cases[2].v_count = 10;
  cases[2].conditions = 9;
  cases[2].degree = 5.0;
  cases[2].confounder_ratio = 1.0;
  cases[3].name = "D";
  cases[3].v_count = 50;
  cases[3].conditions = 2;
  cases[3].degree = 5.0;
  cases[3].confounder_ratio = 1.0;
  cases[4].name = "E";
  cases[4].v_count = 50;
  cases[4].conditions = 9;
  cases[4].degree = 7.0;
  cases[4].confounder_ratio = 1.0;
  return cases;
}

inline BenchCase bench_preset(const std::string& name) {
  for (BenchCase& bc : bench_presets()) {
    if (bc.name == name) return std::move(bc);
  }
  throw ModelError("no benchmark preset named '" + name +
                   "' (stock cases are A, B, C, D, E)");
}

}  // namespace cfsim

#endif  // CFSIM_BENCH_HPP

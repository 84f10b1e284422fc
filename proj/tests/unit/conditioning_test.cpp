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

#include <cmath>
#include <numeric>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "cfsim/conditioning.hpp"
#include "cfsim/simulate.hpp"
#include "cfsim/stats.hpp"

using namespace cfsim;

namespace {

Scm one_var_model(const std::string& source, Monotonicity mono,
                  ErrorDist err = ErrorDist::normal(0, 1),
                  VarKind kind = VarKind::kContinuous) {
  ModelSpec spec;
  VariableSpec p;
  p.name = "p";
  p.error_dist = ErrorDist::normal(0, 1);
  p.expr = parse_expr("u");
  p.monotonicity = Monotonicity::kAdditive;
  spec.variables.push_back(std::move(p));
  VariableSpec v;
  v.name = "v";
  v.kind = kind;
  v.error_dist = err;
  v.expr = parse_expr(source);
  v.monotonicity = mono;
  spec.variables.push_back(std::move(v));
  return Scm::build(spec);
}

}  // namespace

TEST_CASE("resampling is unbiased for both schemes", "[conditioning][slow]") {
  // Fixed weighted population; over many resampling rounds the mean of the
  // drawn values must match the weighted mean within three standard errors.
  ParticleTable t;
  t.add_col("v", {0, 1, 2, 3, 4, 5, 6, 7});
  std::vector<double> w{0.05, 0.3, 0.02, 0.13, 0.2, 0.08, 0.12, 0.1};
  const double target = std::inner_product(w.begin(), w.end(),
                                           t.col("v").begin(), 0.0);
  for (ResampleScheme scheme :
       {ResampleScheme::kMultinomial, ResampleScheme::kSystematic}) {
    const int reps = 10000;
    const size_t draw = 16;
    std::vector<double> means;
    means.reserve(reps);
    for (int rep = 0; rep < reps; ++rep) {
      ParticleTable picked = resample(
          t, draw, w, scheme,
          rng::derive(rng::derive(1234, "unbiased"),
                      static_cast<std::uint64_t>(rep) * 2 +
                          (scheme == ResampleScheme::kSystematic)));
      means.push_back(mean(picked.col("v")));
    }
    const double grand = mean(means);
    const double se = stdev(means) / std::sqrt(static_cast<double>(reps));
    CAPTURE(static_cast<int>(scheme), grand, target, se);
    CHECK(std::fabs(grand - target) <= 3.0 * se);
  }
}

TEST_CASE("resampling occupancy diagnostics", "[conditioning]") {
  const size_t n = 5000;
  ParticleTable t;
  {
    std::vector<double> v(n);
    std::iota(v.begin(), v.end(), 0.0);
    t.add_col("v", std::move(v));
  }
  const std::vector<double> w(n, 1.0);
  // Equal-weight multinomial drawing keeps about 1 - 1/e of the rows.
  ParticleTable multi =
      resample(t, n, w, ResampleScheme::kMultinomial, 77);
  CHECK(multi.diag.unique_fraction ==
        Catch::Approx(1.0 - std::exp(-1.0)).margin(0.03));
  // Systematic resampling of equal weights is a permutation-free copy.
  ParticleTable sys = resample(t, n, w, ResampleScheme::kSystematic, 78);
  CHECK(sys.diag.unique_fraction == Catch::Approx(1.0));
  CHECK(unique_row_fraction(sys) == Catch::Approx(1.0));
}

TEST_CASE("resampled tables carry equal weights and ess", "[conditioning]") {
  ParticleTable t;
  t.add_col("v", {1, 2, 3, 4});
  std::vector<double> w{0.7, 0.1, 0.1, 0.1};
  ParticleTable picked = resample(t, 8, w, ResampleScheme::kMultinomial, 5);
  CHECK(picked.rows() == 8);
  CHECK(picked.weights.empty());  // equal weights after resampling
  CHECK(picked.diag.ess == Catch::Approx(effective_sample_size(w)));
}

TEST_CASE("root finding satisfies the declared tolerance", "[conditioning]") {
  // Randomized targets against three monotone shapes; every surviving row
  // must satisfy the condition to the root tolerance after re-derivation.
  struct Shape {
    const char* source;
    Monotonicity mono;
  };
  const std::vector<Shape> shapes = {
      {"2*p - 3 + u", Monotonicity::kAdditive},
      {"p + exp(0.7*u)", Monotonicity::kMonotonicGeneral},
      {"p + u^3 + 0.5*u", Monotonicity::kMonotonicGeneral},
  };
  rng::Sequence pick(904);
  for (const auto& shape : shapes) {
    const Scm m = one_var_model(shape.source, shape.mono);
    const ParticleTable prior = simulate(m, 64, pick.next_bits());
    for (int round = 0; round < 8; ++round) {
      const double c = prior.col("v")[pick.next_below(prior.rows())];
      ConditioningOptions opts;
      const ParticleTable t = simulate_continuous_condition(
          m, 512, {"v", c}, pick.next_bits(), opts);
      for (double got : t.col("v")) {
        CAPTURE(shape.source, c, got);
        REQUIRE(std::fabs(got - c) <= opts.root.tol_for(c));
      }
      cfsim_test::check_consistent(m, t);
    }
  }
}

TEST_CASE("a loose tolerance override is honored", "[conditioning]") {
  const Scm m = one_var_model("p + exp(0.7*u)", Monotonicity::kMonotonicGeneral);
  ConditioningOptions opts;
  opts.root.tol = 1e-3;
  const ParticleTable t = simulate_continuous_condition(m, 256, {"v", 2.0},
                                                        31, opts);
  for (double got : t.col("v")) REQUIRE(std::fabs(got - 2.0) <= 1e-3);
}

TEST_CASE("additive weights equal the error density at the residual",
          "[conditioning]") {
  // For v = g(parents) + u the particle weight is the density of u at
  // c - g(parents); with weighted_sample the normalized weights expose it.
  const Scm m = one_var_model("2*p - 3 + u", Monotonicity::kAdditive);
  const double c = -1.3;
  ConditioningOptions opts;
  opts.weighted_sample = true;
  const ParticleTable t =
      simulate_continuous_condition(m, 2000, {"v", c}, 47, opts);
  REQUIRE(t.weights.size() == t.rows());
  std::vector<double> want(t.rows());
  const ErrorDist err = ErrorDist::normal(0, 1);
  double total = 0.0;
  for (size_t r = 0; r < t.rows(); ++r) {
    want[r] = err.pdf(c - (2.0 * t.col("p")[r] - 3.0));
    total += want[r];
  }
  for (size_t r = 0; r < t.rows(); ++r) {
    CHECK(t.weights[r] == Catch::Approx(want[r] / total).margin(1e-9));
  }
}

TEST_CASE("general monotone weights divide by the map's slope",
          "[conditioning]") {
  // v = p + exp(b u): the root is u* = log(c - p)/b and the weight is
  // phi(u*) / (b (c - p)).
  const double b = 0.7;
  const Scm m = one_var_model("p + exp(0.7*u)", Monotonicity::kMonotonicGeneral);
  const double c = 2.4;
  ConditioningOptions opts;
  opts.weighted_sample = true;
  const ParticleTable t =
      simulate_continuous_condition(m, 2000, {"v", c}, 53, opts);
  const ErrorDist err = ErrorDist::normal(0, 1);
  std::vector<double> want(t.rows(), 0.0);
  double total = 0.0;
  for (size_t r = 0; r < t.rows(); ++r) {
    const double gap = c - t.col("p")[r];
    if (gap > 0.0) {
      const double u_star = std::log(gap) / b;
      want[r] = err.pdf(u_star) / (b * gap);
    }
    total += want[r];
  }
  REQUIRE(total > 0.0);
  for (size_t r = 0; r < t.rows(); ++r) {
    CAPTURE(r, t.col("p")[r]);
    CHECK(t.weights[r] == Catch::Approx(want[r] / total).margin(1e-6));
  }
}

TEST_CASE("rows without a root get weight zero and are reported",
          "[conditioning]") {
  // v = p + exp(u) can only reach values above p; aim below some parents.
  const Scm m = one_var_model("p + exp(u)", Monotonicity::kMonotonicGeneral);
  ConditioningOptions opts;
  opts.weighted_sample = true;
  const double c = 0.5;
  const ParticleTable t = simulate_continuous_condition(m, 4000, {"v", c},
                                                        61, opts);
  CHECK(t.diag.na_roots > 0);
  CHECK(t.diag.na_roots < t.rows());
  for (size_t r = 0; r < t.rows(); ++r) {
    if (t.col("p")[r] >= c) {
      CHECK(t.weights[r] == 0.0);
    }
  }
}

TEST_CASE("impossible continuous evidence raises with diagnostics",
          "[conditioning]") {
  const Scm m = one_var_model("p + exp(u)", Monotonicity::kMonotonicGeneral);
  try {
    simulate_continuous_condition(m, 500, {"v", -50.0}, 71);
    FAIL("expected InfeasibleEvidenceError");
  } catch (const InfeasibleEvidenceError& e) {
    CHECK(e.diagnostics().na_roots == 500);
    CHECK(e.diagnostics().condition.find("v") != std::string::npos);
    CHECK(e.diagnostics().observed_min > -50.0);
  }
}

TEST_CASE("discrete evidence keeps only matching rows", "[conditioning]") {
  const Scm m = one_var_model("bernoulli(u; logistic(p))",
                              Monotonicity::kNone,
                              ErrorDist::uniform(0, 1), VarKind::kDiscrete);
  const ParticleTable t = simulate_discrete_condition(m, 3000, {"v", 1.0}, 81);
  for (double got : t.col("v")) REQUIRE(got == 1.0);
  cfsim_test::check_consistent(m, t);
  // Survivors should over-represent parents that make v = 1 likely.
  CHECK(mean(t.col("p")) > 0.2);
}

TEST_CASE("impossible discrete evidence raises with the marginal",
          "[conditioning]") {
  const Scm m = one_var_model("bernoulli(u; logistic(p))",
                              Monotonicity::kNone,
                              ErrorDist::uniform(0, 1), VarKind::kDiscrete);
  try {
    simulate_discrete_condition(m, 500, {"v", 3.0}, 83);
    FAIL("expected InfeasibleEvidenceError");
  } catch (const InfeasibleEvidenceError& e) {
    CHECK(e.diagnostics().marginal.count(0.0) == 1);
    CHECK(e.diagnostics().marginal.count(1.0) == 1);
    CHECK(e.diagnostics().marginal.count(3.0) == 0);
  }
}

TEST_CASE("kind mismatch routes to a model error", "[conditioning]") {
  const Scm m = cfsim_test::chain_model();
  CHECK_THROWS_AS(simulate_discrete_condition(m, 100, {"y", 1.0}, 3),
                  ModelError);
  const Scm d = one_var_model("bernoulli(u; 0.5)", Monotonicity::kNone,
                              ErrorDist::uniform(0, 1), VarKind::kDiscrete);
  CHECK_THROWS_AS(simulate_continuous_condition(d, 100, {"v", 1.0}, 3),
                  ModelError);
}

TEST_CASE("conditioning requires a u-monotonic declaration", "[conditioning]") {
  const Scm m = one_var_model("p + u*u", Monotonicity::kNone);
  CHECK_THROWS_AS(simulate_continuous_condition(m, 100, {"v", 1.0}, 3),
                  ModelError);
  // Only maps that increase in the error term are invertible here; a
  // decreasing map is caught at bracketing time.
  const Scm d = one_var_model("p - u^3 - 0.5*u", Monotonicity::kMonotonicGeneral);
  CHECK_THROWS_WITH(simulate_continuous_condition(d, 100, {"v", 0.0}, 3),
                    Catch::Matchers::ContainsSubstring("decreases"));
}

TEST_CASE("conditional law matches the analytic posterior", "[conditioning]") {
  // In the chain model, conditioning on y = 1 gives
  // E[u_z] = 1/3, E[u_y] = 1/6, var(u_z) = 1/3, var(u_y) = 5/6,
  // cov(u_z, u_y) = -1/3.
  const Scm m = cfsim_test::chain_model();
  const ParticleTable t =
      simulate_continuous_condition(m, 60000, {"y", 1.0}, 97);
  CHECK(mean(t.col("u_z")) == Catch::Approx(1.0 / 3.0).margin(0.02));
  CHECK(mean(t.col("u_y")) == Catch::Approx(1.0 / 6.0).margin(0.02));
  CHECK(variance(t.col("u_z")) == Catch::Approx(1.0 / 3.0).margin(0.02));
  CHECK(variance(t.col("u_y")) == Catch::Approx(5.0 / 6.0).margin(0.03));
  CHECK(covariance(t.col("u_z"), t.col("u_y")) ==
        Catch::Approx(-1.0 / 3.0).margin(0.02));
  cfsim_test::check_consistent(m, t);
}

TEST_CASE("multiple conditions pin every conditioned column", "[conditioning]") {
  const Scm m = cfsim_test::chain_model();
  const std::vector<Condition> conds{{"z", 0.3}, {"y", 1.0}};
  const ParticleTable t = simulate_multiple_conditions(m, 4000, conds, 13);
  ConditioningOptions opts;
  for (size_t r = 0; r < t.rows(); ++r) {
    REQUIRE(std::fabs(t.col("z")[r] - 0.3) <= opts.root.tol_for(0.3));
    REQUIRE(std::fabs(t.col("y")[r] - 1.0) <= opts.root.tol_for(1.0));
  }
  cfsim_test::check_consistent(m, t);
  // Given z = 0.3 and y = 1: x + 0.3 + u_y = 1 with x = 0.3 + u_x, so
  // E[x | .] = 0.3 + E[u_x] where u_x | (u_x + u_y = 0.4) has mean 0.2.
  CHECK(mean(t.col("x")) == Catch::Approx(0.5).margin(0.03));
}

TEST_CASE("condition stage order is topological regardless of input order",
          "[conditioning]") {
  const Scm m = cfsim_test::chain_model();
  const std::vector<Condition> a{{"y", 1.0}, {"z", 0.3}};
  const std::vector<Condition> b{{"z", 0.3}, {"y", 1.0}};
  const ParticleTable ta = simulate_multiple_conditions(m, 2000, a, 29);
  const ParticleTable tb = simulate_multiple_conditions(m, 2000, b, 29);
  for (const auto& name : ta.names()) {
    const auto& ca = ta.col(name);
    const auto& cb = tb.col(name);
    bool same = true;
    for (size_t r = 0; r < ta.rows(); ++r) same = same && ca[r] == cb[r];
    CAPTURE(name);
    CHECK(same);
  }
}

TEST_CASE("duplicate or unknown conditions are rejected", "[conditioning]") {
  const Scm m = cfsim_test::chain_model();
  CHECK_THROWS_AS(
      simulate_multiple_conditions(m, 100, {{"y", 1.0}, {"y", 2.0}}, 1),
      ModelError);
  CHECK_THROWS_AS(simulate_multiple_conditions(m, 100, {{"ghost", 1.0}}, 1),
                  ModelError);
  CHECK_THROWS_AS(simulate_multiple_conditions(m, 100, {}, 1), ModelError);
  CHECK_THROWS_AS(
      simulate_continuous_condition(m, 100, {"y", kNa}, 1), ModelError);
}

TEST_CASE("conditioning results are independent of thread count",
          "[conditioning]") {
  const Scm m = cfsim_test::chain_model();
  ConditioningOptions one;
  one.threads = 1;
  ConditioningOptions four;
  four.threads = 4;
  const ParticleTable a =
      simulate_continuous_condition(m, 3000, {"y", 1.0}, 307, one);
  const ParticleTable b =
      simulate_continuous_condition(m, 3000, {"y", 1.0}, 307, four);
  for (const auto& name : a.names()) {
    const auto& ca = a.col(name);
    const auto& cb = b.col(name);
    bool same = true;
    for (size_t r = 0; r < a.rows(); ++r) same = same && ca[r] == cb[r];
    CAPTURE(name);
    CHECK(same);
  }
}

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

#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "cfsim/format.hpp"
#include "cfsim/simulate.hpp"
#include "cfsim/stats.hpp"

using namespace cfsim;

TEST_CASE("simulation is deterministic in the seed", "[simulate]") {
  const Scm m = cfsim_test::chain_model();
  const ParticleTable a = simulate(m, 256, 11);
  const ParticleTable b = simulate(m, 256, 11);
  const ParticleTable c = simulate(m, 256, 12);
  REQUIRE(a.rows() == b.rows());
  bool equal = true, differs = false;
  for (const auto& name : a.names()) {
    for (size_t r = 0; r < a.rows(); ++r) {
      equal = equal && a.col(name)[r] == b.col(name)[r];
      differs = differs || a.col(name)[r] != c.col(name)[r];
    }
  }
  CHECK(equal);
  CHECK(differs);
}

TEST_CASE("thread count never changes the draw", "[simulate]") {
  const Scm m = cfsim_test::chain_model();
  const ParticleTable one = simulate(m, 999, 3, nullptr, 1);
  for (int threads : {2, 3, 8}) {
    const ParticleTable many = simulate(m, 999, 3, nullptr, threads);
    for (const auto& name : one.names()) {
      const auto& a = one.col(name);
      const auto& b = many.col(name);
      bool same = true;
      for (size_t r = 0; r < one.rows(); ++r) same = same && a[r] == b[r];
      CAPTURE(threads, name);
      CHECK(same);
    }
  }
}

TEST_CASE("chain moments match the closed form", "[simulate]") {
  // var z = 1, var x = 2, var y = var(2z + u_x + u_y) ... x + z = 2z + u_x,
  // so var y = 4 + 1 + 1 = 6, cov(z, y) = 2, cov(x, y) = 3.
  const Scm m = cfsim_test::chain_model();
  const ParticleTable t = simulate(m, 200000, 21);
  CHECK(mean(t.col("y")) == Catch::Approx(0.0).margin(0.03));
  CHECK(variance(t.col("z")) == Catch::Approx(1.0).margin(0.03));
  CHECK(variance(t.col("x")) == Catch::Approx(2.0).margin(0.05));
  CHECK(variance(t.col("y")) == Catch::Approx(6.0).margin(0.15));
  CHECK(covariance(t.col("z"), t.col("y")) == Catch::Approx(2.0).margin(0.05));
  CHECK(covariance(t.col("x"), t.col("y")) == Catch::Approx(3.0).margin(0.12));
}

TEST_CASE("frozen columns are copied, the rest redrawn", "[simulate]") {
  const Scm m = cfsim_test::chain_model();
  ParticleTable base = simulate(m, 500, 7);
  ParticleTable frozen = base.select_cols({"u_z", "u_x"});
  const ParticleTable redo = simulate(m, 500, 8, &frozen);
  bool u_y_differs = false;
  for (size_t r = 0; r < redo.rows(); ++r) {
    CHECK(redo.col("u_z")[r] == base.col("u_z")[r]);
    CHECK(redo.col("x")[r] == Catch::Approx(base.col("x")[r]));
    u_y_differs = u_y_differs || redo.col("u_y")[r] != base.col("u_y")[r];
  }
  CHECK(u_y_differs);
  cfsim_test::check_consistent(m, redo);
}

TEST_CASE("simulated tables satisfy their structural equations", "[simulate]") {
  const Scm credit = load_model(cfsim_test::model_path("credit.json"));
  const ParticleTable t = simulate(credit, 400, 19);
  cfsim_test::check_consistent(credit, t);
}

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
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "cfsim/counterfactual.hpp"
#include "cfsim/math.hpp"
#include "cfsim/stats.hpp"
#include "cfsim/table.hpp"

using namespace cfsim;

TEST_CASE("moment helpers against hand values", "[stats]") {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{2, 4, 6, 9};
  CHECK(mean(x) == 2.5);
  CHECK(variance(x) == Catch::Approx(5.0 / 3.0));
  CHECK(stdev(x) == Catch::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(covariance(x, y) == Catch::Approx(23.0 / 6.0));
  CHECK(correlation(x, x) == Catch::Approx(1.0));
  CHECK(correlation(x, y) == Catch::Approx(covariance(x, y) /
                                           (stdev(x) * stdev(y))));
}

TEST_CASE("correlation degenerates to NA for constant input", "[stats]") {
  const std::vector<double> c{3, 3, 3};
  const std::vector<double> x{1, 2, 3};
  CHECK(is_na(correlation(c, x)));
  CHECK(is_na(correlation(x, c)));
}

TEST_CASE("weighted moments reduce to plain ones for equal weights", "[stats]") {
  const std::vector<double> x{1.5, -2, 0.25, 7, 3};
  const std::vector<double> w(5, 0.2);
  CHECK(weighted_mean(x, w) == Catch::Approx(mean(x)));
}

TEST_CASE("effective sample size closed forms", "[stats]") {
  CHECK(effective_sample_size({1, 1, 1, 1}) == Catch::Approx(4.0));
  CHECK(effective_sample_size({5, 5}) == Catch::Approx(2.0));
  // One dominant particle: (sum w)^2 / sum w^2 -> 1.
  CHECK(effective_sample_size({1, 0, 0, 0}) == Catch::Approx(1.0));
  // Half the particles carry all mass.
  CHECK(effective_sample_size({1, 1, 0, 0}) == Catch::Approx(2.0));
}

TEST_CASE("ks statistic on an exact grid", "[stats]") {
  // The empirical CDF of {0.5/n, 1.5/n, ...} vs U(0,1) attains exactly 0.5/n.
  const size_t n = 10;
  std::vector<double> sample;
  for (size_t i = 0; i < n; ++i) {
    sample.push_back((static_cast<double>(i) + 0.5) / static_cast<double>(n));
  }
  auto unif = [](double x) { return x; };
  CHECK(ks_statistic(sample, unif) == Catch::Approx(0.05).margin(1e-12));
}

TEST_CASE("ks statistic detects a location shift", "[stats]") {
  std::vector<double> sample;
  rng::Sequence seq(31);
  for (int i = 0; i < 4000; ++i) {
    sample.push_back(norm_quantile(seq.next_uniform01()) + 0.5);
  }
  const double d = ks_statistic(sample, [](double x) { return norm_cdf(x); });
  CHECK(d > 0.15);  // true offset gives ~0.19
  const double centered =
      ks_statistic(sample, [](double x) { return norm_cdf(x - 0.5); });
  CHECK(centered < 0.03);
}

TEST_CASE("unique row fraction counts bit-identical rows once", "[table]") {
  ParticleTable t;
  t.add_col("a", {1.0, 1.0, 2.0, 2.0, 3.0});
  t.add_col("b", {0.5, 0.5, 0.5, 0.7, 0.5});
  // Rows: (1,.5) twice, (2,.5), (2,.7), (3,.5) -> 4 distinct of 5.
  CHECK(unique_row_fraction(t) == Catch::Approx(0.8));
  // Restricted to column b there are two distinct values.
  CHECK(unique_row_fraction(t, {"b"}) == Catch::Approx(0.4));
}

TEST_CASE("unique row fraction handles NA and empty tables", "[table]") {
  ParticleTable t;
  t.add_col("a", {kNa, kNa, 1.0});
  CHECK(unique_row_fraction(t) == Catch::Approx(2.0 / 3.0));
  ParticleTable empty;
  CHECK(is_na(unique_row_fraction(empty)));
}

TEST_CASE("select and reorder preserve column data", "[table]") {
  ParticleTable t;
  t.add_col("a", {1, 2, 3});
  t.add_col("b", {4, 5, 6});
  t.add_col("c", {7, 8, 9});
  ParticleTable s = t.select_cols({"c", "a"});
  CHECK(s.names() == std::vector<std::string>{"c", "a"});
  CHECK(s.col("c") == std::vector<double>{7, 8, 9});
  ParticleTable r = t.select_rows({2, 0, 0});
  CHECK(r.col("b") == std::vector<double>{6, 4, 4});
}

TEST_CASE("quantile interpolation on a known vector", "[stats]") {
  const std::vector<double> x{10, 20, 30, 40, 50};
  CHECK(quantile(x, 0.0) == 10.0);
  CHECK(quantile(x, 1.0) == 50.0);
  CHECK(quantile(x, 0.5) == 30.0);
  CHECK(quantile(x, 0.25) == 20.0);
  CHECK(quantile(x, 0.1) == Catch::Approx(14.0));  // 10 + 0.4 * (20 - 10)
}

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

#include "helpers.hpp"
#include "cfsim/predictor.hpp"

using namespace cfsim;

namespace {

ParticleTable small_table() {
  ParticleTable t;
  t.add_col("age", {20, 40, 60});
  t.add_col("income", {1000, 2000, 4000});
  return t;
}

}  // namespace

TEST_CASE("expression predictors evaluate row by row", "[predictor]") {
  ExpressionPredictor pred("logistic(0.1*age - log(income/1000))");
  const ParticleTable t = small_table();
  const std::vector<double> out = pred.predict(t);
  REQUIRE(out.size() == 3);
  for (size_t r = 0; r < 3; ++r) {
    const double want = 1.0 / (1.0 + std::exp(-(0.1 * t.col("age")[r] -
                                                std::log(t.col("income")[r] /
                                                         1000.0))));
    CHECK(out[r] == Catch::Approx(want).margin(1e-12));
  }
  CHECK(pred.inputs() == std::set<std::string>{"age", "income"});
  CHECK(pred.describe().find("logistic") != std::string::npos);
}

TEST_CASE("expression predictors reject bad inputs", "[predictor]") {
  // The error symbol is reserved for structural equations.
  CHECK_THROWS_AS(ExpressionPredictor("u + 1"), PredictorError);
  // Syntax errors surface as parse errors.
  CHECK_THROWS_AS(ExpressionPredictor("age +"), ParseError);
  // A referenced column must exist in the audited table.
  ExpressionPredictor pred("age + savings");
  const ParticleTable t = small_table();
  CHECK_THROWS_WITH(pred.predict(t),
                    Catch::Matchers::ContainsSubstring("savings"));
}

TEST_CASE("command predictors speak CSV in, lines out", "[predictor]") {
  // Double the second input column (the header line is skipped).
  SubprocessPredictor pred("awk -F, 'NR>1 {print 2*$2}'");
  const std::vector<double> out = pred.predict(small_table());
  REQUIRE(out.size() == 3);
  CHECK(out[0] == 2000.0);
  CHECK(out[1] == 4000.0);
  CHECK(out[2] == 8000.0);
}

TEST_CASE("command predictors must answer one line per row", "[predictor]") {
  SubprocessPredictor silent("cat > /dev/null");
  CHECK_THROWS_WITH(silent.predict(small_table()),
                    Catch::Matchers::ContainsSubstring("0 predictions"));
  SubprocessPredictor chatty("awk -F, 'NR>1 {print 1; print 2}'");
  CHECK_THROWS_WITH(chatty.predict(small_table()),
                    Catch::Matchers::ContainsSubstring("6 predictions"));
}

TEST_CASE("command predictor failures are reported", "[predictor]") {
  SubprocessPredictor failing("cat > /dev/null; exit 3");
  CHECK_THROWS_WITH(failing.predict(small_table()),
                    Catch::Matchers::ContainsSubstring("status 3"));
  SubprocessPredictor junk("awk -F, 'NR>1 {print \"spam\"}'");
  CHECK_THROWS_WITH(junk.predict(small_table()),
                    Catch::Matchers::ContainsSubstring("non-numeric"));
  SubprocessOptions opts;
  opts.timeout_seconds = 0.2;
  SubprocessPredictor slow("sleep 5", opts);
  CHECK_THROWS_WITH(slow.predict(small_table()),
                    Catch::Matchers::ContainsSubstring("timeout"));
  CHECK_THROWS_AS(SubprocessPredictor(""), PredictorError);
  opts.timeout_seconds = 0.0;
  CHECK_THROWS_AS(SubprocessPredictor("true", opts), PredictorError);
}

TEST_CASE("nondeterministic commands are refused", "[predictor]") {
  // The shell pid changes on every invocation, so the repeat check trips.
  ParticleTable t;
  t.add_col("x", std::vector<double>{1.0});
  SubprocessPredictor pred("cat > /dev/null; echo $$");
  CHECK_THROWS_WITH(pred.predict(t),
                    Catch::Matchers::ContainsSubstring("not deterministic"));
  // With the check disabled the same command is accepted.
  SubprocessOptions opts;
  opts.verify_determinism = false;
  SubprocessPredictor loose("cat > /dev/null; echo $$", opts);
  CHECK(loose.predict(t).size() == 1);
}

TEST_CASE("determinism is verified once, not per call", "[predictor]") {
  // A stateful command that changes its answer between calls would fail the
  // first predict(); a clean command pays the double evaluation only once.
  SubprocessPredictor pred("awk -F, 'NR>1 {print $1}'");
  const ParticleTable t = small_table();
  const std::vector<double> first = pred.predict(t);
  const std::vector<double> second = pred.predict(t);
  CHECK(first == second);
}

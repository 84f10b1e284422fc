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

#include <cstdio>
#include <fstream>
#include <set>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "cfsim/format.hpp"

using namespace cfsim;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path("/tmp/cfsim_format_" + name) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("model files round trip", "[format]") {
  const json j = json::parse(R"json({
    "format_version": 1,
    "background": [{"name": "h", "dist": "normal(0, 2)"}],
    "variables": [
      {"name": "a", "error": "uniform(0, 1)", "expr": "h + u",
       "monotonic": "additive"},
      {"name": "b", "kind": "discrete", "error": "uniform(0, 1)",
       "expr": "bernoulli(u; logistic(a))"},
      {"name": "c", "error": "normal(0, 1)", "expr": "exp(b + 0.5*u)",
       "monotonic": "general"}
    ]
  })json");
  const ModelSpec spec = parse_model_json(j);
  REQUIRE(spec.background.size() == 1);
  CHECK(spec.background[0].name == "h");
  CHECK(spec.background[0].dist.str() == "normal(0, 2)");
  REQUIRE(spec.variables.size() == 3);
  CHECK(spec.variables[0].kind == VarKind::kContinuous);
  CHECK(spec.variables[0].monotonicity == Monotonicity::kAdditive);
  CHECK(spec.variables[1].kind == VarKind::kDiscrete);
  CHECK(spec.variables[1].monotonicity == Monotonicity::kNone);
  CHECK(spec.variables[2].monotonicity == Monotonicity::kMonotonicGeneral);
  CHECK(print_expr(*spec.variables[0].expr) == "h + u");
  CHECK_NOTHROW(Scm::build(parse_model_json(j)));
}

TEST_CASE("model files are validated field by field", "[format]") {
  json j = json::parse(R"json({"variables": []})json");
  CHECK_THROWS_AS(parse_model_json(j), IoError);  // no format_version

  j = json::parse(R"json({"format_version": 2, "variables": []})json");
  CHECK_THROWS_AS(parse_model_json(j), IoError);

  j = json::parse(R"json({"format_version": "1", "variables": []})json");
  CHECK_THROWS_AS(parse_model_json(j), IoError);

  j = json::parse(R"json({"format_version": 1, "variables": []})json");
  CHECK_THROWS_WITH(parse_model_json(j),
                    Catch::Matchers::ContainsSubstring("nonempty"));

  j = json::parse(R"json({"format_version": 1,
    "variables": [{"name": "a", "error": "gamma(1)", "expr": "u"}]})json");
  CHECK_THROWS_AS(parse_model_json(j), ModelError);  // unknown distribution

  j = json::parse(R"json({"format_version": 1,
    "variables": [{"name": "a", "error": "normal(0, 1)", "expr": "u +"}]})json");
  CHECK_THROWS_WITH(parse_model_json(j),
                    Catch::Matchers::ContainsSubstring("in expression for 'a'"));

  j = json::parse(R"json({"format_version": 1,
    "variables": [{"name": "a", "error": "normal(0, 1)", "expr": "u",
                   "monotonic": "sometimes"}]})json");
  CHECK_THROWS_AS(parse_model_json(j), IoError);

  j = json::parse(R"json({"format_version": 1,
    "variables": [{"name": "a", "kind": "fuzzy", "error": "normal(0, 1)",
                   "expr": "u"}]})json");
  CHECK_THROWS_AS(parse_model_json(j), IoError);

  j = json::parse(R"json({"format_version": 1, "background": "h",
    "variables": [{"name": "a", "error": "normal(0, 1)", "expr": "u"}]})json");
  CHECK_THROWS_AS(parse_model_json(j), IoError);
}

TEST_CASE("query files round trip", "[format]") {
  const json j = json::parse(R"json({
    "format_version": 1,
    "conditions": {"y": 1.0, "z": 0.25},
    "intervention": {"x": -1.0},
    "targets": ["y", "z"],
    "n": 5000,
    "seed": 17
  })json");
  const CounterfactualQuery q = parse_query_json(j);
  REQUIRE(q.conditions.size() == 2);
  std::set<std::string> cond_vars;
  for (const auto& c : q.conditions) cond_vars.insert(c.variable);
  CHECK(cond_vars == std::set<std::string>{"y", "z"});
  CHECK(q.intervention.assignments.at("x") == -1.0);
  CHECK(q.targets == std::vector<std::string>{"y", "z"});
  CHECK(q.n == 5000);
  CHECK(q.seed == 17);
  CHECK(q.prune);

  // Conditions and intervention are optional; targets are not.
  const CounterfactualQuery bare = parse_query_json(json::parse(
      R"json({"format_version": 1, "targets": ["y"]})json"));
  CHECK(bare.conditions.empty());
  CHECK(bare.intervention.empty());
  CHECK(bare.n == 10000);
}

TEST_CASE("query files are validated field by field", "[format]") {
  CHECK_THROWS_AS(parse_query_json(json::parse(
                      R"json({"format_version": 1})json")),
                  IoError);
  CHECK_THROWS_AS(parse_query_json(json::parse(
                      R"json({"format_version": 1, "targets": []})json")),
                  IoError);
  CHECK_THROWS_AS(parse_query_json(json::parse(
                      R"json({"format_version": 1, "targets": [3]})json")),
                  IoError);
  CHECK_THROWS_AS(parse_query_json(json::parse(
                      R"json({"format_version": 1, "targets": ["y"],
                              "conditions": ["y"]})json")),
                  IoError);
  CHECK_THROWS_AS(parse_query_json(json::parse(
                      R"json({"format_version": 1, "targets": ["y"],
                              "conditions": {"y": "one"}})json")),
                  IoError);
  CHECK_THROWS_AS(parse_query_json(json::parse(
                      R"json({"format_version": 1, "targets": ["y"],
                              "seed": 1.5})json")),
                  IoError);
}

TEST_CASE("predictor declarations", "[format]") {
  PredictorSpec spec = parse_predictor_json(json::parse(
      R"json({"type": "expression", "source": "2*w + 1"})json"));
  CHECK(spec.kind == PredictorSpec::Kind::kExpression);
  CHECK(spec.text == "2*w + 1");
  CHECK(spec.make()->describe().find("2*w + 1") != std::string::npos);

  spec = parse_predictor_json(json::parse(
      R"json({"type": "command", "command": "awk -F, 'NR>1 {print 1}'",
              "timeout_seconds": 5})json"));
  CHECK(spec.kind == PredictorSpec::Kind::kCommand);
  CHECK(spec.subprocess.timeout_seconds == 5.0);
  CHECK(spec.make()->describe().find("awk") != std::string::npos);

  CHECK_THROWS_AS(parse_predictor_json(json::parse(
                      R"json({"type": "oracle"})json")),
                  IoError);
  CHECK_THROWS_AS(parse_predictor_json(json::parse(
                      R"json({"type": "expression"})json")),
                  IoError);
}

TEST_CASE("fairness files round trip", "[format]") {
  const json j = json::parse(R"json({
    "format_version": 1,
    "outcome": "y",
    "sensitive": [{"name": "s", "values": [0, 1]},
                  {"name": "e", "values": [1, 2, 3]}],
    "mode": "kusner",
    "n": 250,
    "seed": 4,
    "cases": 12,
    "predictor": {"type": "expression", "source": "w"}
  })json");
  const FairnessFile file = parse_fairness_json(j);
  CHECK(file.audit.outcome == "y");
  REQUIRE(file.audit.sensitive.size() == 2);
  CHECK(file.audit.sensitive[1].values == std::vector<double>{1, 2, 3});
  CHECK(file.audit.mode == FairnessMode::kKusner);
  CHECK(file.audit.n == 250);
  CHECK(file.audit.seed == 4);
  CHECK(file.sample);
  CHECK(file.case_count == 12);

  const FairnessFile listed = parse_fairness_json(json::parse(R"json({
    "format_version": 1,
    "outcome": "y",
    "sensitive": [{"name": "s", "values": [0, 1]}],
    "cases": [{"w": {"w": 0.4}, "c": {"s": 1, "x": 0.2}},
              {"w": {"w": -1.0}, "c": {}}],
    "predictor": {"type": "expression", "source": "w"}
  })json"));
  CHECK(listed.audit.mode == FairnessMode::kDefinition5);
  CHECK_FALSE(listed.sample);
  REQUIRE(listed.cases.size() == 2);
  CHECK(listed.cases[0].w_conditions[0].variable == "w");
  CHECK(listed.cases[0].c_conditions.size() == 2);
  CHECK(listed.cases[1].c_conditions.empty());
}

TEST_CASE("fairness files are validated field by field", "[format]") {
  const char* base = R"json({
    "format_version": 1,
    "outcome": "y",
    "sensitive": [{"name": "s", "values": [0, 1]}],
    "cases": 5,
    "predictor": {"type": "expression", "source": "w"}
  })json";
  json j = json::parse(base);
  j.erase("outcome");
  CHECK_THROWS_AS(parse_fairness_json(j), IoError);

  j = json::parse(base);
  j["sensitive"] = json::array();
  CHECK_THROWS_AS(parse_fairness_json(j), IoError);

  j = json::parse(base);
  j["sensitive"][0]["values"] = json::array();
  CHECK_THROWS_AS(parse_fairness_json(j), IoError);

  j = json::parse(base);
  j["mode"] = "strict";
  CHECK_THROWS_AS(parse_fairness_json(j), IoError);

  j = json::parse(base);
  j["cases"] = "ten";
  CHECK_THROWS_AS(parse_fairness_json(j), IoError);

  j = json::parse(base);
  j.erase("predictor");
  CHECK_THROWS_AS(parse_fairness_json(j), IoError);
}

TEST_CASE("benchmark files accept presets and custom cases", "[format]") {
  const json j = json::parse(R"json({
    "format_version": 1,
    "cases": ["A",
              {"name": "tiny", "variables": 4, "conditions": 1,
               "degree": 2.0, "confounders_per_variable": 0.5,
               "coefficient_min": 0.2, "coefficient_max": 1.5}],
    "rounds": 7,
    "n": [100, 200],
    "seed": 21
  })json");
  const std::vector<BenchCase> cases = parse_bench_json(j);
  REQUIRE(cases.size() == 2);
  CHECK(cases[0].name == "A");
  CHECK(cases[0].v_count == 5);
  CHECK(cases[1].name == "tiny");
  CHECK(cases[1].v_count == 4);
  CHECK(cases[1].coefficients.min_magnitude == 0.2);
  CHECK(cases[1].coefficients.max_magnitude == 1.5);
  for (const BenchCase& bc : cases) {
    CHECK(bc.rounds == 7);
    CHECK(bc.n_grid == std::vector<size_t>{100, 200});
    CHECK(bc.seed == 21);
  }

  CHECK_THROWS_AS(parse_bench_json(json::parse(
                      R"json({"format_version": 1, "cases": ["Z"]})json")),
                  ModelError);
  CHECK_THROWS_AS(parse_bench_json(json::parse(
                      R"json({"format_version": 1, "cases": []})json")),
                  IoError);
  CHECK_THROWS_AS(parse_bench_json(json::parse(
                      R"json({"format_version": 1, "cases": ["A"],
                              "n": 100})json")),
                  IoError);
  // File-level overrides go through the same validation as the case itself.
  CHECK_THROWS_AS(parse_bench_json(json::parse(
                      R"json({"format_version": 1, "cases": ["A"],
                              "rounds": 0})json")),
                  ModelError);
}

TEST_CASE("files load from disk with honest errors", "[format]") {
  const TempFile good("model.json", R"json({
    "format_version": 1,
    "variables": [{"name": "a", "error": "normal(0, 1)", "expr": "u",
                   "monotonic": "additive"}]
  })json");
  const Scm m = load_model(good.path);
  CHECK(m.num_vars() == 1);

  CHECK_THROWS_WITH(load_model("/tmp/cfsim_format_missing.json"),
                    Catch::Matchers::ContainsSubstring("cannot open"));

  const TempFile junk("junk.json", "{ not json");
  CHECK_THROWS_WITH(load_model(junk.path),
                    Catch::Matchers::ContainsSubstring("not valid JSON"));

  const TempFile list("list.json", "[1, 2, 3]");
  CHECK_THROWS_WITH(load_model(list.path),
                    Catch::Matchers::ContainsSubstring("JSON object"));
}

TEST_CASE("the bundled chain model matches its published law", "[format]") {
  const Scm m = load_model(cfsim_test::model_path("chain.json"));
  REQUIRE(m.num_vars() == 3);
  CHECK(m.background().empty());
  for (const auto& v : m.variables()) {
    CHECK(v.kind == VarKind::kContinuous);
    CHECK(v.monotonicity == Monotonicity::kAdditive);
    CHECK(v.error_dist.str() == "normal(0, 1)");
  }
  const CounterfactualQuery q =
      load_query(cfsim_test::model_path("chain_query.json"));
  CHECK(q.conditions.size() == 1);
  CHECK(q.intervention.assignments.at("x") == -1.0);
  CHECK(q.targets == std::vector<std::string>{"y"});
  CHECK(q.n == 100000);
}

TEST_CASE("the bundled credit model declares the documented structure",
          "[format]") {
  const Scm m = load_model(cfsim_test::model_path("credit.json"));
  CHECK(m.num_vars() == 14);
  REQUIRE(m.background().size() == 5);
  CHECK(m.background()[0].name == "u1");

  // Gender affects repayment only through mediators; ethnicity is a direct
  // parent of the outcome.
  const std::set<std::string> parents =
      m.info(m.require_var("default")).parents;
  const std::set<std::string> want = {
      "ethnicity", "age", "education", "job", "length_of_employment",
      "income", "housing", "savings", "credit_amount"};
  CHECK(parents == want);
  CHECK(parents.count("gender") == 0);

  // The three audit configurations agree on the audit frame and differ only
  // in what the predictor reads.
  for (const char* name :
       {"credit_audit_a.json", "credit_audit_b.json", "credit_audit_c.json"}) {
    CAPTURE(name);
    const FairnessFile file = load_fairness(cfsim_test::model_path(name));
    CHECK(file.audit.outcome == "default");
    REQUIRE(file.audit.sensitive.size() == 2);
    CHECK(file.audit.sensitive[0].name == "gender");
    CHECK(file.audit.sensitive[1].name == "ethnicity");
    CHECK(file.audit.n == 1000);
    CHECK(file.sample);
    CHECK(file.case_count == 100);
    CHECK(file.predictor.kind == PredictorSpec::Kind::kExpression);
  }
}

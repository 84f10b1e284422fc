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

// JSON file formats for models, counterfactual queries, fairness audits, and
// benchmark runs. Every file carries "format_version": 1. Field reference
// lives in docs/model_format.md.

#ifndef CFSIM_FORMAT_HPP
#define CFSIM_FORMAT_HPP

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cfsim/bench.hpp"
#include "cfsim/conditioning.hpp"
#include "cfsim/counterfactual.hpp"
#include "cfsim/dist.hpp"
#include "cfsim/errors.hpp"
#include "cfsim/expr.hpp"
#include "cfsim/fairness.hpp"
#include "cfsim/model.hpp"
#include "cfsim/predictor.hpp"

namespace cfsim {

using json = nlohmann::json;

namespace detail {

inline const json& need(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw IoError(where + " is missing the required field '" + key + "'");
  }
  return *it;
}

inline std::string need_string(const json& j, const char* key,
                               const std::string& where) {
  const json& v = need(j, key, where);
  if (!v.is_string()) {
    throw IoError(where + " field '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

inline double need_number(const json& j, const char* key,
                          const std::string& where) {
  const json& v = need(j, key, where);
  if (!v.is_number()) {
    throw IoError(where + " field '" + key + "' must be a number");
  }
  return v.get<double>();
}

inline void check_version(const json& j, const std::string& where) {
  const json& v = need(j, "format_version", where);
  if (!v.is_number_integer() || v.get<int>() != 1) {
    throw IoError(where + " has an unsupported format_version (expected 1)");
  }
}

inline std::vector<Condition> conditions_from(const json& j,
                                              const std::string& where) {
  if (!j.is_object()) {
    throw IoError(where + " must be an object of variable: value pairs");
  }
  std::vector<Condition> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number()) {
      throw IoError(where + " value for '" + it.key() + "' must be a number");
    }
    out.push_back({it.key(), it.value().get<double>()});
  }
  return out;
}

}  // namespace detail

inline json load_json_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  json j;
  try {
    f >> j;
  } catch (const json::parse_error& e) {
    throw IoError("'" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) {
    throw IoError("'" + path + "' must hold a JSON object");
  }
  return j;
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

inline ModelSpec parse_model_json(const json& j) {
  detail::check_version(j, "model");
  ModelSpec spec;
  if (j.contains("background")) {
    const json& bgs = j.at("background");
    if (!bgs.is_array()) throw IoError("model 'background' must be an array");
    for (const json& b : bgs) {
      GlobalBackgroundSpec g;
      g.name = detail::need_string(b, "name", "background entry");
      g.dist = ErrorDist::parse(
          detail::need_string(b, "dist", "background '" + g.name + "'"));
      spec.background.push_back(std::move(g));
    }
  }
  const json& vars = detail::need(j, "variables", "model");
  if (!vars.is_array() || vars.empty()) {
    throw IoError("model 'variables' must be a nonempty array");
  }
  for (const json& v : vars) {
    VariableSpec vs;
    vs.name = detail::need_string(v, "name", "variable entry");
    const std::string where = "variable '" + vs.name + "'";
    if (v.contains("kind")) {
      const std::string kind = detail::need_string(v, "kind", where);
      if (kind == "continuous") {
        vs.kind = VarKind::kContinuous;
      } else if (kind == "discrete") {
        vs.kind = VarKind::kDiscrete;
      } else {
        throw IoError(where + " kind must be 'continuous' or 'discrete'");
      }
    }
    vs.error_dist = ErrorDist::parse(detail::need_string(v, "error", where));
    const std::string source = detail::need_string(v, "expr", where);
    try {
      vs.expr = parse_expr(source);
    } catch (const ParseError& e) {
      throw ParseError("in expression for '" + vs.name + "': " + e.what());
    }
    if (v.contains("monotonic")) {
      const std::string mono = detail::need_string(v, "monotonic", where);
      if (mono == "none") {
        vs.monotonicity = Monotonicity::kNone;
      } else if (mono == "additive") {
        vs.monotonicity = Monotonicity::kAdditive;
      } else if (mono == "general") {
        vs.monotonicity = Monotonicity::kMonotonicGeneral;
      } else {
        throw IoError(where +
                      " monotonic must be 'none', 'additive', or 'general'");
      }
    }
    spec.variables.push_back(std::move(vs));
  }
  return spec;
}

inline Scm load_model(const std::string& path) {
  return Scm::build(parse_model_json(load_json_file(path)));
}

// ---------------------------------------------------------------------------
// Counterfactual query files
// ---------------------------------------------------------------------------

inline CounterfactualQuery parse_query_json(const json& j) {
  detail::check_version(j, "query");
  CounterfactualQuery q;
  if (j.contains("conditions")) {
    q.conditions = detail::conditions_from(j.at("conditions"),
                                           "query 'conditions'");
  }
  if (j.contains("intervention")) {
    for (const Condition& c : detail::conditions_from(
             j.at("intervention"), "query 'intervention'")) {
      q.intervention.assignments[c.variable] = c.value;
    }
  }
  const json& targets = detail::need(j, "targets", "query");
  if (!targets.is_array() || targets.empty()) {
    throw IoError("query 'targets' must be a nonempty array of names");
  }
  for (const json& t : targets) {
    if (!t.is_string()) throw IoError("query targets must be strings");
    q.targets.push_back(t.get<std::string>());
  }
  if (j.contains("n")) q.n = static_cast<size_t>(detail::need_number(j, "n", "query"));
  if (j.contains("seed")) {
    const json& s = j.at("seed");
    if (!s.is_number_integer()) throw IoError("query 'seed' must be an integer");
    q.seed = s.get<std::uint64_t>();
  }
  return q;
}

inline CounterfactualQuery load_query(const std::string& path) {
  return parse_query_json(load_json_file(path));
}

// ---------------------------------------------------------------------------
// Fairness audit files
// ---------------------------------------------------------------------------

/// How the audited predictor is constructed, as declared in the file.
struct PredictorSpec {
  enum class Kind { kExpression, kCommand } kind = Kind::kExpression;
  std::string text;  // expression source or shell command
  SubprocessOptions subprocess;

  std::unique_ptr<Predictor> make() const {
    if (kind == Kind::kExpression) {
      return std::make_unique<ExpressionPredictor>(text);
    }
    return std::make_unique<SubprocessPredictor>(text, subprocess);
  }
};

struct FairnessFile {
  FairnessAudit audit;
  PredictorSpec predictor;
  bool sample = true;       // draw cases from the model's own joint
  size_t case_count = 100;  // when sampling
  std::vector<FairnessCase> cases;  // when listed explicitly
};

inline PredictorSpec parse_predictor_json(const json& j) {
  if (!j.is_object()) throw IoError("'predictor' must be an object");
  PredictorSpec spec;
  const std::string type = detail::need_string(j, "type", "predictor");
  if (type == "expression") {
    spec.kind = PredictorSpec::Kind::kExpression;
    spec.text = detail::need_string(j, "source", "predictor");
  } else if (type == "command") {
    spec.kind = PredictorSpec::Kind::kCommand;
    spec.text = detail::need_string(j, "command", "predictor");
    if (j.contains("timeout_seconds")) {
      spec.subprocess.timeout_seconds =
          detail::need_number(j, "timeout_seconds", "predictor");
    }
  } else {
    throw IoError("predictor type must be 'expression' or 'command'");
  }
  return spec;
}

inline FairnessFile parse_fairness_json(const json& j) {
  detail::check_version(j, "fairness audit");
  FairnessFile file;
  file.audit.outcome = detail::need_string(j, "outcome", "fairness audit");
  const json& sens = detail::need(j, "sensitive", "fairness audit");
  if (!sens.is_array() || sens.empty()) {
    throw IoError("fairness 'sensitive' must be a nonempty array");
  }
  for (const json& s : sens) {
    SensitiveSpec ss;
    ss.name = detail::need_string(s, "name", "sensitive entry");
    const json& values = detail::need(s, "values", "sensitive '" + ss.name + "'");
    if (!values.is_array() || values.empty()) {
      throw IoError("sensitive '" + ss.name +
                    "' needs a nonempty 'values' array");
    }
    for (const json& v : values) {
      if (!v.is_number()) {
        throw IoError("sensitive '" + ss.name + "' values must be numbers");
      }
      ss.values.push_back(v.get<double>());
    }
    file.audit.sensitive.push_back(std::move(ss));
  }
  if (j.contains("mode")) {
    const std::string mode = detail::need_string(j, "mode", "fairness audit");
    if (mode == "definition5") {
      file.audit.mode = FairnessMode::kDefinition5;
    } else if (mode == "kusner") {
      file.audit.mode = FairnessMode::kKusner;
    } else {
      throw IoError("fairness mode must be 'definition5' or 'kusner'");
    }
  }
  if (j.contains("n")) {
    file.audit.n =
        static_cast<size_t>(detail::need_number(j, "n", "fairness audit"));
  }
  if (j.contains("seed")) {
    const json& s = j.at("seed");
    if (!s.is_number_integer()) {
      throw IoError("fairness 'seed' must be an integer");
    }
    file.audit.seed = s.get<std::uint64_t>();
  }
  const json& cases = detail::need(j, "cases", "fairness audit");
  if (cases.is_number_integer()) {
    file.sample = true;
    file.case_count = cases.get<size_t>();
  } else if (cases.is_array()) {
    file.sample = false;
    for (const json& c : cases) {
      FairnessCase fc;
      fc.w_conditions =
          detail::conditions_from(detail::need(c, "w", "case"), "case 'w'");
      fc.c_conditions =
          detail::conditions_from(detail::need(c, "c", "case"), "case 'c'");
      file.cases.push_back(std::move(fc));
    }
  } else {
    throw IoError(
        "fairness 'cases' must be a count or an array of explicit cases");
  }
  file.predictor =
      parse_predictor_json(detail::need(j, "predictor", "fairness audit"));
  return file;
}

inline FairnessFile load_fairness(const std::string& path) {
  return parse_fairness_json(load_json_file(path));
}

// ---------------------------------------------------------------------------
// Benchmark case files
// ---------------------------------------------------------------------------

inline std::vector<BenchCase> parse_bench_json(const json& j) {
  detail::check_version(j, "benchmark file");
  std::vector<BenchCase> out;
  const json& cases = detail::need(j, "cases", "benchmark file");
  if (!cases.is_array() || cases.empty()) {
    throw IoError("benchmark 'cases' must be a nonempty array");
  }
  for (const json& c : cases) {
    if (c.is_string()) {
      out.push_back(bench_preset(c.get<std::string>()));
      continue;
    }
    if (!c.is_object()) {
      throw IoError("benchmark case entries must be preset names or objects");
    }
    BenchCase bc;
    bc.name = detail::need_string(c, "name", "benchmark case");
    const std::string where = "benchmark case '" + bc.name + "'";
    bc.v_count = static_cast<int>(detail::need_number(c, "variables", where));
    bc.conditions =
        static_cast<int>(detail::need_number(c, "conditions", where));
    bc.degree = detail::need_number(c, "degree", where);
    bc.confounder_ratio =
        detail::need_number(c, "confounders_per_variable", where);
    if (c.contains("coefficient_min")) {
      bc.coefficients.min_magnitude =
          detail::need_number(c, "coefficient_min", where);
    }
    if (c.contains("coefficient_max")) {
      bc.coefficients.max_magnitude =
          detail::need_number(c, "coefficient_max", where);
    }
    out.push_back(std::move(bc));
  }
  for (BenchCase& bc : out) {
    if (j.contains("rounds")) {
      bc.rounds = static_cast<int>(
          detail::need_number(j, "rounds", "benchmark file"));
    }
    if (j.contains("n")) {
      const json& grid = j.at("n");
      if (!grid.is_array() || grid.empty()) {
        throw IoError("benchmark 'n' must be a nonempty array");
      }
      bc.n_grid.clear();
      for (const json& n : grid) {
        if (!n.is_number()) throw IoError("benchmark 'n' entries must be numbers");
        bc.n_grid.push_back(static_cast<size_t>(n.get<double>()));
      }
    }
    if (j.contains("seed")) {
      const json& s = j.at("seed");
      if (!s.is_number_integer()) {
        throw IoError("benchmark 'seed' must be an integer");
      }
      bc.seed = s.get<std::uint64_t>();
    }
    bc.validate();
  }
  return out;
}

inline std::vector<BenchCase> load_bench(const std::string& path) {
  return parse_bench_json(load_json_file(path));
}

}  // namespace cfsim

#endif  // CFSIM_FORMAT_HPP

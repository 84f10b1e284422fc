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

#ifndef CFSIM_MODEL_HPP
#define CFSIM_MODEL_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cfsim/dist.hpp"
#include "cfsim/errors.hpp"
#include "cfsim/expr.hpp"

namespace cfsim {

enum class VarKind { kContinuous, kDiscrete };

/// How the dedicated error term enters the structural expression. Conditioning
/// on a continuous variable needs kAdditive or kMonotonicGeneral; kNone marks
/// variables that are never inverted.
enum class Monotonicity { kNone, kAdditive, kMonotonicGeneral };

struct VariableSpec {
  std::string name;
  VarKind kind = VarKind::kContinuous;
  ErrorDist error_dist;
  ExprPtr expr;
  Monotonicity monotonicity = Monotonicity::kNone;
};

struct GlobalBackgroundSpec {
  std::string name;
  ErrorDist dist;
};

struct ModelSpec {
  std::vector<GlobalBackgroundSpec> background;
  std::vector<VariableSpec> variables;
};

/// do(X = x): per-variable constant assignments.
struct Intervention {
  std::map<std::string, double> assignments;

  bool empty() const { return assignments.empty(); }
};

/// Validated causal model. Immutable once built; intervene() and
/// ancestral_prune() return new models. The table schema is fixed at build
/// time: global background columns in declaration order, then one dedicated
/// error column "u_<name>" per variable, then the observed variables in
/// declaration order.
class Scm {
 public:
  struct VarInfo {
    std::set<std::string> parents;         // observed parents
    std::set<std::string> global_parents;  // referenced background variables
    bool uses_error = false;               // expr mentions `u`
    int col = -1;                          // this variable's column
    int error_col = -1;                    // its dedicated error column
    CompiledExpr prog;                     // expr compiled against the schema
  };

  struct BackgroundCol {
    std::string name;
    int col = -1;
    ErrorDist dist;
  };

  static Scm build(ModelSpec spec) { return Scm(std::move(spec), true); }

  static std::string error_col_name(const std::string& var) {
    return "u_" + var;
  }

  const ModelSpec& spec() const { return spec_; }
  const std::vector<VariableSpec>& variables() const { return spec_.variables; }
  const std::vector<GlobalBackgroundSpec>& background() const {
    return spec_.background;
  }

  size_t num_vars() const { return spec_.variables.size(); }

  /// Indices into variables() in topological order (ties broken by
  /// declaration order).
  const std::vector<int>& topo_order() const { return topo_; }

  int var_index(const std::string& name) const {
    auto it = var_index_.find(name);
    return it == var_index_.end() ? -1 : it->second;
  }

  const VariableSpec& variable(int i) const {
    return spec_.variables[static_cast<size_t>(i)];
  }
  const VarInfo& info(int i) const { return info_[static_cast<size_t>(i)]; }

  const VariableSpec& variable(const std::string& name) const {
    return variable(require_var(name));
  }

  bool is_global(const std::string& name) const {
    for (const auto& g : spec_.background) {
      if (g.name == name) return true;
    }
    return false;
  }

  int require_var(const std::string& name) const {
    int i = var_index(name);
    if (i < 0) throw ModelError("unknown variable '" + name + "'");
    return i;
  }

  /// Position of each variable in topo_order(), by variable index.
  int topo_position(int var) const {
    return topo_pos_[static_cast<size_t>(var)];
  }

  bool is_intervened(const std::string& name) const {
    return intervened_.count(name) != 0;
  }
  const std::set<std::string>& intervened() const { return intervened_; }

  // ---- table schema -------------------------------------------------------

  const std::vector<std::string>& column_names() const { return columns_; }
  size_t num_columns() const { return columns_.size(); }

  /// All exogenous columns (globals first, then dedicated errors).
  const std::vector<BackgroundCol>& background_columns() const {
    return background_cols_;
  }

  const std::unordered_map<std::string, int>& column_index() const {
    return column_index_;
  }

  // ---- graph queries ------------------------------------------------------

  /// targets ∪ their observed ancestors, as variable names.
  std::set<std::string> observed_ancestors(
      const std::set<std::string>& targets) const {
    std::set<std::string> seen;
    std::vector<int> stack;
    for (const auto& t : targets) {
      if (seen.insert(t).second) stack.push_back(require_var(t));
    }
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (const auto& p : info_[static_cast<size_t>(v)].parents) {
        if (seen.insert(p).second) stack.push_back(var_index(p));
      }
    }
    return seen;
  }

  /// Column names of targets plus every ancestor in the graph over V and U:
  /// ancestor variables, their referenced globals, and the dedicated error
  /// columns of each member whose expression uses `u`.
  std::set<std::string> ancestral_columns(
      const std::set<std::string>& targets) const {
    std::set<std::string> cols;
    for (const auto& v : observed_ancestors(targets)) {
      const VarInfo& inf = info_[static_cast<size_t>(var_index(v))];
      cols.insert(v);
      if (inf.uses_error) cols.insert(error_col_name(v));
      for (const auto& g : inf.global_parents) cols.insert(g);
    }
    return cols;
  }

  /// Restriction of the model to the ancestors of `targets` (targets
  /// included). Dropped variables lose their error columns; globals survive
  /// only when a surviving variable references them.
  Scm ancestral_prune(const std::set<std::string>& targets) const {
    std::set<std::string> keep_vars = observed_ancestors(targets);
    std::set<std::string> keep_globals;
    for (const auto& v : keep_vars) {
      const VarInfo& inf = info_[static_cast<size_t>(var_index(v))];
      keep_globals.insert(inf.global_parents.begin(),
                          inf.global_parents.end());
    }
    ModelSpec pruned;
    for (const auto& g : spec_.background) {
      if (keep_globals.count(g.name)) pruned.background.push_back(g);
    }
    for (const auto& v : spec_.variables) {
      if (keep_vars.count(v.name)) pruned.variables.push_back(v);
    }
    Scm out(std::move(pruned), false);
    for (const auto& name : intervened_) {
      if (keep_vars.count(name)) out.intervened_.insert(name);
    }
    return out;
  }

  /// Submodel do(X = x): intervened expressions become constants, their
  /// error columns stay in the schema but no longer affect anything.
  Scm intervene(const Intervention& iv) const {
    ModelSpec sub = spec_;
    for (const auto& [name, value] : iv.assignments) {
      int i = require_var(name);
      if (!std::isfinite(value)) {
        throw ModelError("intervention value for '" + name +
                         "' is not finite");
      }
      VariableSpec& v = sub.variables[static_cast<size_t>(i)];
      v.expr = Expr::literal(value);
      v.monotonicity = Monotonicity::kNone;
    }
    Scm out(std::move(sub), false);
    out.intervened_ = intervened_;
    for (const auto& [name, value] : iv.assignments) {
      out.intervened_.insert(name);
    }
    return out;
  }

 private:
  Scm(ModelSpec spec, bool strict) : spec_(std::move(spec)) {
    validate_names();
    resolve_references(strict);
    sort_topologically();
    build_schema();
  }

  static bool valid_identifier(const std::string& s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_')
      return false;
    for (char c : s) {
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_')
        return false;
    }
    return true;
  }

  void validate_names() {
    auto check_name = [](const std::string& name, const char* what) {
      if (!valid_identifier(name)) {
        throw ModelError(std::string(what) + " name '" + name +
                         "' is not a valid identifier");
      }
      if (name == "u") {
        throw ModelError("the name 'u' is reserved for dedicated error terms");
      }
      if (name == "if" || builtin_from_name(name)) {
        throw ModelError(std::string(what) + " name '" + name +
                         "' collides with a builtin function");
      }
    };
    std::set<std::string> seen;
    for (const auto& g : spec_.background) {
      check_name(g.name, "background variable");
      if (!seen.insert(g.name).second) {
        throw ModelError("duplicate name '" + g.name + "'");
      }
    }
    for (size_t i = 0; i < spec_.variables.size(); ++i) {
      const auto& v = spec_.variables[i];
      check_name(v.name, "variable");
      if (!seen.insert(v.name).second) {
        throw ModelError("duplicate name '" + v.name + "'");
      }
      if (!v.expr) {
        throw ModelError("variable '" + v.name + "' has no expression");
      }
      var_index_.emplace(v.name, static_cast<int>(i));
    }
  }

  void resolve_references(bool strict) {
    info_.resize(spec_.variables.size());
    std::set<std::string> used_globals;
    for (size_t i = 0; i < spec_.variables.size(); ++i) {
      const auto& v = spec_.variables[i];
      VarInfo& inf = info_[i];
      for (const auto& name : free_vars(v.expr)) {
        if (name == "u") {
          inf.uses_error = true;
        } else if (var_index_.count(name)) {
          inf.parents.insert(name);
        } else if (is_global(name)) {
          inf.global_parents.insert(name);
          used_globals.insert(name);
        } else {
          throw ModelError("variable '" + v.name + "': unknown identifier '" +
                           name + "'");
        }
      }
      if (v.kind == VarKind::kDiscrete &&
          v.monotonicity != Monotonicity::kNone) {
        throw ModelError("variable '" + v.name +
                         "': discrete variables cannot declare monotonicity");
      }
      if (v.monotonicity == Monotonicity::kAdditive &&
          !is_additive_in_error(v.expr)) {
        throw ModelError(
            "variable '" + v.name +
            "': declared additive but expression is not of the form "
            "g(parents) + u");
      }
      if (v.monotonicity == Monotonicity::kMonotonicGeneral &&
          !inf.uses_error) {
        throw ModelError("variable '" + v.name +
                         "': declared monotonic but expression does not use "
                         "'u'");
      }
    }
    if (strict) {
      for (const auto& g : spec_.background) {
        if (!used_globals.count(g.name)) {
          throw ModelError("background variable '" + g.name +
                           "' is referenced by no variable");
        }
      }
    }
  }

  void sort_topologically() {
    const size_t n = spec_.variables.size();
    std::vector<int> indegree(n, 0);
    std::vector<std::vector<int>> children(n);
    for (size_t i = 0; i < n; ++i) {
      for (const auto& p : info_[i].parents) {
        int pi = var_index(p);
        children[static_cast<size_t>(pi)].push_back(static_cast<int>(i));
        ++indegree[i];
      }
    }
    // Kahn's algorithm; the ready set is kept sorted so ties resolve by
    // declaration order, making τ deterministic.
    std::set<int> ready;
    for (size_t i = 0; i < n; ++i) {
      if (indegree[i] == 0) ready.insert(static_cast<int>(i));
    }
    topo_.reserve(n);
    while (!ready.empty()) {
      int v = *ready.begin();
      ready.erase(ready.begin());
      topo_.push_back(v);
      for (int c : children[static_cast<size_t>(v)]) {
        if (--indegree[static_cast<size_t>(c)] == 0) ready.insert(c);
      }
    }
    if (topo_.size() != n) {
      throw ModelError("cycle detected: " + find_cycle(indegree));
    }
    topo_pos_.resize(n);
    for (size_t k = 0; k < topo_.size(); ++k) {
      topo_pos_[static_cast<size_t>(topo_[k])] = static_cast<int>(k);
    }
  }

  std::string find_cycle(const std::vector<int>& indegree) const {
    // Walk parent links inside the unresolved subgraph until a node repeats;
    // path[k+1] is a parent of path[k], so printing the tail of the walk in
    // reverse follows edge direction.
    int start = -1;
    for (size_t i = 0; i < indegree.size(); ++i) {
      if (indegree[i] > 0) {
        start = static_cast<int>(i);
        break;
      }
    }
    std::vector<int> path;
    std::set<int> on_path;
    int cur = start;
    while (on_path.insert(cur).second) {
      path.push_back(cur);
      for (const auto& p : info_[static_cast<size_t>(cur)].parents) {
        int pi = var_index(p);
        if (indegree[static_cast<size_t>(pi)] > 0) {
          cur = pi;
          break;
        }
      }
    }
    std::string desc = spec_.variables[static_cast<size_t>(cur)].name;
    for (size_t k = path.size(); k-- > 0;) {
      desc += " -> " + spec_.variables[static_cast<size_t>(path[k])].name;
      if (path[k] == cur) break;
    }
    return desc;
  }

  void build_schema() {
    for (const auto& g : spec_.background) {
      int col = static_cast<int>(columns_.size());
      columns_.push_back(g.name);
      column_index_.emplace(g.name, col);
      background_cols_.push_back({g.name, col, g.dist});
    }
    for (const auto& v : spec_.variables) {
      std::string err = error_col_name(v.name);
      if (column_index_.count(err)) {
        throw ModelError("name '" + err +
                         "' collides with a dedicated error column");
      }
      int col = static_cast<int>(columns_.size());
      columns_.push_back(err);
      column_index_.emplace(err, col);
      background_cols_.push_back({err, col, v.error_dist});
    }
    for (size_t i = 0; i < spec_.variables.size(); ++i) {
      const auto& v = spec_.variables[i];
      if (column_index_.count(v.name)) {
        throw ModelError("name '" + v.name +
                         "' collides with a dedicated error column");
      }
      int col = static_cast<int>(columns_.size());
      columns_.push_back(v.name);
      column_index_.emplace(v.name, col);
      info_[i].col = col;
      info_[i].error_col = column_index_.at(error_col_name(v.name));
    }
    for (size_t i = 0; i < spec_.variables.size(); ++i) {
      auto cols = column_index_;
      cols["u"] = info_[i].error_col;
      info_[i].prog = CompiledExpr::compile(*spec_.variables[i].expr, cols);
    }
  }

  ModelSpec spec_;
  std::unordered_map<std::string, int> var_index_;
  std::vector<VarInfo> info_;
  std::vector<int> topo_;
  std::vector<int> topo_pos_;
  std::vector<std::string> columns_;
  std::unordered_map<std::string, int> column_index_;
  std::vector<BackgroundCol> background_cols_;
  std::set<std::string> intervened_;
};

}  // namespace cfsim

#endif  // CFSIM_MODEL_HPP

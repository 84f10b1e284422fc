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

#ifndef CFSIM_TABLE_HPP
#define CFSIM_TABLE_HPP

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "cfsim/errors.hpp"
#include "cfsim/math.hpp"
#include "cfsim/rng.hpp"

namespace cfsim {

/// Degeneracy diagnostics attached by the conditioning pipeline.
struct TableDiagnostics {
  double ess = kNa;             // effective sample size before resampling
  double unique_fraction = kNa; // distinct source particles / rows
  size_t na_roots = 0;          // rows where no error value solved f = c
};

/// Column-major table of particles. Every cell is a double; NA is quiet NaN.
/// `weights`, when non-empty, holds one normalized importance weight per row;
/// an empty vector means equal weights. `ancestry`, when non-empty, maps each
/// row to the index of its original source particle across resampling steps.
class ParticleTable {
 public:
  ParticleTable() = default;

  size_t rows() const { return cols_.empty() ? 0 : cols_[0].size(); }
  size_t num_cols() const { return cols_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  bool has_col(const std::string& name) const {
    return index_.count(name) != 0;
  }

  int col_index(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }

  const std::vector<double>& col(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ModelError("no column '" + name + "'");
    return cols_[static_cast<size_t>(it->second)];
  }

  std::vector<double>& col(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ModelError("no column '" + name + "'");
    return cols_[static_cast<size_t>(it->second)];
  }

  const std::vector<double>& col(size_t i) const { return cols_[i]; }
  std::vector<double>& col(size_t i) { return cols_[i]; }

  int add_col(const std::string& name, std::vector<double> values) {
    if (index_.count(name)) throw ModelError("duplicate column '" + name + "'");
    if (!cols_.empty() && values.size() != rows()) {
      throw ModelError("column '" + name + "' has " +
                       std::to_string(values.size()) + " rows, table has " +
                       std::to_string(rows()));
    }
    int idx = static_cast<int>(cols_.size());
    index_.emplace(name, idx);
    names_.push_back(name);
    cols_.push_back(std::move(values));
    return idx;
  }

  int add_col(const std::string& name, size_t n, double fill = kNa) {
    return add_col(name, std::vector<double>(n, fill));
  }

  /// Raw column pointers in declaration order, for CompiledExpr::eval_row.
  std::vector<const double*> col_ptrs() const {
    std::vector<const double*> p(cols_.size());
    for (size_t i = 0; i < cols_.size(); ++i) p[i] = cols_[i].data();
    return p;
  }

  /// Name -> column index map for CompiledExpr::compile.
  std::unordered_map<std::string, int> column_map() const { return index_; }

  /// New table with the same columns, rows picked by `idx` (repeats allowed).
  /// Weights do not carry over: resampling restores equal weights. Ancestry
  /// composes, so the result still points at the original particles.
  ParticleTable select_rows(const std::vector<size_t>& idx) const {
    ParticleTable out;
    out.names_ = names_;
    out.index_ = index_;
    out.cols_.resize(cols_.size());
    for (size_t c = 0; c < cols_.size(); ++c) {
      out.cols_[c].resize(idx.size());
      for (size_t r = 0; r < idx.size(); ++r) {
        out.cols_[c][r] = cols_[c][idx[r]];
      }
    }
    out.ancestry.resize(idx.size());
    for (size_t r = 0; r < idx.size(); ++r) {
      out.ancestry[r] = ancestry.empty() ? idx[r] : ancestry[idx[r]];
    }
    return out;
  }

  /// Subset of columns, in the given order.
  ParticleTable select_cols(const std::vector<std::string>& which) const {
    ParticleTable out;
    for (const auto& name : which) out.add_col(name, col(name));
    out.weights = weights;
    out.ancestry = ancestry;
    out.diag = diag;
    return out;
  }

  std::vector<double> weights;
  std::vector<size_t> ancestry;
  TableDiagnostics diag;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> cols_;
  std::unordered_map<std::string, int> index_;
};

/// Fraction of distinct rows, compared over the named columns (all columns
/// when the list is empty). Cells are compared by bit pattern, so resampling
/// copies collapse together and NA cells group with NA.
inline double unique_row_fraction(const ParticleTable& t,
                                  const std::vector<std::string>& columns = {}) {
  const size_t n = t.rows();
  if (n == 0) return kNa;
  std::vector<const std::vector<double>*> cols;
  if (columns.empty()) {
    for (size_t i = 0; i < t.num_cols(); ++i) cols.push_back(&t.col(i));
  } else {
    for (const auto& name : columns) cols.push_back(&t.col(name));
  }
  if (cols.empty()) return 1.0 / static_cast<double>(n);

  // Hash first so the sort rarely needs the full lexicographic comparison.
  std::vector<std::uint64_t> h(n);
  for (size_t r = 0; r < n; ++r) {
    std::uint64_t acc = 0x51CF3A1ED61D23F5ull;
    for (const auto* c : cols) {
      acc = rng::mix64(acc ^ std::bit_cast<std::uint64_t>((*c)[r]));
    }
    h[r] = acc;
  }
  auto row_less = [&](size_t a, size_t b) {
    if (h[a] != h[b]) return h[a] < h[b];
    for (const auto* c : cols) {
      const auto x = std::bit_cast<std::uint64_t>((*c)[a]);
      const auto y = std::bit_cast<std::uint64_t>((*c)[b]);
      if (x != y) return x < y;
    }
    return false;
  };
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), row_less);
  size_t distinct = 1;
  for (size_t r = 1; r < n; ++r) {
    if (row_less(order[r - 1], order[r])) ++distinct;
  }
  return static_cast<double>(distinct) / static_cast<double>(n);
}

}  // namespace cfsim

#endif  // CFSIM_TABLE_HPP

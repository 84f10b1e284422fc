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

#ifndef CFSIM_ERRORS_HPP
#define CFSIM_ERRORS_HPP

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>

namespace cfsim {

/// Malformed source text (expressions, model files). Carries the byte
/// offset of the offending token when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t offset)
      : std::runtime_error(msg + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  explicit ParseError(const std::string& msg)
      : std::runtime_error(msg), offset_(0) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Structural problems in a declared model: cycles, unknown or duplicate
/// names, monotonicity violations detected at run time.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runtime evaluation failure: unbound variable or a domain error
/// (log of a non-positive value, division by zero, ...).
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when conditioning produces no particle with positive weight.
/// Carries enough context to tell the user which condition failed and why.
class InfeasibleEvidenceError : public std::runtime_error {
 public:
  struct Diagnostics {
    std::string condition;        // "name = value"
    int condition_index = -1;     // position in the condition set, -1 if n/a
    std::size_t na_roots = 0;     // rows where no error-term root exists
    double observed_min = 0.0;    // range of the variable over the particles
    double observed_max = 0.0;
    std::map<double, std::size_t> marginal;  // empirical marginal (discrete)
  };

  InfeasibleEvidenceError(const std::string& msg, Diagnostics diag)
      : std::runtime_error(msg), diag_(std::move(diag)) {}
  const Diagnostics& diagnostics() const { return diag_; }

 private:
  Diagnostics diag_;
};

/// External predictor protocol violations: launch failure, bad exit status,
/// malformed or short output, timeout, nondeterminism.
class PredictorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File system / encoding problems when reading model, query or case files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cfsim

#endif  // CFSIM_ERRORS_HPP

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

#ifndef CFSIM_DIST_HPP
#define CFSIM_DIST_HPP

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <string>
#include <string_view>

#include "cfsim/errors.hpp"
#include "cfsim/math.hpp"
#include "cfsim/rng.hpp"

namespace cfsim {

enum class DistKind { kNormal, kUniform };

/// Marginal distribution of one exogenous variable (a background variable or
/// a dedicated error term). Declared in models as "normal(mu, sd)" or
/// "uniform(lo, hi)". Sampling goes through the quantile function so a single
/// counter-based uniform drives every family identically.
struct ErrorDist {
  DistKind kind = DistKind::kNormal;
  double p1 = 0.0;  // normal: mean,  uniform: lower bound
  double p2 = 1.0;  // normal: sd,    uniform: upper bound

  static ErrorDist normal(double mean, double sd) {
    if (!(sd > 0.0)) {
      throw ModelError("normal distribution needs sd > 0, got " +
                       format_double(sd));
    }
    return ErrorDist{DistKind::kNormal, mean, sd};
  }

  static ErrorDist uniform(double lo, double hi) {
    if (!(lo < hi)) {
      throw ModelError("uniform distribution needs lo < hi, got [" +
                       format_double(lo) + ", " + format_double(hi) + "]");
    }
    return ErrorDist{DistKind::kUniform, lo, hi};
  }

  static ErrorDist parse(std::string_view text);

  double pdf(double x) const {
    if (kind == DistKind::kNormal) {
      return norm_pdf((x - p1) / p2) / p2;
    }
    return (x >= p1 && x <= p2) ? 1.0 / (p2 - p1) : 0.0;
  }

  double cdf(double x) const {
    if (kind == DistKind::kNormal) return norm_cdf((x - p1) / p2);
    if (x <= p1) return 0.0;
    if (x >= p2) return 1.0;
    return (x - p1) / (p2 - p1);
  }

  /// p must lie in (0, 1); the counter-based uniforms never hit 0 or 1.
  double quantile(double p) const {
    if (kind == DistKind::kNormal) return p1 + p2 * norm_quantile(p);
    return p1 + (p2 - p1) * p;
  }

  double sample(std::uint64_t key, std::uint64_t counter) const {
    return quantile(rng::uniform01(key, counter));
  }

  std::string str() const {
    const char* name = (kind == DistKind::kNormal) ? "normal" : "uniform";
    return std::string(name) + "(" + format_double(p1) + ", " +
           format_double(p2) + ")";
  }
};

namespace detail {

inline void skip_ws(std::string_view s, size_t& i) {
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
}

inline double parse_number(std::string_view s, size_t& i,
                           std::string_view what) {
  skip_ws(s, i);
  const char* begin = s.data() + i;
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin) {
    throw ModelError("bad " + std::string(what) + " in distribution '" +
                     std::string(s) + "'");
  }
  i += static_cast<size_t>(end - begin);
  return v;
}

}  // namespace detail

inline ErrorDist ErrorDist::parse(std::string_view text) {
  size_t i = 0;
  detail::skip_ws(text, i);
  size_t start = i;
  while (i < text.size() &&
         (std::isalpha(static_cast<unsigned char>(text[i])) || text[i] == '_'))
    ++i;
  std::string name(text.substr(start, i - start));
  detail::skip_ws(text, i);
  if (i >= text.size() || text[i] != '(') {
    throw ModelError("expected '(' after distribution name in '" +
                     std::string(text) + "'");
  }
  ++i;
  double a = detail::parse_number(text, i, "first parameter");
  detail::skip_ws(text, i);
  if (i >= text.size() || (text[i] != ',' && text[i] != ';')) {
    throw ModelError("expected ',' between parameters in '" +
                     std::string(text) + "'");
  }
  ++i;
  double b = detail::parse_number(text, i, "second parameter");
  detail::skip_ws(text, i);
  if (i >= text.size() || text[i] != ')') {
    throw ModelError("expected ')' in distribution '" + std::string(text) +
                     "'");
  }
  ++i;
  detail::skip_ws(text, i);
  if (i != text.size()) {
    throw ModelError("trailing characters after distribution '" +
                     std::string(text) + "'");
  }
  if (name == "normal") return ErrorDist::normal(a, b);
  if (name == "uniform") return ErrorDist::uniform(a, b);
  throw ModelError("unknown distribution family '" + name +
                   "' (supported: normal, uniform)");
}

}  // namespace cfsim

#endif  // CFSIM_DIST_HPP

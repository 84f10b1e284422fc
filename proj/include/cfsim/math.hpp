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

#ifndef CFSIM_MATH_HPP
#define CFSIM_MATH_HPP

#include <charconv>
#include <cmath>
#include <limits>
#include <string>

#include "cfsim/errors.hpp"

namespace cfsim {

inline constexpr double kNa = std::numeric_limits<double>::quiet_NaN();

/// Cells use quiet NaN as the "not available" marker; eval() never produces
/// NaN silently (domain problems throw), so the encoding cannot alias.
inline bool is_na(double x) { return std::isnan(x); }

inline double norm_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.7071067811865475244008444);
}

/// Standard normal quantile, Wichura's AS 241 (PPND16), good to ~1e-16
/// relative over (0, 1).
inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw EvalError("qnorm: argument must be in (0, 1), got " +
                    std::to_string(p));
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) *
                    r +
                4.5921953931549871457e4) *
                   r +
               1.3731693765509461125e4) *
                  r +
              1.9715909503065514427e3) *
                 r +
             1.3314166789178437745e2) *
                r +
            3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) *
                    r +
                2.1213794301586595867e4) *
                   r +
               5.3941960214247511077e3) *
                  r +
              6.8718700749205790830e2) *
                 r +
             4.2313330701600911252e1) *
                r +
            1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) *
                    r +
                2.41780725177450611770e-1) *
                   r +
               1.27045825245236838258e0) *
                  r +
              3.64784832476320460504e0) *
                 r +
             5.76949722146069140550e0) *
                r +
            4.63033784615654529590e0) *
               r +
           1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) *
                    r +
                1.51986665636164571966e-2) *
                   r +
               1.48103976427480074590e-1) *
                  r +
              6.89767334985100004550e-1) *
                 r +
             1.67638483018380384940e0) *
                r +
            2.05319162663775882187e0) *
               r +
           1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) *
                    r +
                1.24266094738807843860e-3) *
                   r +
               2.65321895265761230930e-2) *
                  r +
              2.96560571828504891230e-1) *
                 r +
             1.78482653991729133580e0) *
                r +
            5.46378491116411436990e0) *
               r +
           6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) *
                    r +
                1.84631831751005468180e-5) *
                   r +
               7.86869131145613259100e-4) *
                  r +
              1.48753612908506148525e-2) *
                 r +
             1.36929880922735805310e-1) *
                r +
            5.99832206555887937690e-1) *
               r +
           1.0);
  }
  return (q < 0.0) ? -val : val;
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Shortest decimal string that round-trips to the same double.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "NA";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  (void)ec;
  return std::string(buf, end);
}

/// Inverse CDF of the Poisson distribution: smallest k >= 0 with
/// P(X <= k) >= u. Nondecreasing in u by construction.
inline double poisson_inv(double u, double lambda) {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw EvalError("poisson_inv: u must be in [0, 1], got " +
                    std::to_string(u));
  }
  if (!(lambda >= 0.0)) {
    throw EvalError("poisson_inv: lambda must be nonnegative, got " +
                    std::to_string(lambda));
  }
  if (lambda > 600.0) {
    throw EvalError("poisson_inv: lambda too large (limit 600)");
  }
  if (lambda == 0.0) return 0.0;
  double pmf = std::exp(-lambda);
  double cdf = pmf;
  double k = 0.0;
  while (cdf < u) {
    // Once the pmf underflows the CDF cannot move; u is then 1 to double
    // precision and the current k is the answer.
    if (pmf < std::numeric_limits<double>::min() && k > lambda) break;
    k += 1.0;
    pmf *= lambda / k;
    cdf += pmf;
  }
  return k;
}

}  // namespace cfsim

#endif  // CFSIM_MATH_HPP

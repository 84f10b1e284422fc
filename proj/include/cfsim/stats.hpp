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

#ifndef CFSIM_STATS_HPP
#define CFSIM_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "cfsim/errors.hpp"
#include "cfsim/math.hpp"

namespace cfsim {

inline double mean(const std::vector<double>& x) {
  if (x.empty()) return kNa;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Unbiased sample variance (n - 1 denominator).
inline double variance(const std::vector<double>& x) {
  if (x.size() < 2) return kNa;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

inline double stdev(const std::vector<double>& x) {
  return std::sqrt(variance(x));
}

inline double covariance(const std::vector<double>& x,
                         const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return kNa;
  const double mx = mean(x);
  const double my = mean(y);
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
  return s / static_cast<double>(x.size() - 1);
}

inline double correlation(const std::vector<double>& x,
                          const std::vector<double>& y) {
  const double sx = stdev(x);
  const double sy = stdev(y);
  if (!(sx > 0.0) || !(sy > 0.0)) return kNa;
  return covariance(x, y) / (sx * sy);
}

inline double weighted_mean(const std::vector<double>& x,
                            const std::vector<double>& w) {
  if (x.empty() || w.size() != x.size()) return kNa;
  double sw = 0.0;
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    s += w[i] * x[i];
  }
  return (sw > 0.0) ? s / sw : kNa;
}

/// Weighted population variance under normalized weights (no bias correction).
inline double weighted_variance(const std::vector<double>& x,
                                const std::vector<double>& w) {
  if (x.empty() || w.size() != x.size()) return kNa;
  const double m = weighted_mean(x, w);
  if (is_na(m)) return kNa;
  double sw = 0.0;
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    s += w[i] * (x[i] - m) * (x[i] - m);
  }
  return s / sw;
}

/// Effective sample size 1 / sum of squared normalized weights. Equal
/// weights give back n; a single surviving particle gives 1.
inline double effective_sample_size(const std::vector<double>& w) {
  double sw = 0.0;
  for (double v : w) sw += v;
  if (!(sw > 0.0)) return 0.0;
  double s2 = 0.0;
  for (double v : w) {
    const double norm = v / sw;
    s2 += norm * norm;
  }
  return 1.0 / s2;
}

/// One-sample Kolmogorov-Smirnov statistic against a reference CDF:
/// D = max_i max((i+1)/n - F(x_(i)), F(x_(i)) - i/n) over the sorted sample.
inline double ks_statistic(std::vector<double> sample,
                           const std::function<double(double)>& cdf) {
  if (sample.empty()) return kNa;
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    const double hi = (static_cast<double>(i) + 1.0) / n - f;
    const double lo = f - static_cast<double>(i) / n;
    if (hi > d) d = hi;
    if (lo > d) d = lo;
  }
  return d;
}

}  // namespace cfsim

#endif  // CFSIM_STATS_HPP

// Copyright 2026 The tvseg Authors
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

#pragma once

// Mean Dice with 95% confidence intervals and paired Student t-tests. The
// t distribution is evaluated through the regularized incomplete beta
// function so the core has no statistics dependency.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "tvseg/error.hpp"
#include "tvseg/results.hpp"

namespace tvseg::stats {

// I_x(a, b) by the modified Lentz continued fraction.
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0 && b > 0)) throw InvalidArgument("incomplete beta needs a, b > 0");
  if (!(x >= 0 && x <= 1)) throw InvalidArgument("incomplete beta needs x in [0,1]");
  if (x == 0.0 || x == 1.0) return x;
  if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - regularized_incomplete_beta(b, a, 1.0 - x);

  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  double f = 1.0, c = 1.0, d = 0.0;
  for (int i = 0; i <= 2000; ++i) {
    const int m = i / 2;
    double numerator;
    if (i == 0) {
      numerator = 1.0;
    } else if (i % 2 == 0) {
      numerator = (m * (b - m) * x) / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
    } else {
      numerator = -((a + m) * (a + b + m) * x) / ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
    }
    d = 1.0 + numerator * d;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    c = 1.0 + numerator / c;
    if (std::abs(c) < tiny) c = tiny;
    const double cd = c * d;
    f *= cd;
    if (std::abs(1.0 - cd) < eps) return std::exp(log_front) * (f - 1.0) / a;
  }
  throw Error("incomplete beta continued fraction did not converge");
}

// Student t CDF with `df` degrees of freedom.
inline double t_cdf(double t, double df) {
  if (!(df > 0)) throw InvalidArgument("t distribution needs df > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
  return t >= 0 ? 1.0 - tail : tail;
}

// P(|T| >= |t|).
inline double t_two_sided_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

// Inverse CDF for p in (0, 1), by bisection to full double precision.
inline double t_quantile(double p, double df) {
  if (!(p > 0 && p < 1)) throw InvalidArgument("t quantile needs p in (0,1)");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -t_quantile(1.0 - p, df);
  double lo = 0.0, hi = 1.0;
  while (t_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (t_cdf(mid, df) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Mean and CI95 = mean +- t(0.975, n-1) * s / sqrt(n).
struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 when n == 1
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool degenerate = false;  // n == 1: the interval collapses onto the mean
};

inline Summary summarize(std::span<const double> values) {
  if (values.empty()) throw PreconditionError("cannot summarize an empty sample");
  Summary s;
  s.n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n == 1) {
    s.ci_low = s.ci_high = s.mean;
    s.degenerate = true;
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  const double half = t_quantile(0.975, static_cast<double>(s.n - 1)) * s.sd /
                      std::sqrt(static_cast<double>(s.n));
  s.ci_low = s.mean - half;
  s.ci_high = s.mean + half;
  // Keep low <= mean <= high under rounding.
  s.ci_low = std::min(s.ci_low, s.mean);
  s.ci_high = std::max(s.ci_high, s.mean);
  return s;
}

struct PairwiseTest {
  std::string method_a;
  std::string method_b;
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;  // two-sided
  bool paired = true;
  std::size_t n = 0;
  double mean_difference = 0.0;  // mean of a - b
  // Differences have zero variance but a nonzero mean; t is infinite.
  bool degenerate = false;
};

// Paired t-test on aligned arms (a[i] and b[i] belong to the same sample).
inline PairwiseTest paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw PreconditionError("paired t-test arms differ in length");
  if (a.size() < 2) throw PreconditionError("paired t-test needs at least two pairs");
  PairwiseTest r;
  r.n = a.size();
  r.degrees_of_freedom = static_cast<double>(r.n - 1);
  std::vector<double> d(r.n);
  for (std::size_t i = 0; i < r.n; ++i) d[i] = a[i] - b[i];
  double sum = 0.0;
  for (double v : d) sum += v;
  const double mean = sum / static_cast<double>(r.n);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  r.mean_difference = mean;
  const bool all_zero = std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; });
  if (all_zero) {
    r.t_statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }
  if (ss == 0.0) {
    r.degenerate = true;
    r.t_statistic = mean > 0 ? std::numeric_limits<double>::infinity()
                             : -std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    return r;
  }
  const double se = std::sqrt(ss / static_cast<double>(r.n - 1)) / std::sqrt(static_cast<double>(r.n));
  r.t_statistic = mean / se;
  r.p_value = std::clamp(t_two_sided_p(r.t_statistic, r.degrees_of_freedom), 0.0, 1.0);
  return r;
}

// Aligns two methods' results on (dataset, sample_id) and tests their Dice.
// Results without Dice are ignored; the remaining id sets must coincide.
inline PairwiseTest paired_t_test(const std::vector<SampleResult>& a,
                                  const std::vector<SampleResult>& b) {
  auto index = [](const std::vector<SampleResult>& rs) {
    std::map<std::pair<std::string, std::string>, double> out;
    for (const auto& r : rs) {
      if (!r.dice) continue;
      if (!out.emplace(std::pair{r.dataset, r.sample_id}, *r.dice).second) {
        throw PreconditionError("duplicate sample '" + r.sample_id + "' in one arm");
      }
    }
    return out;
  };
  const auto ia = index(a), ib = index(b);
  if (ia.size() != ib.size() ||
      !std::equal(ia.begin(), ia.end(), ib.begin(),
                  [](const auto& x, const auto& y) { return x.first == y.first; })) {
    throw PreconditionError("paired t-test arms cover different samples");
  }
  std::vector<double> va, vb;
  for (const auto& [k, v] : ia) va.push_back(v);
  for (const auto& [k, v] : ib) vb.push_back(v);
  auto r = paired_t_test(va, vb);
  if (!a.empty()) r.method_a = a.front().method;
  if (!b.empty()) r.method_b = b.front().method;
  return r;
}

// Aggregates for one method: pooled over every sample (the headline),
// per dataset, and the macro average of per-dataset means.
struct MethodReport {
  std::string method;
  MethodKind kind = MethodKind::tv_sam;
  Summary pooled;
  std::map<std::string, Summary> per_dataset;
  Summary macro;
  std::size_t samples = 0;
  std::size_t grounding_misses = 0;
  std::size_t backend_errors = 0;
};

inline MethodReport aggregate(const std::vector<SampleResult>& results) {
  if (results.empty()) throw PreconditionError("no results to aggregate");
  MethodReport rep;
  rep.method = results.front().method;
  rep.kind = results.front().kind;
  std::vector<double> pooled;
  std::map<std::string, std::vector<double>> by_dataset;
  for (const auto& r : results) {
    if (r.method != rep.method) {
      throw PreconditionError("cannot aggregate mixed methods '" + rep.method + "' and '" + r.method + "'");
    }
    ++rep.samples;
    rep.grounding_misses += r.grounding_miss ? 1 : 0;
    rep.backend_errors += r.backend_error ? 1 : 0;
    if (!r.dice) continue;
    pooled.push_back(*r.dice);
    by_dataset[r.dataset].push_back(*r.dice);
  }
  if (pooled.empty()) throw PreconditionError("method '" + rep.method + "' has no scored samples");
  rep.pooled = summarize(pooled);
  std::vector<double> means;
  for (const auto& [name, values] : by_dataset) {
    rep.per_dataset[name] = summarize(values);
    means.push_back(rep.per_dataset[name].mean);
  }
  rep.macro = summarize(means);
  return rep;
}

}  // namespace tvseg::stats

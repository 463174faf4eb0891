#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "ccbo/error.hpp"

namespace ccbo {

/// Trapezoid area with unit spacing. Non-finite entries (the no-feasible
/// sentinel) are replaced by sentinel_cap. A single point has area 0.
inline double auc_trapezoid(std::span<const double> curve,
                            double sentinel_cap = std::numeric_limits<double>::infinity()) {
  if (curve.empty()) throw DomainError("auc_trapezoid: empty curve");
  auto val = [&](double r) { return std::isfinite(r) ? r : sentinel_cap; };
  double area = 0.0;
  for (std::size_t t = 0; t + 1 < curve.size(); ++t) {
    area += 0.5 * (val(curve[t]) + val(curve[t + 1]));
  }
  return area;
}

enum class Alternative { less, greater };

struct MannWhitneyResult {
  double u = 0.0;  // U statistic of the first sample
  double p = 1.0;
  bool exact = false;
};

namespace detail {

/// Midranks (1-based) of the pooled sample.
inline std::vector<double> midranks(const std::vector<double>& pooled) {
  std::vector<std::size_t> idx(pooled.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto i, auto j) { return pooled[i] < pooled[j]; });
  std::vector<double> ranks(pooled.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && pooled[idx[j + 1]] == pooled[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Number of rank arrangements giving each U value, for samples of size m, n
/// (no ties). Entry u is the count with U = u.
inline std::vector<double> u_distribution(std::size_t m, std::size_t n) {
  // f[m][n][u] = f[m-1][n][u-n] + f[m][n-1][u]
  const std::size_t umax = m * n;
  std::vector<std::vector<std::vector<double>>> f(
      m + 1, std::vector<std::vector<double>>(n + 1));
  for (std::size_t i = 0; i <= m; ++i) {
    for (std::size_t j = 0; j <= n; ++j) {
      f[i][j].assign(i * j + 1, 0.0);
      if (i == 0 || j == 0) {
        f[i][j][0] = 1.0;
        continue;
      }
      for (std::size_t u = 0; u <= i * j; ++u) {
        double c = 0.0;
        if (u >= j && u - j <= (i - 1) * j) c += f[i - 1][j][u - j];
        if (u <= i * (j - 1)) c += f[i][j - 1][u];
        f[i][j][u] = c;
      }
    }
  }
  auto out = f[m][n];
  out.resize(umax + 1, 0.0);
  return out;
}

} // namespace detail

/// One-tailed Mann-Whitney U test. `less` tests whether a tends to be smaller
/// than b. Exact p by enumeration when |a| + |b| <= 20 and there are no ties;
/// otherwise the normal approximation with tie and continuity corrections.
inline MannWhitneyResult mann_whitney_u_one_tailed(std::span<const double> a,
                                                   std::span<const double> b,
                                                   Alternative alternative = Alternative::less) {
  if (a.empty() || b.empty()) throw DomainError("mann_whitney: samples must be non-empty");
  const std::size_t m = a.size();
  const std::size_t n = b.size();
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = detail::midranks(pooled);
  const double rank_sum_a = std::accumulate(ranks.begin(), ranks.begin() + static_cast<long>(m), 0.0);
  const double md = static_cast<double>(m);
  const double nd = static_cast<double>(n);
  MannWhitneyResult res;
  res.u = rank_sum_a - md * (md + 1.0) / 2.0;

  // tie groups
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  bool ties = false;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    if (t > 1) ties = true;
    tie_term += t * t * t - t;
    i = j + 1;
  }

  if (m + n <= 20 && !ties) {
    const auto dist = detail::u_distribution(m, n);
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    const auto u_obs = static_cast<std::size_t>(std::llround(res.u));
    double tail = 0.0;
    if (alternative == Alternative::less) {
      for (std::size_t u = 0; u <= u_obs; ++u) tail += dist[u];
    } else {
      for (std::size_t u = u_obs; u < dist.size(); ++u) tail += dist[u];
    }
    res.p = tail / total;
    res.exact = true;
    return res;
  }

  const double big_n = md + nd;
  const double var = md * nd / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
  if (!(var > 0.0)) {
    res.p = 1.0;
    return res;
  }
  const double mu = md * nd / 2.0;
  const double z = alternative == Alternative::less ? (res.u - mu + 0.5) / std::sqrt(var)
                                                    : (res.u - mu - 0.5) / std::sqrt(var);
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  res.p = alternative == Alternative::less ? cdf : 1.0 - cdf;
  res.p = std::clamp(res.p, std::numeric_limits<double>::min(), 1.0);
  return res;
}

inline double mean_of(std::span<const double> x) {
  return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Sample standard deviation (n - 1); 0 for fewer than two values.
inline double sd_of(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double mu = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - mu) * (v - mu);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

inline double median_of(std::vector<double> x) {
  if (x.empty()) throw DomainError("median: empty sample");
  std::sort(x.begin(), x.end());
  const std::size_t k = x.size() / 2;
  return x.size() % 2 == 1 ? x[k] : 0.5 * (x[k - 1] + x[k]);
}

} // namespace ccbo

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <numeric>
#include <vector>

namespace ccbo {

struct BoxBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const {
    return x.cwiseMax(lower).cwiseMin(upper);
  }
};

struct MaximizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double initial_value = 0.0;
  int iterations = 0;
};

/// Nelder-Mead ascent inside a box (vertices are projected onto the box).
/// The best vertex never gets worse, so value >= initial_value.
inline MaximizeResult nelder_mead_maximize(const std::function<double(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& start, const BoxBounds& box,
                                           double initial_step, int max_iterations,
                                           double tolerance = 1e-7) {
  const Eigen::Index n = start.size();
  // Minimize -f; non-finite values count as -inf.
  auto g = [&](const Eigen::VectorXd& x) {
    const double v = f(x);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };

  std::vector<Eigen::VectorXd> simplex;
  std::vector<double> vals;
  simplex.push_back(box.clamp(start));
  vals.push_back(g(simplex.back()));
  const double start_value = -vals.back();
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd v = simplex.front();
    v[i] += (v[i] + initial_step <= box.upper[i]) ? initial_step : -initial_step;
    simplex.push_back(box.clamp(v));
    vals.push_back(g(simplex.back()));
  }

  std::vector<std::size_t> order(simplex.size());
  int it = 0;
  for (; it < max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[order.size() - 2];
    if (std::isfinite(vals[worst]) && std::abs(vals[worst] - vals[best]) <=
                                          tolerance * (1.0 + std::abs(vals[best]))) {
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = box.clamp(centroid + (centroid - simplex[worst]));
    const double fr = g(reflected);
    if (fr < vals[best]) {
      const Eigen::VectorXd expanded = box.clamp(centroid + 2.0 * (centroid - simplex[worst]));
      const double fe = g(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        vals[worst] = fe;
      } else {
        simplex[worst] = reflected;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second_worst]) {
      simplex[worst] = reflected;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const Eigen::VectorXd contracted =
        outside ? box.clamp(centroid + 0.5 * (reflected - centroid))
                : box.clamp(centroid + 0.5 * (simplex[worst] - centroid));
    const double fc = g(contracted);
    if (fc < std::min(fr, vals[worst])) {
      simplex[worst] = contracted;
      vals[worst] = fc;
      continue;
    }
    // shrink towards the best vertex
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i == best) continue;
      simplex[i] = box.clamp(simplex[best] + 0.5 * (simplex[i] - simplex[best]));
      vals[i] = g(simplex[i]);
    }
  }

  const auto best = static_cast<std::size_t>(
      std::min_element(vals.begin(), vals.end()) - vals.begin());
  return {simplex[best], -vals[best], start_value, it};
}

} // namespace ccbo

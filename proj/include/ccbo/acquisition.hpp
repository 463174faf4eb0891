#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ccbo/design_space.hpp"
#include "ccbo/error.hpp"
#include "ccbo/gp_classification.hpp"
#include "ccbo/gp_regression.hpp"
#include "ccbo/sobol.hpp"

namespace ccbo {

enum class AcquisitionMode { qEI, qEIConstrained, qEICF, qEICFConstrained };

inline bool is_constrained(AcquisitionMode m) {
  return m == AcquisitionMode::qEIConstrained || m == AcquisitionMode::qEICFConstrained;
}
inline bool is_composite(AcquisitionMode m) {
  return m == AcquisitionMode::qEICF || m == AcquisitionMode::qEICFConstrained;
}

/// Incumbent used when no feasible observation exists yet.
inline constexpr double kNoIncumbent = std::numeric_limits<double>::lowest();

struct AcquisitionConfig {
  std::size_t mc_samples = 512;
  std::size_t q = 2;
  double target = 0.0;     // composite modes only, raw units
  double incumbent = kNoIncumbent;  // best observed objective, raw units
  AcquisitionMode mode = AcquisitionMode::qEICFConstrained;

  void validate() const {
    if (mc_samples < 1) throw DomainError("acquisition: mc_samples must be >= 1");
    if (q < 1) throw DomainError("acquisition: q must be >= 1");
    if (is_composite(mode) && incumbent > 0.0) {
      throw DomainError("acquisition: composite incumbent must be <= 0");
    }
  }
};

// ---- Monte-Carlo estimators --------------------------------------------------

/// Per-draw, per-point improvement max(y - g*, 0), N x q.
inline Eigen::MatrixXd improvement(const Eigen::MatrixXd& samples, double incumbent) {
  return (samples.array() - incumbent).cwiseMax(0.0).matrix();
}

/// Composite improvement max(-(s - s0)^2 - g*, 0), N x q.
inline Eigen::MatrixXd composite_improvement(const Eigen::MatrixXd& size_samples, double target,
                                             double incumbent) {
  return (-(size_samples.array() - target).square() - incumbent).cwiseMax(0.0).matrix();
}

/// (1/N) sum_i max_j p_j * I_ij. Terms are divided by N before summing so
/// the no-incumbent sentinel cannot overflow.
inline double apply_constraint(const Eigen::MatrixXd& improvements,
                               const Eigen::VectorXd& p_feasible) {
  if (improvements.rows() == 0 || improvements.cols() == 0) {
    throw DomainError("acquisition: empty samples");
  }
  if (p_feasible.size() != improvements.cols()) {
    throw DomainError("acquisition: need one feasibility probability per batch point");
  }
  const double inv_n = 1.0 / static_cast<double>(improvements.rows());
  double total = 0.0;
  for (Eigen::Index i = 0; i < improvements.rows(); ++i) {
    double best = 0.0;
    for (Eigen::Index j = 0; j < improvements.cols(); ++j) {
      best = std::max(best, p_feasible[j] * improvements(i, j));
    }
    total += best * inv_n;
  }
  return total;
}

inline double qei(const Eigen::MatrixXd& samples, double incumbent) {
  return apply_constraint(improvement(samples, incumbent),
                          Eigen::VectorXd::Ones(samples.cols()));
}

inline double qei_cf(const Eigen::MatrixXd& size_samples, double target, double incumbent) {
  return apply_constraint(composite_improvement(size_samples, target, incumbent),
                          Eigen::VectorXd::Ones(size_samples.cols()));
}

// ---- batch evaluation and optimization -----------------------------------------

/// Objective surrogate plus the affine map back to raw units (the model is
/// trained on standardized targets).
struct ObjectiveSurrogate {
  const GPModel* model = nullptr;
  double mean = 0.0;
  double scale = 1.0;
};

struct BatchProposal {
  std::vector<DesignPoint> points;
  std::vector<EncodedPoint> encoded;
  double value = 0.0;
  std::vector<double> feasibility;
  bool exploration_fallback = false;
};

struct AcquisitionOptimizerOptions {
  std::size_t random_starts = 64;   // per categorical assignment
  std::size_t polished_starts = 16;  // best starts refined by coordinate descent
  double initial_step = 0.1;
  double min_step = 1e-4;
  std::size_t max_evaluations_per_polish = 2000;
};

/// Acquisition value of q encoded candidates against fixed base samples.
class BatchAcquisition {
public:
  BatchAcquisition(ObjectiveSurrogate objective, const VGPModel* classifier,
                   AcquisitionConfig config, Eigen::MatrixXd base_samples)
      : objective_(objective), classifier_(classifier), config_(config),
        base_(std::move(base_samples)) {
    config_.validate();
    if (objective_.model == nullptr) throw DomainError("acquisition: objective model required");
    if (is_constrained(config_.mode) && classifier_ == nullptr) {
      throw DomainError("acquisition: constrained mode requires a classifier");
    }
  }

  const AcquisitionConfig& config() const { return config_; }
  const Eigen::MatrixXd& base_samples() const { return base_; }

  Eigen::VectorXd feasibility(const EncodedBatch& x) const {
    if (!is_constrained(config_.mode)) return Eigen::VectorXd::Ones(x.rows());
    return classifier_->prob_feasible(x);
  }

  double operator()(const EncodedBatch& x) const {
    const PosteriorGaussian post = objective_.model->posterior(x);
    Eigen::MatrixXd draws = sample_posterior(post, base_);
    draws = (draws.array() * objective_.scale + objective_.mean).matrix();
    const Eigen::MatrixXd imp =
        is_composite(config_.mode)
            ? composite_improvement(draws, config_.target, config_.incumbent)
            : improvement(draws, config_.incumbent);
    return apply_constraint(imp, feasibility(x));
  }

private:
  ObjectiveSurrogate objective_;
  const VGPModel* classifier_;
  AcquisitionConfig config_;
  Eigen::MatrixXd base_;
};

namespace detail {

/// Every joint categorical assignment for a q-batch.
inline std::vector<Eigen::MatrixXi> categorical_assignments(const DesignSpace& space,
                                                            std::size_t q) {
  const auto dk = static_cast<Eigen::Index>(space.categorical_dims());
  std::vector<int> radix;
  for (std::size_t j = 0; j < q; ++j) {
    for (std::size_t i : space.categorical_indices()) {
      radix.push_back(static_cast<int>(space.variables()[i].categories.size()));
    }
  }
  std::vector<Eigen::MatrixXi> out;
  std::vector<int> digit(radix.size(), 0);
  while (true) {
    Eigen::MatrixXi m(static_cast<Eigen::Index>(q), dk);
    for (std::size_t k = 0; k < digit.size(); ++k) {
      m(static_cast<Eigen::Index>(k) / std::max<Eigen::Index>(dk, 1),
        static_cast<Eigen::Index>(k) % std::max<Eigen::Index>(dk, 1)) = digit[k];
    }
    out.push_back(m);
    std::size_t k = 0;
    while (k < digit.size() && ++digit[k] == radix[k]) digit[k++] = 0;
    if (k == digit.size()) break;
  }
  return out;
}

/// One sweep of +-step trials over every continuous coordinate, keeping each
/// improvement as it is found.
template <typename F>
double explore(F&& f, EncodedBatch& x, double value, double step, std::size_t& evals) {
  for (Eigen::Index r = 0; r < x.continuous.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.continuous.cols(); ++c) {
      const double orig = x.continuous(r, c);
      for (double dir : {1.0, -1.0}) {
        const double cand = std::clamp(orig + dir * step, 0.0, 1.0);
        if (cand == orig) continue;
        x.continuous(r, c) = cand;
        const double v = f(x);
        ++evals;
        if (v > value) {
          value = v;
          break;
        }
        x.continuous(r, c) = orig;
      }
    }
  }
  return value;
}

/// Coordinate search with a shrinking step plus Hooke-Jeeves pattern moves,
/// which follow ridges that single-coordinate moves only zig-zag along.
template <typename F>
double polish(F&& f, EncodedBatch& x, double value, const AcquisitionOptimizerOptions& opt) {
  std::size_t evals = 0;
  double step = opt.initial_step;
  while (step >= opt.min_step && evals < opt.max_evaluations_per_polish) {
    EncodedBatch base = x;
    const double v = explore(f, x, value, step, evals);
    if (!(v > value)) {
      step *= 0.5;
      continue;
    }
    value = v;
    while (evals < opt.max_evaluations_per_polish) {
      EncodedBatch trial = x;
      trial.continuous = (2.0 * x.continuous - base.continuous).cwiseMax(0.0).cwiseMin(1.0);
      double vt = f(trial);
      ++evals;
      vt = explore(f, trial, vt, step, evals);
      if (!(vt > value)) break;
      base = std::move(x);
      x = std::move(trial);
      value = vt;
    }
  }
  return value;
}

} // namespace detail

/// Enumerates joint categorical assignments; within each, screens random
/// continuous starts and polishes the best few by coordinate search with a
/// shrinking step. Base samples are fixed for the whole call, so the surface
/// is deterministic.
inline BatchProposal optimize_acquisition(ObjectiveSurrogate objective, const VGPModel* classifier,
                                          const DesignSpace& space, const AcquisitionConfig& config,
                                          std::uint64_t seed,
                                          const AcquisitionOptimizerOptions& opt = {}) {
  config.validate();
  const BatchAcquisition acq(objective, classifier, config,
                             sobol_normal_samples(config.mc_samples, config.q, seed));
  const auto q = static_cast<Eigen::Index>(config.q);
  const auto dc = static_cast<Eigen::Index>(space.continuous_dims());

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  struct Candidate {
    EncodedBatch x;
    double value;
  };

  auto search = [&](auto&& f) {
    Candidate best{{}, -std::numeric_limits<double>::infinity()};
    for (const auto& cats : detail::categorical_assignments(space, config.q)) {
      std::vector<Candidate> starts;
      starts.reserve(opt.random_starts);
      for (std::size_t s = 0; s < opt.random_starts; ++s) {
        EncodedBatch x;
        x.categorical = cats;
        x.continuous.resize(q, dc);
        for (Eigen::Index i = 0; i < x.continuous.size(); ++i) x.continuous.data()[i] = unif(rng);
        const double v = f(x);
        starts.push_back({std::move(x), v});
      }
      std::stable_sort(starts.begin(), starts.end(),
                       [](const Candidate& a, const Candidate& b) { return a.value > b.value; });
      const std::size_t n_polish = std::min(opt.polished_starts, starts.size());
      for (std::size_t s = 0; s < n_polish; ++s) {
        auto& c = starts[s];
        c.value = detail::polish(f, c.x, c.value, opt);
      }
      for (auto& c : starts) {
        if (c.value > best.value) best = c;
      }
    }
    return best;
  };

  Candidate best = search([&](const EncodedBatch& x) { return acq(x); });

  BatchProposal out;
  if (!(best.value > 0.0)) {
    out.exploration_fallback = true;
    best = search([&](const EncodedBatch& x) {
      return classifier != nullptr ? classifier->prob_feasible(x).sum() : 0.0;
    });
    best.value = acq(best.x);
  }
  out.value = std::max(best.value, 0.0);
  const Eigen::VectorXd p = classifier != nullptr ? classifier->prob_feasible(best.x)
                                                  : Eigen::VectorXd::Ones(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    out.encoded.push_back(best.x.point(j));
    out.points.push_back(from_unit(out.encoded.back(), space));
    out.feasibility.push_back(p[j]);
  }
  return out;
}

} // namespace ccbo

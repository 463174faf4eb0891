#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ccbo/acquisition.hpp"
#include "ccbo/design_space.hpp"
#include "ccbo/error.hpp"
#include "ccbo/gp_classification.hpp"
#include "ccbo/gp_regression.hpp"
#include "ccbo/simulator.hpp"

namespace ccbo {

enum class StrategyKind { Random, VanillaBO, ConstrainedBO, CCBO };

inline const std::vector<StrategyKind>& all_strategies() {
  static const std::vector<StrategyKind> all{StrategyKind::Random, StrategyKind::VanillaBO,
                                             StrategyKind::ConstrainedBO, StrategyKind::CCBO};
  return all;
}

inline std::string to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::Random: return "random";
    case StrategyKind::VanillaBO: return "vanilla";
    case StrategyKind::ConstrainedBO: return "constrained";
    case StrategyKind::CCBO: return "ccbo";
  }
  return "unknown";
}

inline StrategyKind parse_strategy(const std::string& s) {
  for (auto k : all_strategies()) {
    if (to_string(k) == s) return k;
  }
  if (s == "vanilla-bo" || s == "VanillaBO") return StrategyKind::VanillaBO;
  if (s == "constrained-bo" || s == "ConstrainedBO") return StrategyKind::ConstrainedBO;
  if (s == "CCBO") return StrategyKind::CCBO;
  if (s == "Random") return StrategyKind::Random;
  throw DomainError("unknown strategy '" + s + "' (expected random, vanilla, constrained, ccbo)");
}

inline bool uses_model(StrategyKind k) { return k != StrategyKind::Random; }

struct Observation {
  DesignPoint point;
  double size = 0.0;  // um; recorded for infeasible runs too
  bool feasible = false;
  std::string label;

  bool operator==(const Observation&) const = default;
};

inline constexpr double kMaxTarget = 100.0;

struct CampaignState {
  DesignSpace space;
  double target = 0.0;
  StrategyKind strategy = StrategyKind::CCBO;
  std::vector<Observation> observations;
  int iteration = 0;
  std::uint64_t seed = 0;
  /// Incumbent/regret over feasible observations only (default) or all.
  bool feasible_only_regret = true;

  void validate() const {
    if (!(target > 0.0 && target <= kMaxTarget)) {
      throw DomainError("target must lie in (0, " + std::to_string(kMaxTarget) + "] um");
    }
  }
};

// ---- incumbent / regret / stopping ----------------------------------------------

struct Incumbent {
  double value = 0.0;        // g* = -(s - s0)^2 <= 0
  std::size_t index = 0;     // into observations
};

inline std::optional<Incumbent> incumbent(const CampaignState& state) {
  std::optional<Incumbent> best;
  for (std::size_t i = 0; i < state.observations.size(); ++i) {
    const auto& o = state.observations[i];
    if (state.feasible_only_regret && !o.feasible) continue;
    const double g = -(o.size - state.target) * (o.size - state.target);
    if (!best || g > best->value) best = Incumbent{g, i};
  }
  return best;
}

/// min |s - s0| over counted observations; +inf when there is none.
inline double regret(const CampaignState& state) {
  double r = std::numeric_limits<double>::infinity();
  for (const auto& o : state.observations) {
    if (state.feasible_only_regret && !o.feasible) continue;
    r = std::min(r, std::abs(o.size - state.target));
  }
  return r;
}

inline bool check_stopping(const CampaignState& state, double tolerance_fraction = 0.10) {
  if (!(tolerance_fraction > 0.0)) {
    throw DomainError("check_stopping: tolerance fraction must be > 0");
  }
  return regret(state) <= tolerance_fraction * state.target;
}

// ---- suggest ------------------------------------------------------------------------

struct StrategyOptions {
  std::size_t mc_samples = 512;
  GPFitOptions gp;
  ClassifierFitOptions classifier;
  AcquisitionOptimizerOptions optimizer;
  /// Records the objective model's worst training-target residual.
  bool verify_interpolation = false;
};

struct Suggestion {
  std::vector<DesignPoint> points;
  double acquisition_value = 0.0;
  std::vector<double> feasibility;
  bool exploration_fallback = false;
  std::optional<double> interpolation_error;  // standardized units
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// q new design points from the campaign's strategy. Pure in (state, options).
inline Suggestion suggest(const CampaignState& state, std::size_t q,
                          const StrategyOptions& options = {}) {
  if (q < 1) throw DomainError("suggest: q must be >= 1");
  state.validate();
  const std::uint64_t seed = mix_seed(state.seed, static_cast<std::uint64_t>(state.iteration));

  Suggestion out;
  if (state.strategy == StrategyKind::Random) {
    std::mt19937_64 rng(seed);
    out.points = uniform_sample(state.space, q, rng);
    out.feasibility.assign(q, 1.0);
    return out;
  }
  if (state.observations.size() < 2) {
    throw StateError("suggest: model-based strategies need at least 2 observations; "
                     "run a Sobol initial design first");
  }

  std::vector<EncodedPoint> x;
  std::vector<double> targets;
  Eigen::VectorXd labels(static_cast<Eigen::Index>(state.observations.size()));
  for (std::size_t i = 0; i < state.observations.size(); ++i) {
    const auto& o = state.observations[i];
    x.push_back(to_unit(o.point, state.space));
    if (state.strategy == StrategyKind::CCBO) {
      targets.push_back(o.size);
    } else {
      targets.push_back(-(o.size - state.target) * (o.size - state.target));
    }
    labels[static_cast<Eigen::Index>(i)] = o.feasible ? 1.0 : -1.0;
  }
  const Standardized z = standardize(targets);
  const EncodedBatch batch = EncodedBatch::from_points(x);

  GPFitOptions gp_opt = options.gp;
  gp_opt.seed = mix_seed(seed, 1);
  const GPModel objective =
      fit(batch, Eigen::Map<const Eigen::VectorXd>(z.values.data(),
                                                   static_cast<Eigen::Index>(z.values.size())),
          gp_opt);
  if (options.verify_interpolation) out.interpolation_error = objective.interpolation_error();

  std::optional<VGPModel> classifier;
  const bool constrained = state.strategy != StrategyKind::VanillaBO;
  if (constrained) {
    ClassifierFitOptions c_opt = options.classifier;
    c_opt.seed = mix_seed(seed, 2);
    classifier = fit_classifier(batch, labels, c_opt);
  }

  AcquisitionConfig cfg;
  cfg.mc_samples = options.mc_samples;
  cfg.q = q;
  cfg.target = state.target;
  const auto inc = incumbent(state);
  cfg.incumbent = inc ? inc->value : kNoIncumbent;
  switch (state.strategy) {
    case StrategyKind::VanillaBO: cfg.mode = AcquisitionMode::qEI; break;
    case StrategyKind::ConstrainedBO: cfg.mode = AcquisitionMode::qEIConstrained; break;
    default: cfg.mode = AcquisitionMode::qEICFConstrained; break;
  }

  const BatchProposal prop =
      optimize_acquisition({&objective, z.mean, z.scale}, classifier ? &*classifier : nullptr,
                           state.space, cfg, mix_seed(seed, 3), options.optimizer);
  out.points = prop.points;
  out.acquisition_value = prop.value;
  out.feasibility = prop.feasibility;
  out.exploration_fallback = prop.exploration_fallback;
  return out;
}

} // namespace ccbo

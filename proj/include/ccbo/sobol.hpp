#pragma once

#include <boost/math/distributions/normal.hpp>
#include <boost/random/sobol.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

#include "ccbo/error.hpp"

namespace ccbo {

/// Sobol points in [0,1)^d with optional random digital shift.
///
/// Seed 0 yields the plain sequence (Joe-Kuo direction numbers, as shipped by
/// Boost.Random). Any other seed XORs every coordinate with a per-dimension
/// 32-bit mask drawn from that seed, which keeps the (t,m,s)-net structure
/// while decorrelating independent designs.
class ScrambledSobol {
public:
  ScrambledSobol(std::size_t dims, std::uint64_t seed)
      : engine_(dims), masks_(dims, 0u) {
    if (dims == 0) {
      throw DomainError("sobol: dimension must be at least 1");
    }
    if (seed != 0) {
      std::mt19937_64 rng(seed);
      for (auto& m : masks_) {
        m = static_cast<std::uint32_t>(rng() >> 32);
      }
    }
  }

  std::size_t dims() const { return masks_.size(); }

  /// Next point. Coordinates are cell midpoints at 2^-32 resolution, so they
  /// never hit exactly 0 or 1. The origin comes first (Boost starts at index
  /// 1), so every block of 2^m points is a complete net.
  std::vector<double> next() {
    std::vector<double> out(masks_.size());
    const bool origin = !started_;
    started_ = true;
    for (std::size_t k = 0; k < masks_.size(); ++k) {
      const std::uint32_t v = (origin ? 0u : engine_()) ^ masks_[k];
      out[k] = (static_cast<double>(v) + 0.5) * 0x1p-32;
    }
    return out;
  }

private:
  boost::random::sobol_engine<std::uint32_t, 32> engine_;
  std::vector<std::uint32_t> masks_;
  bool started_ = false;
};

/// n x d matrix of quasi-random standard normal draws: scrambled Sobol
/// pushed through the normal quantile.
inline Eigen::MatrixXd sobol_normal_samples(std::size_t n, std::size_t d,
                                            std::uint64_t seed) {
  ScrambledSobol sobol(d, seed == 0 ? 1 : seed);
  const boost::math::normal_distribution<double> std_normal;
  Eigen::MatrixXd z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const auto u = sobol.next();
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      z(i, j) = boost::math::quantile(std_normal, u[static_cast<std::size_t>(j)]);
    }
  }
  return z;
}

} // namespace ccbo

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "ccbo/error.hpp"
#include "ccbo/kernel.hpp"
#include "ccbo/optimize.hpp"

namespace ccbo {

/// Joint Gaussian over a batch of q query points.
struct PosteriorGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  Eigen::Index size() const { return mean.size(); }
};

struct GPFitOptions {
  int restarts = 8;
  int max_iterations = 200;
  std::uint64_t seed = 0;
  /// Fixed observation noise in standardized units (noiseless data); escalated
  /// x10 up to max_noise when the covariance will not factor.
  double noise = 1e-6;
  double max_noise = 1e-2;
  double min_output_scale = 1e-2;
  double max_output_scale = 1e2;
  double init_lengthscale_low = 0.05;
  double init_lengthscale_high = 2.0;
};

/// Log marginal likelihood at the start and end of one local ascent.
struct RestartTrace {
  double initial_lml = 0.0;
  double final_lml = 0.0;
};

/// Exact GP regression with constant mean and the mixed kernel. Immutable
/// once fitted; posterior queries are const and thread-safe.
class GPModel {
public:
  GPModel(EncodedBatch x, Eigen::VectorXd y, KernelParams params, double max_noise = 1e-2)
      : x_(std::move(x)), y_(std::move(y)), params_(std::move(params)), max_noise_(max_noise) {
    if (x_.rows() != y_.size() || y_.size() == 0) {
      throw DomainError("gp: need |X| = |y| >= 1");
    }
    params_.validate();
    refactor();
  }

  const EncodedBatch& inputs() const { return x_; }
  const Eigen::VectorXd& targets() const { return y_; }
  const KernelParams& params() const { return params_; }
  double mean_constant() const { return mean_; }
  double noise() const { return noise_; }
  double log_marginal_likelihood() const { return lml_; }
  const std::vector<RestartTrace>& restarts() const { return restarts_; }

  PosteriorGaussian posterior(const EncodedBatch& xq) const {
    if (xq.rows() < 1) {
      throw DomainError("posterior: need at least one query point");
    }
    const Eigen::MatrixXd ks = cross_covariance(x_, xq, params_);  // n x q
    PosteriorGaussian post;
    post.mean = (ks.transpose() * alpha_).array() + mean_;
    const Eigen::MatrixXd v = chol_.matrixL().solve(ks);
    post.covariance = cross_covariance(xq, xq, params_) - v.transpose() * v;
    post.covariance = 0.5 * (post.covariance + post.covariance.transpose());
    for (Eigen::Index i = 0; i < post.covariance.rows(); ++i) {
      post.covariance(i, i) = std::max(post.covariance(i, i), 0.0);
    }
    return post;
  }

  PosteriorGaussian posterior(const std::vector<EncodedPoint>& xq) const {
    return posterior(EncodedBatch::from_points(xq));
  }

  /// max |posterior mean - target| over the training inputs.
  double interpolation_error() const {
    const PosteriorGaussian post = posterior(x_);
    return (post.mean - y_).cwiseAbs().maxCoeff();
  }

  void set_restarts(std::vector<RestartTrace> r) { restarts_ = std::move(r); }

private:
  void refactor() {
    const Eigen::MatrixXd k = gram(x_, params_);
    auto f = try_jittered_cholesky(k, params_.jitter, max_noise_);
    if (!f) {
      throw FitError("gp: training covariance is singular after jitter escalation");
    }
    chol_ = std::move(f->llt);
    noise_ = f->jitter;
    const Eigen::Index n = y_.size();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd k_inv_one = chol_.solve(ones);
    // Generalized least squares estimate of the constant mean, the exact
    // maximizer of the marginal likelihood in that coordinate.
    mean_ = k_inv_one.dot(y_) / ones.dot(k_inv_one);
    const Eigen::VectorXd resid = (y_.array() - mean_).matrix();
    const Eigen::VectorXd a0 = chol_.solve(resid);
    alpha_ = refined_weights(k, resid, a0);
    const double log_det = 2.0 * chol_.matrixLLT().diagonal().array().log().sum();
    lml_ = -0.5 * resid.dot(a0) - 0.5 * log_det -
           0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  }

  /// Posterior-mean weights: refines the jittered solve a0 toward k a = r,
  /// using the jittered factor as preconditioner. a0 alone leaves a training
  /// residual of noise * a0, which reaches 1e-3 once long lengthscales make k
  /// ill-conditioned. Steps are kept only while they shrink the residual. The
  /// likelihood and posterior covariance keep the jittered matrix.
  Eigen::VectorXd refined_weights(const Eigen::MatrixXd& k, const Eigen::VectorXd& r,
                                  Eigen::VectorXd a) const {
    Eigen::VectorXd res = r - k * a;
    double norm = res.cwiseAbs().maxCoeff();
    for (int step = 0; step < kRefineSteps && norm > 1e-12; ++step) {
      const Eigen::VectorXd next = a + chol_.solve(res);
      const Eigen::VectorXd next_res = r - k * next;
      const double next_norm = next_res.cwiseAbs().maxCoeff();
      if (!(next_norm < norm)) break;
      a = next;
      res = next_res;
      norm = next_norm;
    }
    return a;
  }

  static constexpr int kRefineSteps = 8;

  EncodedBatch x_;
  Eigen::VectorXd y_;
  KernelParams params_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
  double max_noise_ = 1e-2;
  double mean_ = 0.0;
  double noise_ = 0.0;
  double lml_ = 0.0;
  std::vector<RestartTrace> restarts_;
};

namespace detail {

/// Rejects duplicate inputs with differing targets; merges exact duplicates.
inline void dedupe_training_set(EncodedBatch& x, Eigen::VectorXd& y) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    bool dup = false;
    for (Eigen::Index j : keep) {
      if (x.continuous.row(i) == x.continuous.row(j) &&
          x.categorical.row(i) == x.categorical.row(j)) {
        if (std::abs(y[i] - y[j]) > 1e-9 * (1.0 + std::abs(y[j]))) {
          std::ostringstream msg;
          msg << "gp: duplicate inputs at rows " << j << " and " << i
              << " carry different targets (" << y[j] << " vs " << y[i] << ")";
          throw FitError(msg.str());
        }
        dup = true;
        break;
      }
    }
    if (!dup) keep.push_back(i);
  }
  if (static_cast<Eigen::Index>(keep.size()) == x.rows()) return;
  EncodedBatch xs;
  xs.continuous.resize(static_cast<Eigen::Index>(keep.size()), x.continuous.cols());
  xs.categorical.resize(static_cast<Eigen::Index>(keep.size()), x.categorical.cols());
  Eigen::VectorXd ys(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    xs.continuous.row(row) = x.continuous.row(keep[r]);
    xs.categorical.row(row) = x.categorical.row(keep[r]);
    ys[row] = y[keep[r]];
  }
  x = std::move(xs);
  y = std::move(ys);
}

inline std::string closest_pair_message(const EncodedBatch& x) {
  double best = std::numeric_limits<double>::infinity();
  Eigen::Index bi = 0, bj = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < x.rows(); ++j) {
      if (x.categorical.row(i) != x.categorical.row(j)) continue;
      const double d = (x.continuous.row(i) - x.continuous.row(j)).norm();
      if (d < best) {
        best = d;
        bi = i;
        bj = j;
      }
    }
  }
  std::ostringstream msg;
  msg << "gp: training covariance singular after jitter escalation; nearest duplicate "
         "inputs are rows "
      << bi << " and " << bj << " (encoded distance " << best << ")";
  return msg.str();
}

/// Packs log output scale, log continuous lengthscales and (if any
/// categorical dims) log categorical lengthscale.
inline KernelParams unpack_kernel(const Eigen::VectorXd& theta, Eigen::Index dc, bool has_cat,
                                  double noise) {
  KernelParams p;
  p.output_scale = std::exp(theta[0]);
  p.continuous_lengthscales = theta.segment(1, dc).array().exp();
  p.categorical_lengthscale = has_cat ? std::exp(theta[1 + dc]) : 1.0;
  p.jitter = noise;
  return p;
}

} // namespace detail

/// Fits hyperparameters by multi-start Nelder-Mead on the log marginal
/// likelihood (log-parameter space, box-constrained). Deterministic in seed.
inline GPModel fit(EncodedBatch x, Eigen::VectorXd y, const GPFitOptions& opt = {}) {
  if (x.rows() != y.size() || y.size() < 1) {
    throw DomainError("fit: need |X| = |y| >= 1");
  }
  detail::dedupe_training_set(x, y);

  const Eigen::Index dc = x.continuous.cols();
  const bool has_cat = x.categorical.cols() > 0;
  const Eigen::Index dim = 1 + dc + (has_cat ? 1 : 0);
  BoxBounds box{Eigen::VectorXd(dim), Eigen::VectorXd(dim)};
  box.lower[0] = std::log(opt.min_output_scale);
  box.upper[0] = std::log(opt.max_output_scale);
  for (Eigen::Index k = 1; k < dim; ++k) {
    box.lower[k] = std::log(KernelParams::kMinLengthscale);
    box.upper[k] = std::log(KernelParams::kMaxLengthscale);
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto lml = [&](const Eigen::VectorXd& theta) {
    try {
      return GPModel(x, y, detail::unpack_kernel(theta, dc, has_cat, opt.noise), opt.max_noise)
          .log_marginal_likelihood();
    } catch (const FitError&) {
      return nan;
    }
  };

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> log_ls(std::log(opt.init_lengthscale_low),
                                                std::log(opt.init_lengthscale_high));
  std::uniform_real_distribution<double> log_scale(std::log(0.1), std::log(1.0));

  std::vector<RestartTrace> traces;
  Eigen::VectorXd best_theta;
  double best = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, opt.restarts); ++r) {
    Eigen::VectorXd theta0(dim);
    theta0[0] = log_scale(rng);
    for (Eigen::Index k = 1; k < dim; ++k) theta0[k] = log_ls(rng);
    const MaximizeResult res = nelder_mead_maximize(lml, theta0, box, 0.7, opt.max_iterations);
    traces.push_back({res.initial_value, res.value});
    if (std::isfinite(res.value) && res.value > best) {
      best = res.value;
      best_theta = res.x;
    }
  }
  if (best_theta.size() == 0) {
    throw FitError(detail::closest_pair_message(x));
  }
  GPModel model(std::move(x), std::move(y),
                detail::unpack_kernel(best_theta, dc, has_cat, opt.noise), opt.max_noise);
  model.set_restarts(std::move(traces));
  return model;
}

inline GPModel fit(const std::vector<EncodedPoint>& x, const std::vector<double>& y,
                   const GPFitOptions& opt = {}) {
  return fit(EncodedBatch::from_points(x),
             Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())),
             opt);
}

/// Lower Cholesky factor of a posterior covariance. Tries no jitter first,
/// then 1e-12 escalating x10 up to 1e-4 (relative to the mean diagonal).
inline Eigen::MatrixXd posterior_factor(const Eigen::MatrixXd& cov) {
  const double scale = std::max(1.0, cov.diagonal().mean());
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success && (llt.matrixLLT().diagonal().array() > 0.0).all()) {
    return llt.matrixL();
  }
  auto f = try_jittered_cholesky(cov, 1e-12 * scale, 1e-4 * scale);
  if (!f) {
    throw NumericError("sample_posterior: covariance factorization failed");
  }
  return f->llt.matrixL();
}

/// Reparameterized draws: row i is mean + L z_i.
inline Eigen::MatrixXd sample_posterior(const PosteriorGaussian& post,
                                        const Eigen::MatrixXd& base_samples) {
  if (base_samples.cols() != post.size()) {
    throw DomainError("sample_posterior: base samples must be N x q");
  }
  const Eigen::MatrixXd l = posterior_factor(post.covariance);
  Eigen::MatrixXd out = base_samples * l.transpose();
  out.rowwise() += post.mean.transpose();
  return out;
}

} // namespace ccbo

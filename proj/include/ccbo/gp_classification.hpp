#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "ccbo/error.hpp"
#include "ccbo/kernel.hpp"
#include "ccbo/optimize.hpp"

namespace ccbo {

// ---- probit helpers ---------------------------------------------------------

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

/// log Phi(z), accurate far into the lower tail.
inline double log_normal_cdf(double z) {
  if (z > -30.0) return std::log(normal_cdf(z));
  const double z2 = z * z;
  return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log1p((-1.0 + (3.0 + (-15.0 + (105.0 - 945.0 / z2) / z2) / z2) / z2) / z2);
}

/// phi(z) / Phi(z), given log Phi(z).
inline double inverse_mills(double z, double log_cdf) {
  return std::exp(-0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi) - log_cdf);
}

inline double inverse_mills(double z) { return inverse_mills(z, log_normal_cdf(z)); }

/// P(y = +1) under a probit link for a latent N(mean, var):
/// Phi(mean / sqrt(1 + var)).
inline double probit_probability(double latent_mean, double latent_var) {
  return normal_cdf(latent_mean / std::sqrt(1.0 + std::max(latent_var, 0.0)));
}

/// Gauss-Hermite rule for weight exp(-x^2) (Golub-Welsch).
template <int N>
struct GaussHermite {
  std::array<double, N> nodes{};
  std::array<double, N> weights{};

  GaussHermite() {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(N, N);
    for (int k = 1; k < N; ++k) {
      jac(k, k - 1) = jac(k - 1, k) = std::sqrt(k / 2.0);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    for (int k = 0; k < N; ++k) {
      nodes[static_cast<std::size_t>(k)] = es.eigenvalues()[k];
      const double v0 = es.eigenvectors()(0, k);
      weights[static_cast<std::size_t>(k)] = std::sqrt(std::numbers::pi) * v0 * v0;
    }
  }

  static const GaussHermite& instance() {
    static const GaussHermite rule;
    return rule;
  }
};

/// E[log Phi(y f)] for f ~ N(mean, var), plus its derivatives with respect to
/// mean (E[h']) and var (E[h''] / 2), by 20-node Gauss-Hermite.
struct ExpectedProbitLogLik {
  double value = 0.0;
  double d_mean = 0.0;
  double d2 = 0.0;  // E[h''], always negative
};

inline ExpectedProbitLogLik expected_probit_loglik(double y, double mean, double var) {
  const auto& gh = GaussHermite<20>::instance();
  const double sd = std::sqrt(2.0 * std::max(var, 0.0));
  ExpectedProbitLogLik out;
  for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
    const double f = mean + sd * gh.nodes[k];
    const double z = y * f;
    const double log_cdf = log_normal_cdf(z);
    const double r = inverse_mills(z, log_cdf);
    const double w = gh.weights[k] / std::sqrt(std::numbers::pi);
    out.value += w * log_cdf;
    out.d_mean += w * y * r;
    out.d2 += w * (-r * (z + r));
  }
  return out;
}

// ---- model --------------------------------------------------------------------

/// Variational GP classifier with probit likelihood; inducing inputs are the
/// training inputs. Labels are +1 (feasible) / -1 (infeasible).
class VGPModel {
public:
  VGPModel() = default;

  VGPModel(EncodedBatch inducing, KernelParams params, double mean_constant,
           Eigen::VectorXd m, Eigen::MatrixXd s)
      : x_(std::move(inducing)), params_(std::move(params)), mean_(mean_constant),
        m_(std::move(m)), s_(std::move(s)) {
    if (m_.size() != x_.rows() || s_.rows() != x_.rows() || s_.cols() != x_.rows()) {
      throw DomainError("vgp: variational parameters do not match inducing inputs");
    }
    prepare();
  }

  /// Model that ignores its inputs and reports 0.5 everywhere.
  static VGPModel uninformative(std::size_t continuous_dims, std::size_t categorical_dims) {
    VGPModel v;
    v.uninformative_ = true;
    v.params_ = KernelParams::defaults(continuous_dims);
    v.categorical_dims_ = categorical_dims;
    return v;
  }

  bool is_uninformative() const { return uninformative_; }
  const EncodedBatch& inducing_inputs() const { return x_; }
  const KernelParams& params() const { return params_; }
  double mean_constant() const { return mean_; }
  const Eigen::VectorXd& variational_mean() const { return m_; }
  const Eigen::MatrixXd& variational_covariance() const { return s_; }
  double initial_elbo() const { return initial_elbo_; }
  double final_elbo() const { return final_elbo_; }
  void set_elbo_trace(double initial, double final_value) {
    initial_elbo_ = initial;
    final_elbo_ = final_value;
  }

  /// Latent marginal mean and variance at each query row.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> latent(const EncodedBatch& xq) const {
    const Eigen::Index q = xq.rows();
    if (uninformative_) {
      return {Eigen::VectorXd::Zero(q), Eigen::VectorXd::Zero(q)};
    }
    const Eigen::MatrixXd ks = cross_covariance(x_, xq, params_);  // n x q
    Eigen::VectorXd mu = (ks.transpose() * a_).array() + mean_;
    Eigen::VectorXd var(q);
    for (Eigen::Index j = 0; j < q; ++j) {
      const double prior = params_.prior_variance();
      var[j] = std::max(prior - ks.col(j).dot(shrink_ * ks.col(j)), 0.0);
    }
    return {mu, var};
  }

  Eigen::VectorXd prob_feasible(const EncodedBatch& xq) const {
    if (uninformative_) return Eigen::VectorXd::Constant(xq.rows(), 0.5);
    const auto [mu, var] = latent(xq);
    Eigen::VectorXd p(mu.size());
    for (Eigen::Index i = 0; i < mu.size(); ++i) p[i] = probit_probability(mu[i], var[i]);
    return p;
  }

  Eigen::VectorXd prob_feasible(const std::vector<EncodedPoint>& xq) const {
    return prob_feasible(EncodedBatch::from_points(xq));
  }

private:
  void prepare() {
    const auto chol = jittered_cholesky(gram(x_, params_), params_.jitter, 1e-2);
    a_ = chol.llt.solve((m_.array() - mean_).matrix());
    const Eigen::MatrixXd k_inv = chol.llt.solve(Eigen::MatrixXd::Identity(x_.rows(), x_.rows()));
    // var(x*) = k** - k*^T (K^-1 - K^-1 S K^-1) k*
    shrink_ = k_inv - k_inv * s_ * k_inv;
  }

  EncodedBatch x_;
  KernelParams params_;
  double mean_ = 0.0;
  Eigen::VectorXd m_;
  Eigen::MatrixXd s_;
  Eigen::VectorXd a_;
  Eigen::MatrixXd shrink_;
  bool uninformative_ = false;
  std::size_t categorical_dims_ = 0;
  double initial_elbo_ = 0.0;
  double final_elbo_ = 0.0;
};

namespace detail {

/// ELBO with the prior covariance already factored.
/// Optionally reports d ELL / d m_i and -E[h''] per point.
inline double elbo_factored(const Eigen::LLT<Eigen::MatrixXd>& k_chol, double mean_constant,
                            const Eigen::VectorXd& m, const Eigen::MatrixXd& s,
                            const Eigen::VectorXd& y, Eigen::VectorXd* d_mean = nullptr,
                            Eigen::VectorXd* neg_d2 = nullptr) {
  const Eigen::Index n = m.size();
  if (y.size() != n || s.rows() != n || k_chol.rows() != n) {
    throw DomainError("elbo: dimension mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> ls(s);
  if (ls.info() != Eigen::Success || !(ls.matrixLLT().diagonal().array() > 0.0).all()) {
    throw NumericError("elbo: variational covariance is not positive definite");
  }
  if (d_mean != nullptr) d_mean->resize(n);
  if (neg_d2 != nullptr) neg_d2->resize(n);
  double ell = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto e = expected_probit_loglik(y[i], m[i], s(i, i));
    ell += e.value;
    if (d_mean != nullptr) (*d_mean)[i] = e.d_mean;
    if (neg_d2 != nullptr) (*neg_d2)[i] = -e.d2;
  }
  const auto lk = k_chol.matrixL();
  const Eigen::MatrixXd ls_mat = ls.matrixL();
  const double trace = lk.solve(ls_mat).squaredNorm();
  const double maha = lk.solve((m.array() - mean_constant).matrix()).squaredNorm();
  const double logdet_k = 2.0 * k_chol.matrixLLT().diagonal().array().log().sum();
  const double logdet_s = 2.0 * ls.matrixLLT().diagonal().array().log().sum();
  const double kl = 0.5 * (trace + maha - static_cast<double>(n) + logdet_k - logdet_s);
  return ell - kl;
}

} // namespace detail

/// Expected log-likelihood minus KL(q || prior), prior N(mean_constant, K).
/// Throws NumericError when S is not positive definite.
inline double elbo(const Eigen::MatrixXd& k_prior, double mean_constant,
                   const Eigen::VectorXd& m, const Eigen::MatrixXd& s,
                   const Eigen::VectorXd& y) {
  if (k_prior.rows() != m.size()) throw DomainError("elbo: dimension mismatch");
  const Eigen::LLT<Eigen::MatrixXd> kc(k_prior);
  if (kc.info() != Eigen::Success) throw NumericError("elbo: prior covariance not positive definite");
  return detail::elbo_factored(kc, mean_constant, m, s, y);
}

inline double elbo(const VGPModel& model, const EncodedBatch& x, const Eigen::VectorXd& y) {
  if (model.is_uninformative()) {
    throw StateError("elbo: uninformative model has no variational distribution");
  }
  Eigen::MatrixXd k = gram(x, model.params());
  k.diagonal().array() += model.params().jitter;
  return elbo(k, model.mean_constant(), model.variational_mean(),
              model.variational_covariance(), y);
}

struct ClassifierFitOptions {
  int restarts = 4;
  int max_iterations = 60;      // outer Nelder-Mead over kernel hyperparameters
  int inner_iterations = 60;    // natural-gradient steps on q(f)
  std::uint64_t seed = 0;
  double jitter = 1e-6;
  /// Cold-start rule: when every class has fewer than this many examples the
  /// fitted model is uninformative (p = 0.5 everywhere). One-sided data with
  /// enough examples is fitted.
  int min_per_class = 2;
  double init_lengthscale_low = 0.05;
  double init_lengthscale_high = 2.0;
};

namespace detail {

struct VariationalState {
  Eigen::VectorXd m;
  Eigen::VectorXd lambda;  // site precisions; S = (K^-1 + diag(lambda))^-1
  Eigen::MatrixXd s;
  double mean = 0.0;
  double elbo = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd d_mean;        // d ELL / d m
  Eigen::VectorXd target_lambda;  // -E[h''], the natural-gradient site precision
};

/// S = K - K L^1/2 B^-1 L^1/2 K with B = I + L^1/2 K L^1/2.
inline Eigen::MatrixXd site_covariance(const Eigen::MatrixXd& k, const Eigen::VectorXd& lambda) {
  const Eigen::VectorXd sl = lambda.cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd b = sl.asDiagonal() * k * sl.asDiagonal();
  b.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> lb(b);
  const Eigen::MatrixXd v = lb.matrixL().solve(sl.asDiagonal() * k);
  Eigen::MatrixXd s = k - v.transpose() * v;
  return 0.5 * (s + s.transpose());
}

inline double gls_mean(const Eigen::LLT<Eigen::MatrixXd>& kc, const Eigen::VectorXd& m) {
  const Eigen::VectorXd k_inv_one = kc.solve(Eigen::VectorXd::Ones(m.size()));
  return k_inv_one.dot(m) / k_inv_one.sum();
}

/// Maximizes the ELBO over q(f) and the mean constant for fixed kernel
/// hyperparameters. Every accepted step increases the ELBO.
inline VariationalState optimize_variational(const Eigen::MatrixXd& k, const Eigen::VectorXd& y,
                                             int iterations) {
  const Eigen::Index n = y.size();
  const Eigen::LLT<Eigen::MatrixXd> kc(k);
  auto score = [&](VariationalState& st) {
    try {
      st.elbo = elbo_factored(kc, st.mean, st.m, st.s, y, &st.d_mean, &st.target_lambda);
    } catch (const NumericError&) {
      st.elbo = -std::numeric_limits<double>::infinity();
    }
  };

  VariationalState st;
  st.mean = 0.0;
  st.m = Eigen::VectorXd::Zero(n);
  st.lambda = Eigen::VectorXd::Zero(n);
  st.s = k;
  score(st);

  for (int it = 0; it < iterations; ++it) {
    if (!std::isfinite(st.elbo)) break;
    const Eigen::VectorXd grad_m = st.d_mean - kc.solve((st.m.array() - st.mean).matrix());

    bool accepted = false;
    for (double rho = 1.0; rho >= 1.0 / 256.0; rho *= 0.5) {
      VariationalState cand;
      cand.lambda = (1.0 - rho) * st.lambda + rho * st.target_lambda;
      cand.s = site_covariance(k, cand.lambda);
      cand.m = st.m + rho * (cand.s * grad_m);
      cand.mean = gls_mean(kc, cand.m);
      score(cand);
      if (cand.elbo > st.elbo) {
        const double gain = cand.elbo - st.elbo;
        st = std::move(cand);
        accepted = true;
        if (gain < 1e-8 * (1.0 + std::abs(st.elbo))) it = iterations;
        break;
      }
    }
    if (!accepted) break;
  }
  return st;
}

inline KernelParams classifier_kernel(const Eigen::VectorXd& theta, Eigen::Index dc, bool has_cat,
                                      double jitter) {
  KernelParams p;
  p.output_scale = std::exp(theta[0]);
  p.continuous_lengthscales = theta.segment(1, dc).array().exp();
  p.categorical_lengthscale = has_cat ? std::exp(theta[1 + dc]) : 1.0;
  p.jitter = jitter;
  return p;
}

} // namespace detail

/// Fits kernel hyperparameters (multi-start Nelder-Mead, outer) jointly with
/// the variational distribution and mean constant (natural-gradient ascent,
/// inner) by maximizing the ELBO.
inline VGPModel fit_classifier(const EncodedBatch& x, const Eigen::VectorXd& y,
                               const ClassifierFitOptions& opt = {}) {
  if (x.rows() == 0 || y.size() == 0) {
    throw DomainError("fit_classifier: empty data");
  }
  if (x.rows() != y.size()) {
    throw DomainError("fit_classifier: need |X| = |y|");
  }
  int pos = 0, neg = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == 1.0) {
      ++pos;
    } else if (y[i] == -1.0) {
      ++neg;
    } else {
      throw DomainError("fit_classifier: labels must be -1 or +1");
    }
  }
  const auto dc = x.continuous.cols();
  if (pos < opt.min_per_class && neg < opt.min_per_class) {
    return VGPModel::uninformative(static_cast<std::size_t>(dc),
                                   static_cast<std::size_t>(x.categorical.cols()));
  }

  const bool has_cat = x.categorical.cols() > 0;
  const Eigen::Index dim = 1 + dc + (has_cat ? 1 : 0);
  BoxBounds box{Eigen::VectorXd(dim), Eigen::VectorXd(dim)};
  box.lower[0] = std::log(1e-2);
  box.upper[0] = std::log(1e2);
  for (Eigen::Index k = 1; k < dim; ++k) {
    box.lower[k] = std::log(KernelParams::kMinLengthscale);
    box.upper[k] = std::log(KernelParams::kMaxLengthscale);
  }

  auto prior_cov = [&](const Eigen::VectorXd& theta) {
    Eigen::MatrixXd k = gram(x, detail::classifier_kernel(theta, dc, has_cat, opt.jitter));
    k.diagonal().array() += opt.jitter;
    return k;
  };
  auto objective = [&](const Eigen::VectorXd& theta) {
    return detail::optimize_variational(prior_cov(theta), y, opt.inner_iterations).elbo;
  };

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> log_ls(std::log(opt.init_lengthscale_low),
                                                std::log(opt.init_lengthscale_high));
  std::uniform_real_distribution<double> log_scale(std::log(0.3), std::log(3.0));

  Eigen::VectorXd best_theta;
  double best = -std::numeric_limits<double>::infinity();
  double initial = std::numeric_limits<double>::quiet_NaN();
  for (int r = 0; r < std::max(1, opt.restarts); ++r) {
    Eigen::VectorXd theta0(dim);
    theta0[0] = log_scale(rng);
    for (Eigen::Index k = 1; k < dim; ++k) theta0[k] = log_ls(rng);
    if (r == 0) {
      // ELBO of the prior as the variational distribution at the first start.
      const Eigen::MatrixXd k0 = prior_cov(theta0);
      initial = elbo(k0, 0.0, Eigen::VectorXd::Zero(y.size()), k0, y);
    }
    const auto res = nelder_mead_maximize(objective, theta0, box, 0.7, opt.max_iterations, 1e-6);
    if (std::isfinite(res.value) && res.value > best) {
      best = res.value;
      best_theta = res.x;
    }
  }
  if (best_theta.size() == 0) {
    throw FitError("fit_classifier: ELBO is not finite for any restart");
  }
  const Eigen::MatrixXd k = prior_cov(best_theta);
  auto st = detail::optimize_variational(k, y, opt.inner_iterations);
  VGPModel model(x, detail::classifier_kernel(best_theta, dc, has_cat, opt.jitter), st.mean,
                 std::move(st.m), std::move(st.s));
  model.set_elbo_trace(initial, st.elbo);
  return model;
}

inline Eigen::VectorXd prob_feasible(const VGPModel& model, const EncodedBatch& xq) {
  return model.prob_feasible(xq);
}

} // namespace ccbo

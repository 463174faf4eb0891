#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "ccbo/design_space.hpp"
#include "ccbo/error.hpp"

namespace ccbo {

/// Hyperparameters of the mixed Matern-5/2 + Hamming kernel.
///
/// A single output scale multiplies the whole mixed kernel, so the prior
/// variance at any point is 3 * output_scale.
struct KernelParams {
  double output_scale = 1.0;
  Eigen::VectorXd continuous_lengthscales;
  double categorical_lengthscale = 1.0;
  double jitter = 1e-6;

  static constexpr double kMinLengthscale = 5e-3;
  static constexpr double kMaxLengthscale = 10.0;

  static KernelParams defaults(std::size_t continuous_dims) {
    KernelParams p;
    p.continuous_lengthscales = Eigen::VectorXd::Constant(
        static_cast<Eigen::Index>(continuous_dims), 0.5);
    return p;
  }

  double prior_variance() const { return 3.0 * output_scale; }

  void validate() const {
    auto bad = [](double v) { return !(v > 0.0) || !std::isfinite(v); };
    if (bad(output_scale) || bad(categorical_lengthscale) || bad(jitter)) {
      throw DomainError("kernel parameters must be strictly positive");
    }
    for (Eigen::Index i = 0; i < continuous_lengthscales.size(); ++i) {
      if (bad(continuous_lengthscales[i])) {
        throw DomainError("kernel lengthscales must be strictly positive");
      }
    }
  }
};

/// Closed form of the Matern kernel at nu = 5/2:
/// (1 + sqrt5 r + 5 r^2 / 3) exp(-sqrt5 r), r the lengthscale-scaled distance.
inline double matern52_of_distance(double r) {
  const double s5r = std::sqrt(5.0) * r;
  return (1.0 + s5r + s5r * s5r / 3.0) * std::exp(-s5r);
}

template <typename A, typename B>
double kernel_matern52(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b,
                       const Eigen::VectorXd& lengthscales) {
  if (a.size() != b.size() || a.size() != lengthscales.size()) {
    throw DomainError("matern52: dimension mismatch");
  }
  double r2 = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double d = (a(k) - b(k)) / lengthscales[k];
    r2 += d * d;
  }
  return matern52_of_distance(std::sqrt(r2));
}

/// exp(-HD / lengthscale) with HD the fraction of differing coordinates.
template <typename A, typename B>
double kernel_hamming(const A& a, const B& b, double lengthscale) {
  const auto n = static_cast<Eigen::Index>(std::size(a));
  if (n != static_cast<Eigen::Index>(std::size(b))) {
    throw DomainError("hamming: arity mismatch");
  }
  if (n == 0) return 1.0;
  Eigen::Index differ = 0;
  auto ia = std::begin(a);
  auto ib = std::begin(b);
  for (; ia != std::end(a); ++ia, ++ib) {
    if (*ia != *ib) ++differ;
  }
  return std::exp(-(static_cast<double>(differ) / static_cast<double>(n)) / lengthscale);
}

/// output_scale * (k_mat + k_ham + k_mat * k_ham)
inline double combine_mixed(double k_mat, double k_ham, double output_scale) {
  return output_scale * (k_mat + k_ham + k_mat * k_ham);
}

inline double kernel_mixed(const EncodedPoint& p1, const EncodedPoint& p2,
                           const KernelParams& params) {
  if (p1.continuous.size() != p2.continuous.size() ||
      p1.categorical.size() != p2.categorical.size()) {
    throw DomainError("kernel_mixed: points come from different spaces");
  }
  const double km = kernel_matern52(p1.continuous, p2.continuous, params.continuous_lengthscales);
  const double kh = kernel_hamming(p1.categorical, p2.categorical, params.categorical_lengthscale);
  return combine_mixed(km, kh, params.output_scale);
}

/// Row-major bundle of encoded inputs, the layout the models work on.
struct EncodedBatch {
  Eigen::MatrixXd continuous;   // n x d_c, in [0,1]
  Eigen::MatrixXi categorical;  // n x d_k, category indices

  Eigen::Index rows() const { return continuous.rows(); }

  static EncodedBatch from_points(const std::vector<EncodedPoint>& pts) {
    EncodedBatch b;
    const auto n = static_cast<Eigen::Index>(pts.size());
    const Eigen::Index dc = pts.empty() ? 0 : pts.front().continuous.size();
    const auto dk = pts.empty() ? Eigen::Index{0}
                                : static_cast<Eigen::Index>(pts.front().categorical.size());
    b.continuous.resize(n, dc);
    b.categorical.resize(n, dk);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& p = pts[static_cast<std::size_t>(i)];
      if (p.continuous.size() != dc || static_cast<Eigen::Index>(p.categorical.size()) != dk) {
        throw DomainError("encoded batch: inconsistent point dimensions");
      }
      b.continuous.row(i) = p.continuous.transpose();
      for (Eigen::Index k = 0; k < dk; ++k) {
        b.categorical(i, k) = p.categorical[static_cast<std::size_t>(k)];
      }
    }
    return b;
  }

  EncodedPoint point(Eigen::Index i) const {
    EncodedPoint p;
    p.continuous = continuous.row(i).transpose();
    for (Eigen::Index k = 0; k < categorical.cols(); ++k) p.categorical.push_back(categorical(i, k));
    return p;
  }
};

/// Cross-covariance K(A, B) under the mixed kernel.
inline Eigen::MatrixXd cross_covariance(const EncodedBatch& a, const EncodedBatch& b,
                                        const KernelParams& params) {
  if (a.continuous.cols() != b.continuous.cols() ||
      a.categorical.cols() != b.categorical.cols() ||
      params.continuous_lengthscales.size() != a.continuous.cols()) {
    throw DomainError("cross_covariance: dimension mismatch");
  }
  const Eigen::Index dk = a.categorical.cols();
  const Eigen::RowVectorXd inv_ls = params.continuous_lengthscales.cwiseInverse().transpose();
  const Eigen::MatrixXd as = a.continuous.array().rowwise() * inv_ls.array();
  const Eigen::MatrixXd bs = b.continuous.array().rowwise() * inv_ls.array();
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double r = (as.row(i) - bs.row(j)).norm();
      double kh = 1.0;
      if (dk > 0) {
        Eigen::Index differ = 0;
        for (Eigen::Index c = 0; c < dk; ++c) {
          differ += a.categorical(i, c) != b.categorical(j, c);
        }
        kh = std::exp(-(static_cast<double>(differ) / static_cast<double>(dk)) /
                      params.categorical_lengthscale);
      }
      k(i, j) = combine_mixed(matern52_of_distance(r), kh, params.output_scale);
    }
  }
  return k;
}

inline Eigen::MatrixXd gram(const EncodedBatch& x, const KernelParams& params) {
  Eigen::MatrixXd k = cross_covariance(x, x, params);
  return 0.5 * (k + k.transpose());
}

struct JitteredCholesky {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

/// Cholesky of k + jitter * I, multiplying the jitter by 10 on failure until
/// max_jitter. Returns nullopt when even max_jitter fails.
inline std::optional<JitteredCholesky> try_jittered_cholesky(const Eigen::MatrixXd& k,
                                                             double jitter, double max_jitter) {
  const Eigen::Index n = k.rows();
  for (double j = jitter; j <= max_jitter * (1.0 + 1e-12); j *= 10.0) {
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += j;
    JitteredCholesky out{Eigen::LLT<Eigen::MatrixXd>(kj), j};
    if (out.llt.info() == Eigen::Success) {
      const auto& l = out.llt.matrixLLT();
      bool ok = true;
      for (Eigen::Index i = 0; i < n && ok; ++i) {
        ok = std::isfinite(l(i, i)) && l(i, i) > 0.0;
      }
      if (ok) return out;
    }
  }
  return std::nullopt;
}

inline JitteredCholesky jittered_cholesky(const Eigen::MatrixXd& k, double jitter,
                                          double max_jitter) {
  auto f = try_jittered_cholesky(k, jitter, max_jitter);
  if (!f) {
    throw NumericError("cholesky failed after jitter escalation to " +
                       std::to_string(max_jitter));
  }
  return std::move(*f);
}

} // namespace ccbo

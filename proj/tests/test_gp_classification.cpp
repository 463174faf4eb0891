#include <gtest/gtest.h>

#include <random>

#include "ccbo/gp_classification.hpp"

using namespace ccbo;

namespace {

EncodedBatch line_batch(const std::vector<double>& xs) {
  EncodedBatch b;
  b.continuous.resize(static_cast<Eigen::Index>(xs.size()), 1);
  b.categorical.resize(static_cast<Eigen::Index>(xs.size()), 0);
  for (std::size_t i = 0; i < xs.size(); ++i) b.continuous(static_cast<Eigen::Index>(i), 0) = xs[i];
  return b;
}

} // namespace

TEST(Probit, NormalCdfTableValues) {
  EXPECT_NEAR(normal_cdf(1.0), 0.8413447460685429, 1e-15);
  EXPECT_NEAR(normal_cdf(1.0), 0.8413, 5e-5);
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_cdf(-1.96), 0.024997895148220435, 1e-15);
}

TEST(Probit, LogCdfIsAccurateInTheFarTail) {
  EXPECT_NEAR(log_normal_cdf(-40.0), -804.6084420137539, 1e-9);
  EXPECT_NEAR(log_normal_cdf(-5.0), std::log(normal_cdf(-5.0)), 1e-12);
  EXPECT_NEAR(log_normal_cdf(3.0), std::log(normal_cdf(3.0)), 1e-14);
  // inverse Mills ratio phi/Phi tends to -z
  EXPECT_NEAR(inverse_mills(-50.0), 50.0, 0.1);
}

TEST(Probit, HalfAtZeroLatentMeanForAnyVariance) {
  for (double v : {0.0, 1e-6, 0.5, 3.0, 100.0}) EXPECT_EQ(probit_probability(0.0, v), 0.5);
  EXPECT_NEAR(probit_probability(1.0, 0.0), normal_cdf(1.0), 1e-15);
  EXPECT_NEAR(probit_probability(1.0, 3.0), normal_cdf(0.5), 1e-15);
}

TEST(Probit, GaussHermiteIntegratesPolynomialsExactly) {
  // E[f^4] for f ~ N(mu, s^2) = mu^4 + 6 mu^2 s^2 + 3 s^4
  const auto& gh = GaussHermite<20>::instance();
  const double mu = 0.7, s = 1.3;
  double acc = 0.0;
  for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
    const double f = mu + std::sqrt(2.0) * s * gh.nodes[k];
    acc += gh.weights[k] * std::pow(f, 4) / std::sqrt(std::numbers::pi);
  }
  EXPECT_NEAR(acc, std::pow(mu, 4) + 6 * mu * mu * s * s + 3 * std::pow(s, 4), 1e-10);
}

TEST(Probit, ExpectedLogLikGradientMatchesFiniteDifference) {
  for (double y : {1.0, -1.0}) {
    const double m = 0.4, v = 0.8, h = 1e-5;
    const auto e = expected_probit_loglik(y, m, v);
    const double fd = (expected_probit_loglik(y, m + h, v).value -
                       expected_probit_loglik(y, m - h, v).value) / (2 * h);
    EXPECT_NEAR(e.d_mean, fd, 1e-6);
  }
}

TEST(VGP, ElboMatchesIndependentQuadrature) {
  // Same setting as the regression oracle; expectation terms by adaptive
  // quadrature, KL in closed form, computed separately.
  EncodedBatch x;
  x.continuous.resize(4, 2);
  x.continuous << 0.1, 0.2, 0.4, 0.9, 0.7, 0.3, 0.95, 0.6;
  x.categorical.resize(4, 1);
  x.categorical << 0, 1, 0, 1;
  KernelParams p;
  p.output_scale = 1.3;
  p.continuous_lengthscales = Eigen::Vector2d(0.4, 0.7);
  p.categorical_lengthscale = 0.8;
  Eigen::MatrixXd k = gram(x, p);
  k.diagonal().array() += 1e-6;
  Eigen::Matrix4d s;
  s << 0.31, 0.09, 0.005, 0.0, 0.09, 0.2225, 0.05, 0.005, 0.005, 0.05, 0.4225, 0.09, 0.0, 0.005,
      0.09, 0.15;
  const Eigen::Vector4d m(0.3, -0.2, 0.5, 0.1);
  const Eigen::Vector4d y(1, -1, 1, 1);
  EXPECT_NEAR(elbo(k, 0.2, m, s, y), -5.70427594816085, 1e-6);
}

TEST(VGP, SeparableDataGivesConfidentProbabilities) {
  const EncodedBatch x = line_batch({0.0, 0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9, 1.0});
  Eigen::VectorXd y(10);
  y << -1, -1, -1, -1, -1, 1, 1, 1, 1, 1;
  const VGPModel m = fit_classifier(x, y);
  const Eigen::VectorXd p = m.prob_feasible(line_batch({0.0, 0.05, 0.95, 1.0}));
  EXPECT_LT(p[0], 0.1);
  EXPECT_LT(p[1], 0.1);
  EXPECT_GT(p[2], 0.9);
  EXPECT_GT(p[3], 0.9);
  EXPECT_GT(m.final_elbo(), m.initial_elbo());
}

TEST(VGP, LabelFlipSymmetry) {
  const EncodedBatch x = line_batch({0.0, 0.15, 0.3, 0.5, 0.55, 0.8, 1.0});
  Eigen::VectorXd y(7);
  y << -1, -1, 1, -1, 1, 1, 1;
  ClassifierFitOptions opt;
  opt.seed = 9;
  const VGPModel a = fit_classifier(x, y, opt);
  const VGPModel b = fit_classifier(x, -y, opt);
  const EncodedBatch q = line_batch({0.05, 0.4, 0.52, 0.9});
  const Eigen::VectorXd pa = a.prob_feasible(q);
  const Eigen::VectorXd pb = b.prob_feasible(q);
  for (Eigen::Index i = 0; i < pa.size(); ++i) EXPECT_NEAR(pa[i] + pb[i], 1.0, 1e-6);
}

TEST(VGP, ColdStartIsUninformative) {
  const EncodedBatch x = line_batch({0.1, 0.9});
  const Eigen::Vector2d y(1, -1);  // one example of each class
  const VGPModel m = fit_classifier(x, y);
  EXPECT_TRUE(m.is_uninformative());
  const Eigen::VectorXd p = m.prob_feasible(line_batch({0.0, 0.9}));
  EXPECT_EQ(p[0], 0.5);
  EXPECT_EQ(p[1], 0.5);
  EXPECT_THROW(elbo(m, x, y), StateError);
}

TEST(VGP, SingleClassDataLeansTowardThatClass) {
  const EncodedBatch x = line_batch({0.1, 0.3, 0.5, 0.7, 0.9});
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(5);
  const VGPModel m = fit_classifier(x, y);
  EXPECT_FALSE(m.is_uninformative());
  const Eigen::VectorXd p = m.prob_feasible(x);
  for (Eigen::Index i = 0; i < p.size(); ++i) EXPECT_GT(p[i], 0.5);
}

TEST(VGP, OneFeasibleAmongManyFailuresIsFitted) {
  const EncodedBatch x = line_batch({0.0, 0.1, 0.2, 0.3, 0.4, 0.9});
  Eigen::VectorXd y(6);
  y << -1, -1, -1, -1, -1, 1;
  const VGPModel m = fit_classifier(x, y);
  EXPECT_FALSE(m.is_uninformative());
  const Eigen::VectorXd p = m.prob_feasible(line_batch({0.05, 0.9}));
  EXPECT_LT(p[0], 0.5);
  EXPECT_GT(p[1], p[0]);
}

TEST(VGP, RejectsBadLabels) {
  const EncodedBatch x = line_batch({0.1, 0.3});
  EXPECT_THROW(fit_classifier(x, Eigen::Vector2d(1.0, 0.0)), DomainError);
  EXPECT_THROW(fit_classifier(x, Eigen::Vector3d(1, 1, -1)), DomainError);
  EXPECT_THROW(fit_classifier(line_batch({}), Eigen::VectorXd()), DomainError);
}

TEST(VGP, ProbabilitiesStayInUnitIntervalProperty) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> xs;
  Eigen::VectorXd y(12);
  for (int i = 0; i < 12; ++i) {
    xs.push_back(u(rng));
    y[i] = u(rng) < 0.5 ? 1.0 : -1.0;
  }
  y[0] = 1;
  y[1] = 1;
  y[2] = -1;
  y[3] = -1;
  const VGPModel m = fit_classifier(line_batch(xs), y);
  std::vector<double> grid;
  for (int i = 0; i <= 50; ++i) grid.push_back(i / 50.0);
  const Eigen::VectorXd p = m.prob_feasible(line_batch(grid));
  EXPECT_TRUE((p.array() > 0.0).all() && (p.array() < 1.0).all());
}

TEST(Probit, ExpectedLogLikMatchesMonteCarlo) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> nd;
  for (const auto& [y, m, v] : {std::tuple{1.0, 1.0, 0.3}, std::tuple{-1.0, -0.5, 0.2},
                                std::tuple{1.0, 0.0, 0.1}}) {
    const int n = 1000000;
    double acc = 0.0, acc2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double h = log_normal_cdf(y * (m + std::sqrt(v) * nd(rng)));
      acc += h;
      acc2 += h * h;
    }
    const double mc = acc / n;
    const double se = std::sqrt((acc2 / n - mc * mc) / n);
    ASSERT_LT(se, 3e-4);  // the oracle itself resolves 1e-3
    EXPECT_NEAR(expected_probit_loglik(y, m, v).value, mc, 1e-3);
  }
}

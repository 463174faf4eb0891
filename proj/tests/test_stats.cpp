#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "ccbo/stats.hpp"

using namespace ccbo;

TEST(Auc, HandValues) {
  EXPECT_DOUBLE_EQ(auc_trapezoid(std::vector<double>{4, 2, 0}), 4.0);
  EXPECT_DOUBLE_EQ(auc_trapezoid(std::vector<double>(11, 2.0)), 20.0);
  EXPECT_DOUBLE_EQ(auc_trapezoid(std::vector<double>{3.5}), 0.0);
  EXPECT_THROW(auc_trapezoid(std::vector<double>{}), DomainError);
}

TEST(Auc, SentinelUsesCap) {
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_DOUBLE_EQ(auc_trapezoid(std::vector<double>{inf, 2, 0}, 10.0), 6.0 + 1.0);
}

TEST(Auc, NonIncreasingCurveBoundProperty) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> c{5.0 * u(rng)};
    for (int i = 0; i < 10; ++i) c.push_back(c.back() * u(rng));
    EXPECT_LE(auc_trapezoid(c), c.front() * 10.0 + 1e-12);
    EXPECT_GE(auc_trapezoid(c), 0.0);
  }
}

TEST(MannWhitney, TwoVersusTwoExact) {
  const auto r = mann_whitney_u_one_tailed(std::vector<double>{1, 2}, std::vector<double>{3, 4});
  EXPECT_DOUBLE_EQ(r.u, 0.0);
  EXPECT_NEAR(r.p, 1.0 / 6.0, 1e-15);
  EXPECT_TRUE(r.exact);
}

TEST(MannWhitney, ExactMatchesReferenceValue) {
  // Independent reference implementation: U = 8, p = 0.12337662337662336
  const auto r = mann_whitney_u_one_tailed(std::vector<double>{0.3, 1.7, 2.2, 4.1, 5.0},
                                           std::vector<double>{1.1, 2.9, 3.3, 6.4, 7.7, 8.0});
  EXPECT_DOUBLE_EQ(r.u, 8.0);
  EXPECT_NEAR(r.p, 0.12337662337662336, 1e-14);
}

TEST(MannWhitney, NormalApproximationWithTiesMatchesReference) {
  // Tie-corrected, continuity-corrected reference: U = 44.5, p = 0.03591740013717158
  const std::vector<double> a{1, 2, 2, 3, 5, 5, 7, 8, 9, 9, 10, 11};
  const std::vector<double> b{2, 4, 5, 6, 6, 8, 9, 12, 13, 14, 15, 15, 16};
  const auto r = mann_whitney_u_one_tailed(a, b);
  EXPECT_FALSE(r.exact);
  EXPECT_DOUBLE_EQ(r.u, 44.5);
  EXPECT_NEAR(r.p, 0.03591740013717158, 1e-12);
}

TEST(MannWhitney, ExhaustiveEnumerationUpToSixBySix) {
  // Brute force: enumerate every way to choose which m of the m + n ranks
  // belong to sample a; p = fraction with U <= observed.
  for (std::size_t m = 1; m <= 6; ++m) {
    for (std::size_t n = 1; n <= 6; ++n) {
      const std::size_t total = m + n;
      std::vector<double> all_u;
      for (unsigned mask = 0; mask < (1u << total); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != m) continue;
        double rank_sum = 0;
        for (std::size_t i = 0; i < total; ++i) rank_sum += (mask >> i & 1u) ? double(i + 1) : 0.0;
        all_u.push_back(rank_sum - double(m * (m + 1)) / 2.0);
      }
      for (unsigned mask = 0; mask < (1u << total); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != m) continue;
        std::vector<double> a, b;
        for (std::size_t i = 0; i < total; ++i) ((mask >> i & 1u) ? a : b).push_back(double(i) * 1.5 + 0.25);
        const auto r = mann_whitney_u_one_tailed(a, b);
        const double brute =
            double(std::count_if(all_u.begin(), all_u.end(), [&](double u) { return u <= r.u; })) /
            double(all_u.size());
        ASSERT_TRUE(r.exact);
        ASSERT_NEAR(r.p, brute, 1e-12) << "m=" << m << " n=" << n << " mask=" << mask;
      }
    }
  }
}

TEST(MannWhitney, IdenticalConstantsGiveNoEvidence) {
  const auto r = mann_whitney_u_one_tailed(std::vector<double>(5, 2.0), std::vector<double>(7, 2.0));
  EXPECT_GE(r.p, 0.5);
}

TEST(MannWhitney, SameDistributionIsNearHalfOnAverage) {
  // Permutation oracle: under exchangeability the p-value of the
  // asymptotic test averages 0.5 over random splits.
  std::mt19937_64 rng(21);
  std::normal_distribution<double> nd;
  std::vector<double> pool(400);
  for (auto& v : pool) v = nd(rng);
  double acc = 0;
  const int reps = 200;
  for (int t = 0; t < reps; ++t) {
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::vector<double> a(pool.begin(), pool.begin() + 200);
    const std::vector<double> b(pool.begin() + 200, pool.end());
    acc += mann_whitney_u_one_tailed(a, b).p;
  }
  EXPECT_NEAR(acc / reps, 0.5, 0.05);
}

TEST(MannWhitney, GreaterIsMirrorOfLess) {
  const std::vector<double> a{5, 6, 7};
  const std::vector<double> b{1, 2, 3, 4};
  EXPECT_NEAR(mann_whitney_u_one_tailed(a, b, Alternative::greater).p,
              mann_whitney_u_one_tailed(b, a, Alternative::less).p, 1e-15);
  EXPECT_THROW(mann_whitney_u_one_tailed(std::vector<double>{}, b), DomainError);
}

TEST(Summary, MeanSdMedian) {
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(mean_of(x), 2.5);
  EXPECT_NEAR(sd_of(x), 1.2909944487358056, 1e-15);
  EXPECT_DOUBLE_EQ(median_of(x), 2.5);
  EXPECT_DOUBLE_EQ(median_of({3, 1, 2}), 2.0);
}

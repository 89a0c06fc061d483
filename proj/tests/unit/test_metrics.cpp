#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mmw/metrics.hpp"
#include "support.hpp"

using namespace mmw;

TEST(Metrics, ProportionalFairnessExamples) {
  const std::vector<double> ones(20, 1.0);
  EXPECT_DOUBLE_EQ(proportional_fairness(ones), 0.0);
  const std::vector<double> r{std::exp(1.0), std::exp(2.0), 1.0};
  EXPECT_NEAR(proportional_fairness(r), 3.0, 1e-14);
  const std::vector<double> zero{1.0, 0.0};
  EXPECT_THROW(proportional_fairness(zero), std::domain_error);
  const std::vector<double> negative{1.0, -1.0};
  EXPECT_THROW(proportional_fairness(negative), std::domain_error);
}

TEST(Metrics, GeometricMeanIsExpOfMeanLog) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.01, 20.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> r(1 + trial % 25);
    double prod = 1.0;
    for (auto& x : r) {
      x = u(rng);
      prod *= x;
    }
    const double geo = geometric_mean_rate(r);
    EXPECT_NEAR(geo, std::pow(prod, 1.0 / r.size()), 1e-12 * geo);
    EXPECT_NEAR(std::log(geo) * r.size(), proportional_fairness(r), 1e-12 * std::max(1.0, std::abs(proportional_fairness(r))));
  }
  const std::vector<double> two{2.0, 8.0};
  EXPECT_NEAR(geometric_mean_rate(two), 4.0, 1e-14);
}

TEST(Metrics, ChordalDistanceExamples) {
  CMatrix h = CMatrix::Zero(4, 4);
  h(0, 0) = 1.0;
  h(1, 1) = 2.0;                     // orthogonal to user 0
  h(0, 2) = cplx(0.0, 3.0);          // parallel to user 0
  h(0, 3) = 1.0;
  h(1, 3) = 1.0;                     // 45 degrees from user 0
  const std::vector<int> orth{0, 1};
  const std::vector<int> par{0, 2};
  const std::vector<int> diag{0, 3};
  const std::vector<int> single{2};
  const std::vector<int> all{0, 1, 2, 3};
  EXPECT_NEAR(min_chordal_distance(h, orth), 1.0, 1e-15);
  EXPECT_NEAR(min_chordal_distance(h, par), 0.0, 1e-7);
  EXPECT_NEAR(min_chordal_distance(h, diag), std::sqrt(0.5), 1e-15);
  EXPECT_EQ(min_chordal_distance(h, single), 1.0);
  EXPECT_NEAR(min_chordal_distance(h, all), 0.0, 1e-7);
}

TEST(Metrics, ChordalDistanceIsScaleInvariantAndBounded) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    CMatrix h = fixtures::random_unit_columns(rng, 16, 5);
    const std::vector<int> users{0, 2, 4};
    const double d = min_chordal_distance(h, users);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
    h.col(2) *= cplx(5.0, -2.0);
    EXPECT_NEAR(min_chordal_distance(h, users), d, 1e-12);
  }
}

TEST(Metrics, ChordalDistanceRejectsZeroChannel) {
  const CMatrix h = CMatrix::Zero(4, 2);
  const std::vector<int> users{0, 1};
  EXPECT_THROW(min_chordal_distance(h, users), std::domain_error);
}

TEST(Metrics, CdfIsSortedAndEndsAtOne) {
  const std::vector<double> v{3.0, 1.0, 2.0, 2.0};
  const auto cdf = rate_cdf(v);
  ASSERT_EQ(cdf.size(), 4u);
  EXPECT_EQ(cdf[0].value, 1.0);
  EXPECT_EQ(cdf[3].value, 3.0);
  EXPECT_DOUBLE_EQ(cdf[0].percentile, 0.25);
  EXPECT_DOUBLE_EQ(cdf[3].percentile, 1.0);
  for (std::size_t k = 1; k < cdf.size(); ++k) {
    EXPECT_LE(cdf[k - 1].value, cdf[k].value);
    EXPECT_LT(cdf[k - 1].percentile, cdf[k].percentile);
  }
  EXPECT_THROW(rate_cdf(std::vector<double>{}), std::invalid_argument);
}

TEST(Metrics, PercentileInterpolates) {
  EXPECT_DOUBLE_EQ(percentile({4.0, 1.0, 3.0, 2.0}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(percentile({4.0, 1.0, 3.0, 2.0}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(percentile({4.0, 1.0, 3.0, 2.0}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(percentile({7.0}, 0.9), 7.0);
  EXPECT_DOUBLE_EQ(percentile({}, 0.5), 0.0);
}

TEST(Metrics, ReportAggregatesEpisodes) {
  MetricReport r;
  r.episodes = {{0, 1.0, 2.0, 3.0, 0.5, 10.0}, {1, 3.0, 4.0, 5.0, 0.7, 20.0}};
  r.slot_times_us = {1.0, 2.0, 3.0};
  r.finalize();
  EXPECT_DOUBLE_EQ(r.mean_pf, 2.0);
  EXPECT_DOUBLE_EQ(r.mean_geo_mean, 3.0);
  EXPECT_DOUBLE_EQ(r.mean_selected, 4.0);
  EXPECT_DOUBLE_EQ(r.mean_min_chordal, 0.6);
  EXPECT_DOUBLE_EQ(r.time_p50_us, 2.0);
}

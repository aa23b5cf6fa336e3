#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "steerseg/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace steerseg;
using numerics::DenseGrid;
using testing_support::random_blob;
using testing_support::random_mask;
namespace oracle = testing_support::oracle;

TEST(Metrics, JAndFMatchBruteForceOnRandomPairs) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = 6 + rng() % 20, w = 6 + rng() % 20;
    const bool blobs = trial % 2 == 0;
    const auto a = blobs ? random_blob(rng, h, w) : random_mask(rng, h, w, 0.5);
    const auto b = blobs ? random_blob(rng, h, w) : random_mask(rng, h, w, 0.5);
    const int tol = int(rng() % 4);
    EXPECT_NEAR(metrics::j_metric(a, b), oracle::jaccard(a, b), 1e-9);
    EXPECT_NEAR(metrics::f_metric(a, b, tol), oracle::f_measure(a, b, tol), 1e-9);
  }
}

TEST(Metrics, JFIsExactMeanOfJAndF) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<DenseGrid> p, g;
    for (int t = 0; t < 4; ++t) {
      p.push_back(random_blob(rng, 12, 12));
      g.push_back(random_blob(rng, 12, 12));
    }
    const auto s = metrics::score_video(p, g, 1);
    EXPECT_EQ(s.jf, (s.j + s.f) / 2.0);
  }
}

TEST(Metrics, DefaultToleranceFollowsDiagonal) {
  EXPECT_EQ(metrics::default_tolerance(64, 64), 1);
  EXPECT_EQ(metrics::default_tolerance(480, 854), 8);  // 0.008 * 979.6 = 7.84
  EXPECT_EQ(metrics::default_tolerance(2, 2), 1);
}

TEST(Metrics, BoundaryEdgeCases) {
  const auto empty = DenseGrid::matrix(5, 5);
  auto full = DenseGrid::matrix(5, 5, 1.0);
  EXPECT_EQ(metrics::f_metric(empty, empty, 1), 1.0);
  EXPECT_EQ(metrics::f_metric(full, empty, 1), 0.0);
  EXPECT_EQ(metrics::f_metric(empty, full, 1), 0.0);
  // The frame border counts as background, so a full mask has a ring boundary.
  const auto ring = metrics::boundary(full);
  EXPECT_EQ(std::count(ring.begin(), ring.end(), 1), 16);
  EXPECT_EQ(metrics::f_metric(full, full, 0), 1.0);
  EXPECT_EQ(metrics::j_metric(empty, empty), 1.0);
}

TEST(Metrics, FRequiresBinaryMasks) {
  auto a = DenseGrid::matrix(4, 4);
  a[0] = 0.3;
  EXPECT_THROW(metrics::f_metric(a, DenseGrid::matrix(4, 4), 1), ContractViolation);
}

TEST(Metrics, ShiftedSquareWithinToleranceScoresPerfectF) {
  DenseGrid a = DenseGrid::matrix(20, 20), b = DenseGrid::matrix(20, 20);
  for (int r = 5; r < 12; ++r)
    for (int c = 5; c < 12; ++c) {
      a.at(r, c) = 1;
      b.at(r + 1, c) = 1;
    }
  EXPECT_EQ(metrics::f_metric(a, b, 1), 1.0);
  EXPECT_LT(metrics::f_metric(a, b, 0), 1.0);
  EXPECT_NEAR(metrics::j_metric(a, b), 42.0 / 56.0, 1e-15);
}

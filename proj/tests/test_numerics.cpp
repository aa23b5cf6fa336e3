#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "steerseg/numerics.hpp"
#include "support.hpp"

using namespace steerseg;
using numerics::DenseGrid;
using testing_support::random_grid;
using testing_support::random_mask;

namespace {

// Sum-of-products form, long double: algebraically equal to the centered form
// used by the library but computed differently.
double pearson_oracle(std::span<const double> a, std::span<const double> b) {
  long double n = a.size(), sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    sab += (long double)a[i] * b[i];
    saa += (long double)a[i] * a[i];
    sbb += (long double)b[i] * b[i];
  }
  const long double cov = n * sab - sa * sb;
  const long double va = n * saa - sa * sa, vb = n * sbb - sb * sb;
  return double(cov / std::sqrt(va * vb));
}

}  // namespace

TEST(Pearson, MatchesSumOfProductsOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 60;
    const auto a = random_grid(rng, {n}, -3, 3), b = random_grid(rng, {n}, -1, 5);
    EXPECT_NEAR(numerics::pearson_corr(a, b), pearson_oracle(a.values(), b.values()), 1e-12);
  }
}

TEST(Pearson, AffineInvarianceAndSymmetry) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = random_grid(rng, {3, 4, 5}), b = random_grid(rng, {3, 4, 5});
    const double r = numerics::pearson_corr(a, b);
    EXPECT_GE(r, -1.0);
    EXPECT_LE(r, 1.0);
    EXPECT_NEAR(numerics::pearson_corr(b, a), r, 1e-14);
    auto c = a;
    for (auto& v : c.values()) v = 2.5 * v - 7.0;
    EXPECT_NEAR(numerics::pearson_corr(c, b), r, 1e-12);
    for (auto& v : c.values()) v = -v;
    EXPECT_NEAR(numerics::pearson_corr(c, b), -r, 1e-12);
    EXPECT_NEAR(numerics::pearson_corr(a, a), 1.0, 1e-12);
  }
}

TEST(Pearson, ZeroVarianceGivesZero) {
  DenseGrid a({4}, 0.3), b({4}, std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(numerics::pearson_corr(a, b), 0.0);
  EXPECT_EQ(numerics::pearson_corr(b, a), 0.0);
}

TEST(Pearson, RejectsShapeMismatchAndNonFinite) {
  DenseGrid a({2, 3}), b({3, 2});
  EXPECT_THROW(numerics::pearson_corr(a, b), ContractViolation);
  DenseGrid c({2}, std::vector<double>{1, NAN}), d({2}, std::vector<double>{1, 2});
  EXPECT_THROW(numerics::pearson_corr(c, d), ContractViolation);
}

TEST(Logit, ClampsAndMatchesClosedForm) {
  DenseGrid p({5}, std::vector<double>{0.0, 1e-6, 0.25, 0.5, 1.0});
  const auto l = numerics::logit_transform(p, 1e-4);
  const double e = 1e-4;
  EXPECT_DOUBLE_EQ(l[0], std::log(e / (1 - e)));
  EXPECT_DOUBLE_EQ(l[1], std::log(e / (1 - e)));
  EXPECT_DOUBLE_EQ(l[2], std::log(0.25 / 0.75));
  EXPECT_DOUBLE_EQ(l[3], 0.0);
  EXPECT_NEAR(l[4], -l[0], 1e-12);  // 1 - (1 - e) is not exactly e
  EXPECT_TRUE(l.all_finite());
}

TEST(Logit, RejectsOutOfRange) {
  EXPECT_THROW(numerics::logit_transform(DenseGrid({1}, std::vector<double>{1.5})), ContractViolation);
  EXPECT_THROW(numerics::logit_transform(DenseGrid({1}, std::vector<double>{-0.1})), ContractViolation);
  EXPECT_THROW(numerics::logit_transform(DenseGrid({1}, 0.5), 0.0), ContractViolation);
}

TEST(AreaDownsample, MatchesScatterOracleAndPreservesMean) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t f = 1 + rng() % 4, oh = 1 + rng() % 5, ow = 1 + rng() % 5;
    const auto g = random_grid(rng, {oh * f, ow * f}, -2, 2);
    DenseGrid expect = DenseGrid::matrix(oh, ow);
    for (std::size_t r = 0; r < oh * f; ++r)
      for (std::size_t c = 0; c < ow * f; ++c) expect.at(r / f, c / f) += g.at(r, c) / double(f * f);
    const auto got = numerics::area_downsample(g, f);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-12);
    EXPECT_NEAR(got.sum() / double(got.size()), g.sum() / double(g.size()), 1e-12);
  }
  EXPECT_THROW(numerics::area_downsample(DenseGrid::matrix(5, 4), 2), ContractViolation);
}

TEST(BilinearResize, HalfPixelCentersOnKnownGrid) {
  // a + fc + 2 fr on a 2x2 plane; the half-pixel sample weights for 2 -> 4
  // are 0, 0.25, 0.75, 1.
  DenseGrid g({2, 2}, std::vector<double>{0, 1, 2, 3});
  const auto out = numerics::bilinear_resize(g, 4, 4);
  const double w[4] = {0, 0.25, 0.75, 1};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(out.at(r, c), w[c] + 2 * w[r], 1e-12);
}

TEST(BilinearResize, IdentityAndConstantPreserved) {
  std::mt19937_64 rng(4);
  const auto g = random_grid(rng, {6, 9});
  const auto same = numerics::bilinear_resize(g, 6, 9);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_DOUBLE_EQ(same[i], g[i]);
  const auto up = numerics::bilinear_resize(DenseGrid({3, 3}, 0.7), 17, 5);
  for (double v : up.values()) EXPECT_NEAR(v, 0.7, 1e-12);
}

TEST(BilinearResize, StaysWithinInputRange) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = random_grid(rng, {1 + rng() % 8, 1 + rng() % 8});
    const auto out = numerics::bilinear_resize(g, 1 + rng() % 20, 1 + rng() % 20);
    EXPECT_GE(out.min(), g.min() - 1e-12);
    EXPECT_LE(out.max(), g.max() + 1e-12);
  }
}

TEST(MaskIou, MatchesSetCounting) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_mask(rng, 7, 9, 0.3), b = random_mask(rng, 7, 9, 0.3);
    std::set<std::size_t> sa, sb, inter, uni;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i]) sa.insert(i);
      if (b[i]) sb.insert(i);
    }
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(inter, inter.end()));
    std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(uni, uni.end()));
    const double expect = uni.empty() ? 1.0 : double(inter.size()) / double(uni.size());
    EXPECT_DOUBLE_EQ(numerics::mask_iou(a, b), expect);
  }
}

TEST(MaskIou, EdgeCases) {
  const auto z = DenseGrid::matrix(3, 3);
  EXPECT_EQ(numerics::mask_iou(z, z), 1.0);
  auto one = z;
  one[4] = 1;
  EXPECT_EQ(numerics::mask_iou(one, z), 0.0);
  auto soft = z;
  soft[0] = 0.5;
  EXPECT_THROW(numerics::mask_iou(soft, z), ContractViolation);
}

TEST(MinmaxNormalize, MapsToUnitRange) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = random_grid(rng, {4, 4}, -5, 5);
    const auto n = numerics::minmax_normalize(g);
    EXPECT_DOUBLE_EQ(n.min(), 0.0);
    EXPECT_DOUBLE_EQ(n.max(), 1.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_NEAR(n[i], (g[i] - g.min()) / (g.max() - g.min()), 1e-14);
    }
  }
  const auto c = numerics::minmax_normalize(DenseGrid({3}, 2.0));
  for (double v : c.values()) EXPECT_EQ(v, 0.0);
}

TEST(Argmax, TiesGoToFirstIndex) {
  std::vector<double> v{0.1, 0.9, 0.3, 0.9};
  EXPECT_EQ(numerics::argmax_index(v), 1u);
  std::vector<double> flat(5, 2.0);
  EXPECT_EQ(numerics::argmax_index(flat), 0u);
}

TEST(Binarize, ThresholdIsInclusive) {
  DenseGrid p({4}, std::vector<double>{0.49, 0.5, 0.51, 0.0});
  const auto b = numerics::binarize(p, 0.5);
  EXPECT_EQ(b.storage(), (std::vector<double>{0, 1, 1, 0}));
}

TEST(DenseGrid, StackSliceRoundTrip) {
  std::mt19937_64 rng(8);
  std::vector<DenseGrid> slices;
  for (int i = 0; i < 3; ++i) slices.push_back(random_grid(rng, {2, 5}));
  const auto s = DenseGrid::stack(slices);
  ASSERT_EQ(s.shape(), (numerics::Shape{3, 2, 5}));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(s.slice(i).storage(), slices[i].storage());
  EXPECT_THROW(DenseGrid::stack({DenseGrid({2}), DenseGrid({3})}), ContractViolation);
  EXPECT_THROW(DenseGrid({2, 2}, std::vector<double>{1, 2, 3}), ContractViolation);
}

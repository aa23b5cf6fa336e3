#pragma once

// Seeded generators for property tests.

#include <random>
#include <string>

#include "steerseg/backend.hpp"
#include "steerseg/numerics.hpp"

namespace testing_support {

using steerseg::Matrix;
using steerseg::numerics::DenseGrid;

inline DenseGrid random_grid(std::mt19937_64& rng, steerseg::numerics::Shape shape, double lo = 0.0,
                             double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  DenseGrid g(std::move(shape));
  for (auto& v : g.values()) v = u(rng);
  return g;
}

inline DenseGrid random_mask(std::mt19937_64& rng, std::size_t h, std::size_t w, double p = 0.4) {
  std::bernoulli_distribution b(p);
  DenseGrid g = DenseGrid::matrix(h, w);
  for (auto& v : g.values()) v = b(rng) ? 1.0 : 0.0;
  return g;
}

/// Axis-aligned filled rectangle, the common case for segmentation masks.
inline DenseGrid random_blob(std::mt19937_64& rng, std::size_t h, std::size_t w) {
  std::uniform_int_distribution<std::size_t> ur(0, h - 1), uc(0, w - 1);
  std::size_t r0 = ur(rng), r1 = ur(rng), c0 = uc(rng), c1 = uc(rng);
  if (r0 > r1) std::swap(r0, r1);
  if (c0 > c1) std::swap(c0, c1);
  DenseGrid g = DenseGrid::matrix(h, w);
  for (std::size_t r = r0; r <= r1; ++r)
    for (std::size_t c = c0; c <= c1; ++c) g.at(r, c) = 1.0;
  return g;
}

/// Row-stochastic matrix with strictly positive entries.
inline Matrix random_stochastic(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Matrix a(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) a(r, c) = u(rng);
    a.row(r) /= a.row(r).sum();
  }
  return a;
}

inline steerseg::AttentionTensor random_attention(std::mt19937_64& rng, std::size_t layers, std::size_t heads,
                                                  Eigen::Index n, int first_layer = 0) {
  steerseg::AttentionTensor att;
  att.first_layer = first_layer;
  for (std::size_t l = 0; l < layers; ++l) {
    std::vector<Matrix> hs;
    for (std::size_t h = 0; h < heads; ++h) hs.push_back(random_stochastic(rng, n));
    att.layers.push_back(std::move(hs));
  }
  return att;
}

}  // namespace testing_support

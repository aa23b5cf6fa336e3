#pragma once

// Independent reference implementations shared by the unit and acceptance
// tests. Plain loops only; nothing here calls the code under test except
// mask_iou in the NMS reference.

#include <cmath>
#include <limits>
#include <list>
#include <utility>
#include <vector>

#include "steerseg/backend.hpp"
#include "steerseg/tracklets.hpp"

namespace testing_support::oracle {

using steerseg::Matrix;
using steerseg::numerics::DenseGrid;

inline Matrix naive_product(const Matrix& a, const Matrix& b) {
  Matrix c = Matrix::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      for (Eigen::Index k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

inline Matrix naive_transition(const std::vector<Matrix>& heads) {
  const auto n = heads[0].rows();
  Matrix t(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double s = 0;
      for (const auto& h : heads) s += h(i, j);
      t(i, j) = 0.5 * (s / double(heads.size()) + (i == j ? 1.0 : 0.0));
    }
  }
  return t;
}

// Boundary as foreground minus its cross erosion on a zero-padded copy.
inline std::vector<std::pair<int, int>> boundary(const DenseGrid& m) {
  const int h = int(m.extent(0)), w = int(m.extent(1));
  std::vector<std::vector<int>> pad(h + 2, std::vector<int>(w + 2, 0));
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) pad[r + 1][c + 1] = m.at(r, c) != 0.0;
  std::vector<std::pair<int, int>> out;
  for (int r = 1; r <= h; ++r) {
    for (int c = 1; c <= w; ++c) {
      const bool eroded = pad[r][c] && pad[r - 1][c] && pad[r + 1][c] && pad[r][c - 1] && pad[r][c + 1];
      if (pad[r][c] && !eroded) out.emplace_back(r - 1, c - 1);
    }
  }
  return out;
}

inline double matched_fraction(const std::vector<std::pair<int, int>>& from,
                               const std::vector<std::pair<int, int>>& to, int tol) {
  std::size_t hit = 0;
  for (auto [r, c] : from) {
    double best = std::numeric_limits<double>::infinity();
    for (auto [r2, c2] : to) best = std::min(best, std::hypot(double(r - r2), double(c - c2)));
    hit += best <= double(tol);
  }
  return double(hit) / double(from.size());
}

inline double f_measure(const DenseGrid& pred, const DenseGrid& gt, int tol) {
  const auto bp = boundary(pred), bg = boundary(gt);
  if (bp.empty() && bg.empty()) return 1.0;
  if (bp.empty() || bg.empty()) return 0.0;
  const double p = matched_fraction(bp, bg, tol), r = matched_fraction(bg, bp, tol);
  return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
}

inline double jaccard(const DenseGrid& a, const DenseGrid& b) {
  std::size_t i = 0, u = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    i += a[k] && b[k];
    u += a[k] || b[k];
  }
  return u == 0 ? 1.0 : double(i) / double(u);
}

// Suppression formulation: take the best remaining item, then delete every
// remaining item that overlaps it.
inline std::vector<std::size_t> nms(const std::vector<steerseg::tracklets::NmsItem>& items, double thr) {
  std::list<std::size_t> rest;
  for (std::size_t i = 0; i < items.size(); ++i) rest.push_back(i);
  std::vector<std::size_t> kept;
  while (!rest.empty()) {
    auto best = rest.begin();
    for (auto it = rest.begin(); it != rest.end(); ++it) {
      const auto& a = items[*it];
      const auto& b = items[*best];
      if (a.priority > b.priority || (a.priority == b.priority && a.order < b.order)) best = it;
    }
    const std::size_t k = *best;
    rest.erase(best);
    kept.push_back(k);
    rest.remove_if([&](std::size_t i) {
      return steerseg::numerics::mask_iou(*items[i].mask, *items[k].mask) > thr;
    });
  }
  return kept;
}

}  // namespace testing_support::oracle

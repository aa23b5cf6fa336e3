#pragma once

// Region similarity J, boundary F-measure and their mean.

#include <cmath>
#include <vector>

#include "steerseg/errors.hpp"
#include "steerseg/numerics.hpp"

namespace steerseg::metrics {

using numerics::DenseGrid;

inline double j_metric(const DenseGrid& pred, const DenseGrid& gt) {
  return numerics::mask_iou(pred, gt);
}

/// max(1, round(0.008 * diagonal)).
inline int default_tolerance(std::size_t h, std::size_t w) {
  const double diag = std::hypot(double(h), double(w));
  return std::max(1, int(std::lround(0.008 * diag)));
}

/// Foreground pixels with at least one 4-neighbor that is background; pixels
/// outside the frame count as background.
inline std::vector<unsigned char> boundary(const DenseGrid& m) {
  require(m.rank() == 2, "boundary: expected a 2D mask");
  const std::size_t h = m.extent(0), w = m.extent(1);
  std::vector<unsigned char> out(h * w, 0);
  auto fg = [&](long r, long c) {
    return r >= 0 && c >= 0 && r < long(h) && c < long(w) && m.at(std::size_t(r), std::size_t(c)) != 0.0;
  };
  for (long r = 0; r < long(h); ++r) {
    for (long c = 0; c < long(w); ++c) {
      if (!fg(r, c)) continue;
      if (!fg(r - 1, c) || !fg(r + 1, c) || !fg(r, c - 1) || !fg(r, c + 1)) out[std::size_t(r) * w + std::size_t(c)] = 1;
    }
  }
  return out;
}

/// Binary dilation by the disk dx^2 + dy^2 <= tol^2.
inline std::vector<unsigned char> dilate(const std::vector<unsigned char>& b, std::size_t h,
                                         std::size_t w, int tol) {
  std::vector<unsigned char> out(b.size(), 0);
  for (long r = 0; r < long(h); ++r) {
    for (long c = 0; c < long(w); ++c) {
      if (!b[std::size_t(r) * w + std::size_t(c)]) continue;
      for (int dr = -tol; dr <= tol; ++dr) {
        for (int dc = -tol; dc <= tol; ++dc) {
          if (dr * dr + dc * dc > tol * tol) continue;
          const long rr = r + dr, cc = c + dc;
          if (rr >= 0 && cc >= 0 && rr < long(h) && cc < long(w)) out[std::size_t(rr) * w + std::size_t(cc)] = 1;
        }
      }
    }
  }
  return out;
}

/// Boundary F-measure. Both boundaries empty gives 1; exactly one empty gives 0.
inline double f_metric(const DenseGrid& pred, const DenseGrid& gt, int tolerance) {
  require(pred.shape() == gt.shape() && pred.rank() == 2, "f_metric: masks must be equal-size 2D grids");
  require(tolerance >= 0, "f_metric: tolerance must be >= 0");
  for (const auto* g : {&pred, &gt}) {
    for (double v : g->values()) require(v == 0.0 || v == 1.0, "f_metric: masks must be binary");
  }
  const std::size_t h = pred.extent(0), w = pred.extent(1);
  const auto bp = boundary(pred), bg = boundary(gt);
  std::size_t np = 0, ng = 0;
  for (std::size_t i = 0; i < bp.size(); ++i) {
    np += bp[i];
    ng += bg[i];
  }
  if (np == 0 && ng == 0) return 1.0;
  if (np == 0 || ng == 0) return 0.0;
  const auto dp = dilate(bp, h, w, tolerance), dg = dilate(bg, h, w, tolerance);
  std::size_t mp = 0, mg = 0;
  for (std::size_t i = 0; i < bp.size(); ++i) {
    mp += bp[i] && dg[i];
    mg += bg[i] && dp[i];
  }
  const double precision = double(mp) / double(np);
  const double recall = double(mg) / double(ng);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

inline double f_metric(const DenseGrid& pred, const DenseGrid& gt) {
  return f_metric(pred, gt, default_tolerance(pred.extent(0), pred.extent(1)));
}

struct VideoScore {
  double j = 0, f = 0, jf = 0;
};

/// Frame-averaged J and F over a video; jf = (j + f) / 2.
inline VideoScore score_video(const std::vector<DenseGrid>& pred, const std::vector<DenseGrid>& gt,
                              int tolerance = -1) {
  require(!gt.empty() && pred.size() == gt.size(), "score_video: frame counts differ");
  VideoScore s;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    s.j += j_metric(pred[t], gt[t]);
    s.f += tolerance < 0 ? f_metric(pred[t], gt[t]) : f_metric(pred[t], gt[t], tolerance);
  }
  s.j /= double(gt.size());
  s.f /= double(gt.size());
  s.jf = (s.j + s.f) / 2.0;
  return s;
}

}  // namespace steerseg::metrics

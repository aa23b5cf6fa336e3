#pragma once

// Dense numerical kernels shared by every stage of the pipeline: Pearson
// correlation, logit transform, area pooling, bilinear resize, mask IoU and
// min-max normalization. All computation is in double precision.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "steerseg/errors.hpp"

namespace steerseg::numerics {

inline constexpr double kDefaultLogitEps = 1e-4;

using Shape = std::vector<std::size_t>;

inline std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

/// Row-major n-dimensional array of doubles. Rank 2 is (rows, cols); rank 3
/// is (slices, rows, cols).
class DenseGrid {
 public:
  DenseGrid() = default;

  explicit DenseGrid(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), values_(shape_product(shape_), fill) {
    check_shape();
  }

  DenseGrid(Shape shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    check_shape();
    if (values_.size() != shape_product(shape_)) {
      throw ContractViolation("DenseGrid: " + std::to_string(values_.size()) +
                              " values do not fill shape " +
                              shape_string(shape_));
    }
  }

  static DenseGrid matrix(std::size_t rows, std::size_t cols,
                          double fill = 0.0) {
    return DenseGrid({rows, cols}, fill);
  }

  /// Stacks equally shaped grids along a new leading axis.
  static DenseGrid stack(const std::vector<DenseGrid>& slices) {
    require(!slices.empty(), "stack: no slices");
    Shape shape = slices.front().shape();
    std::vector<double> values;
    values.reserve(slices.size() * slices.front().size());
    for (const auto& s : slices) {
      require(s.shape() == shape, "stack: slice shape mismatch " +
                                      shape_string(s.shape()) + " vs " +
                                      shape_string(shape));
      values.insert(values.end(), s.values_.begin(), s.values_.end());
    }
    shape.insert(shape.begin(), slices.size());
    return DenseGrid(std::move(shape), std::move(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  const std::vector<double>& storage() const noexcept { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double& at(std::size_t r, std::size_t c) {
    return values_[r * shape_[1] + c];
  }
  double at(std::size_t r, std::size_t c) const {
    return values_[r * shape_[1] + c];
  }
  double& at(std::size_t t, std::size_t r, std::size_t c) {
    return values_[(t * shape_[1] + r) * shape_[2] + c];
  }
  double at(std::size_t t, std::size_t r, std::size_t c) const {
    return values_[(t * shape_[1] + r) * shape_[2] + c];
  }

  /// Leading-axis slice of a rank >= 2 grid, returned as a copy.
  DenseGrid slice(std::size_t index) const {
    require(rank() >= 2, "slice: rank must be >= 2");
    require(index < shape_[0], "slice: index out of range");
    Shape sub(shape_.begin() + 1, shape_.end());
    const std::size_t n = shape_product(sub);
    std::vector<double> v(values_.begin() + static_cast<long>(index * n),
                          values_.begin() + static_cast<long>((index + 1) * n));
    return DenseGrid(std::move(sub), std::move(v));
  }

  DenseGrid reshaped(Shape shape) const {
    return DenseGrid(std::move(shape), values_);
  }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  double min() const {
    require(!empty(), "min of empty grid");
    return *std::min_element(values_.begin(), values_.end());
  }
  double max() const {
    require(!empty(), "max of empty grid");
    return *std::max_element(values_.begin(), values_.end());
  }
  double sum() const {
    return std::accumulate(values_.begin(), values_.end(), 0.0);
  }
  double mean() const { return empty() ? 0.0 : sum() / double(size()); }

  friend bool operator==(const DenseGrid&, const DenseGrid&) = default;

 private:
  void check_shape() const {
    for (auto e : shape_) {
      if (e == 0) {
        throw ContractViolation("DenseGrid: zero extent in shape " +
                                shape_string(shape_));
      }
    }
  }

  Shape shape_;
  std::vector<double> values_;
};

inline void require_finite(const DenseGrid& g, const char* op) {
  if (!g.all_finite()) {
    throw ContractViolation(std::string(op) + ": non-finite input value");
  }
}

/// Pearson correlation over the flattened elements of two equally shaped
/// grids. Zero variance in either input yields exactly 0.
inline double pearson_corr(std::span<const double> a,
                           std::span<const double> b) {
  require(a.size() == b.size(), "pearson_corr: size mismatch " +
                                    std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()));
  require(a.size() >= 2, "pearson_corr: need at least 2 elements");
  const double n = double(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  const double r = sab / std::sqrt(saa * sbb);
  if (!std::isfinite(r)) return 0.0;
  return std::clamp(r, -1.0, 1.0);
}

inline double pearson_corr(const DenseGrid& a, const DenseGrid& b) {
  require(a.shape() == b.shape(), "pearson_corr: shape mismatch " +
                                      shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
  require_finite(a, "pearson_corr");
  require_finite(b, "pearson_corr");
  return pearson_corr(a.values(), b.values());
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline DenseGrid sigmoid(const DenseGrid& g) {
  DenseGrid out = g;
  for (auto& v : out.values()) v = sigmoid(v);
  return out;
}

/// log(p'/(1-p')) with p' = clamp(p, eps, 1-eps), elementwise.
inline DenseGrid logit_transform(const DenseGrid& p,
                                 double eps = kDefaultLogitEps) {
  require(eps > 0.0 && eps < 0.5, "logit_transform: eps must be in (0, 0.5)");
  DenseGrid out = p;
  for (auto& v : out.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ContractViolation("logit_transform: probability " +
                              std::to_string(v) + " outside [0, 1]");
    }
    const double c = std::clamp(v, eps, 1.0 - eps);
    v = std::log(c / (1.0 - c));
  }
  return out;
}

/// Mean of each factor x factor block of a rank-2 grid.
inline DenseGrid area_downsample(const DenseGrid& g, std::size_t factor) {
  require(g.rank() == 2, "area_downsample: expected a 2D grid, got shape " +
                             shape_string(g.shape()));
  require(factor >= 1, "area_downsample: factor must be positive");
  const std::size_t h = g.extent(0), w = g.extent(1);
  if (h % factor != 0 || w % factor != 0) {
    throw ContractViolation("area_downsample: extents " + shape_string(g.shape()) +
                            " not divisible by " + std::to_string(factor));
  }
  const std::size_t oh = h / factor, ow = w / factor;
  DenseGrid out = DenseGrid::matrix(oh, ow);
  const double inv = 1.0 / double(factor * factor);
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t dr = 0; dr < factor; ++dr) {
        for (std::size_t dc = 0; dc < factor; ++dc) {
          s += g.at(r * factor + dr, c * factor + dc);
        }
      }
      out.at(r, c) = s * inv;
    }
  }
  return out;
}

/// Applies area_downsample to every slice of a rank-3 stack.
inline DenseGrid area_downsample_stack(const DenseGrid& g, std::size_t factor) {
  require(g.rank() == 3, "area_downsample_stack: expected a 3D grid");
  std::vector<DenseGrid> slices;
  slices.reserve(g.extent(0));
  for (std::size_t t = 0; t < g.extent(0); ++t) {
    slices.push_back(area_downsample(g.slice(t), factor));
  }
  return DenseGrid::stack(slices);
}

/// Bilinear interpolation with half-pixel centers
/// (src = (dst + 0.5) * in / out - 0.5, clamped at the borders).
inline DenseGrid bilinear_resize(const DenseGrid& g, std::size_t out_h,
                                 std::size_t out_w) {
  require(g.rank() == 2, "bilinear_resize: expected a 2D grid");
  require(out_h >= 1 && out_w >= 1, "bilinear_resize: output extents must be >= 1");
  const std::size_t in_h = g.extent(0), in_w = g.extent(1);
  DenseGrid out = DenseGrid::matrix(out_h, out_w);

  auto axis = [](std::size_t dst, std::size_t in, std::size_t outn) {
    double src = (double(dst) + 0.5) * double(in) / double(outn) - 0.5;
    src = std::clamp(src, 0.0, double(in - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(src));
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    return std::tuple{i0, i1, src - double(i0)};
  };

  for (std::size_t r = 0; r < out_h; ++r) {
    const auto [r0, r1, fr] = axis(r, in_h, out_h);
    for (std::size_t c = 0; c < out_w; ++c) {
      const auto [c0, c1, fc] = axis(c, in_w, out_w);
      const double top = g.at(r0, c0) * (1.0 - fc) + g.at(r0, c1) * fc;
      const double bot = g.at(r1, c0) * (1.0 - fc) + g.at(r1, c1) * fc;
      out.at(r, c) = top * (1.0 - fr) + bot * fr;
    }
  }
  return out;
}

/// |a ∩ b| / |a ∪ b| for binary masks; two empty masks have IoU 1.
inline double mask_iou(const DenseGrid& a, const DenseGrid& b) {
  require(a.shape() == b.shape(), "mask_iou: shape mismatch " +
                                      shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    if ((x != 0.0 && x != 1.0) || (y != 0.0 && y != 1.0)) {
      throw ContractViolation("mask_iou: masks must be binary");
    }
    const bool p = x != 0.0, q = y != 0.0;
    inter += (p && q);
    uni += (p || q);
  }
  if (uni == 0) return 1.0;
  return double(inter) / double(uni);
}

/// (g - min) / (max - min); a constant grid maps to all zeros.
inline DenseGrid minmax_normalize(const DenseGrid& g) {
  require(!g.empty(), "minmax_normalize: empty grid");
  require_finite(g, "minmax_normalize");
  const double lo = g.min(), hi = g.max();
  DenseGrid out = g;
  if (!(hi > lo)) {
    for (auto& v : out.values()) v = 0.0;
    return out;
  }
  const double inv = 1.0 / (hi - lo);
  for (auto& v : out.values()) v = (v - lo) * inv;
  return out;
}

/// Index of the largest element; ties resolve to the smallest index.
inline std::size_t argmax_index(std::span<const double> v) {
  require(!v.empty(), "argmax_index: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

/// Thresholds probabilities at `threshold` (value >= threshold -> 1).
inline DenseGrid binarize(const DenseGrid& p, double threshold = 0.5) {
  DenseGrid out = p;
  for (auto& v : out.values()) v = v >= threshold ? 1.0 : 0.0;
  return out;
}

}  // namespace steerseg::numerics

#pragma once

// Promptable segmenter that answers from instance label maps: a point
// selects the instance under it; propagation returns that instance's region
// in every frame with fixed-margin logits.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "steerseg/backend.hpp"
#include "steerseg/errors.hpp"
#include "steerseg/image.hpp"

namespace steerseg {

inline constexpr double kOracleLogitMargin = 8.0;

class OracleSegmenter final : public Segmenter {
 public:
  explicit OracleSegmenter(std::vector<LabelMap> labels) : labels_(std::move(labels)) {
    require(!labels_.empty(), "OracleSegmenter: no label maps");
    for (const auto& l : labels_) {
      require(l.height == labels_[0].height && l.width == labels_[0].width,
              "OracleSegmenter: label maps differ in size");
    }
  }

  std::size_t num_frames() const override { return labels_.size(); }
  std::size_t height() const override { return labels_[0].height; }
  std::size_t width() const override { return labels_[0].width; }

  numerics::DenseGrid segment_from_point(std::size_t frame, double x, double y) const override {
    require(frame < labels_.size(), "segment_from_point: frame out of range");
    require(x >= 0 && y >= 0 && x < double(width()) && y < double(height()),
            "segment_from_point: point (" + std::to_string(x) + ", " + std::to_string(y) +
                ") outside the frame");
    const int label = labels_[frame].at(std::size_t(y), std::size_t(x));
    if (label == 0) return numerics::DenseGrid::matrix(height(), width());
    return labels_[frame].indicator(label);
  }

  /// Instance with the largest overlap with the seed (> 0.5 counts as in);
  /// ties go to the smaller label; 0 when the seed covers only background.
  int resolve_instance(const numerics::DenseGrid& seed, std::size_t frame) const {
    require(frame < labels_.size(), "resolve_instance: frame out of range");
    require(seed.rank() == 2 && seed.extent(0) == height() && seed.extent(1) == width(),
            "resolve_instance: seed mask has the wrong shape");
    std::map<int, std::size_t> votes;
    for (std::size_t i = 0; i < seed.size(); ++i) {
      if (seed[i] > 0.5) {
        const int l = labels_[frame].labels[i];
        if (l != 0) ++votes[l];
      }
    }
    int best = 0;
    std::size_t best_n = 0;
    for (const auto& [l, n] : votes) {
      if (n > best_n) {
        best = l;
        best_n = n;
      }
    }
    return best;
  }

  PropagationResult propagate(const numerics::DenseGrid& seed, std::size_t seed_frame,
                              Direction dir) const override {
    const int label = resolve_instance(seed, seed_frame);
    PropagationResult out;
    auto emit = [&](std::size_t t) {
      numerics::DenseGrid p = label == 0 ? numerics::DenseGrid::matrix(height(), width())
                                         : labels_[t].indicator(label);
      numerics::DenseGrid lg = p;
      for (auto& v : lg.values()) v = v > 0.5 ? kOracleLogitMargin : -kOracleLogitMargin;
      out.probabilities.push_back(std::move(p));
      out.logits.push_back(std::move(lg));
      out.frame_indices.push_back(t);
    };
    if (dir == Direction::forward) {
      for (std::size_t t = seed_frame; t < labels_.size(); ++t) emit(t);
    } else {
      for (std::size_t t = seed_frame + 1; t-- > 0;) emit(t);
    }
    return out;
  }

 private:
  std::vector<LabelMap> labels_;
};

}  // namespace steerseg

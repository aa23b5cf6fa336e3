#pragma once

// Point prompts from grounding maps, candidate masks with NMS, propagated
// tracklets, correlation-fusion scoring and final mask export.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "steerseg/backend.hpp"
#include "steerseg/errors.hpp"
#include "steerseg/numerics.hpp"
#include "steerseg/rollout.hpp"

namespace steerseg::tracklets {

using numerics::DenseGrid;

struct PointPrompt {
  std::size_t frame_index = 0;  // absolute frame
  std::size_t keyframe = 0;     // position among the frame keyframes
  std::size_t cell = 0;         // row-major argmax cell on the map grid
  double x = 0, y = 0;          // native pixel coordinates
  double attention = 0;
};

struct SelectionConfig {
  double alpha = 0.3;
  double nms_iou = 0.7;
  double binarize_threshold = 0.5;
  double logit_eps = numerics::kDefaultLogitEps;

  void check() const {
    require(alpha >= 0 && alpha <= 1, "selection: alpha must be in [0, 1]");
    require(nms_iou > 0 && nms_iou <= 1, "selection: nms IoU must be in (0, 1]");
  }
};

/// Argmax cell of every keyframe map (ties: smallest row-major index), mapped
/// to the cell center in native pixels.
inline std::vector<PointPrompt> select_points(const DenseGrid& frame_maps,
                                              const std::vector<std::size_t>& keyframes,
                                              std::size_t native_h, std::size_t native_w) {
  require(frame_maps.rank() == 3, "select_points: expected a T x H x W stack");
  require(frame_maps.extent(0) == keyframes.size(), "select_points: keyframe count mismatch");
  const std::size_t h = frame_maps.extent(1), w = frame_maps.extent(2);
  std::vector<PointPrompt> out;
  for (std::size_t k = 0; k < keyframes.size(); ++k) {
    const auto slice = frame_maps.values().subspan(k * h * w, h * w);
    const std::size_t cell = numerics::argmax_index(slice);
    PointPrompt p;
    p.frame_index = keyframes[k];
    p.keyframe = k;
    p.cell = cell;
    p.x = (double(cell % w) + 0.5) * double(native_w) / double(w);
    p.y = (double(cell / w) + 0.5) * double(native_h) / double(h);
    p.attention = slice[cell];
    out.push_back(p);
  }
  return out;
}

struct NmsItem {
  const DenseGrid* mask = nullptr;
  double priority = 0;
  std::size_t order = 0;  // tie-break: smaller first
};

/// Greedy NMS: visit by priority (desc), then order (asc); drop a mask when
/// its IoU with any kept mask exceeds `iou_thresh`. Returns indices into
/// `items` in visiting order.
inline std::vector<std::size_t> dedupe_nms(const std::vector<NmsItem>& items, double iou_thresh) {
  std::vector<std::size_t> idx(items.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (items[a].priority != items[b].priority) return items[a].priority > items[b].priority;
    if (items[a].order != items[b].order) return items[a].order < items[b].order;
    return a < b;
  });
  std::vector<std::size_t> kept;
  for (std::size_t i : idx) {
    bool keep = true;
    for (std::size_t k : kept) {
      if (numerics::mask_iou(*items[i].mask, *items[k].mask) > iou_thresh) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(i);
  }
  return kept;
}

struct Tracklet {
  std::vector<DenseGrid> masks;   // probability masks, one per frame
  std::vector<DenseGrid> logits;  // raw segmenter logits, one per frame
  PointPrompt seed;
  DenseGrid keyframe_volume;      // M: T_f x H_v x W_v, logit space
  double s = 0, s_frm = 0, s_vid = 0;
};

struct BuildResult {
  std::vector<Tracklet> tracklets;
  std::vector<std::string> dropped;  // reasons, one per dropped candidate
  std::size_t candidates_before_nms = 0;
};

/// Logit-transformed keyframe masks pooled to the map grid.
inline DenseGrid keyframe_volume(const std::vector<DenseGrid>& masks,
                                 const std::vector<std::size_t>& keyframes, std::size_t map_h,
                                 std::size_t map_w, double eps) {
  std::vector<DenseGrid> slices;
  for (std::size_t t : keyframes) {
    const auto& m = masks.at(t);
    require(m.extent(0) % map_h == 0 && m.extent(1) % map_w == 0 &&
                m.extent(0) / map_h == m.extent(1) / map_w,
            "keyframe_volume: mask size is not a uniform multiple of the map grid");
    slices.push_back(numerics::area_downsample(numerics::logit_transform(m, eps), m.extent(0) / map_h));
  }
  return DenseGrid::stack(slices);
}

inline BuildResult build_tracklets(const std::vector<PointPrompt>& points, const Segmenter& seg,
                                   const std::vector<std::size_t>& frame_keyframes,
                                   std::size_t map_h, std::size_t map_w,
                                   const SelectionConfig& cfg) {
  BuildResult out;
  struct Candidate {
    PointPrompt point;
    DenseGrid mask;
  };
  std::vector<Candidate> cands;
  for (const auto& p : points) {
    try {
      DenseGrid m = numerics::binarize(seg.segment_from_point(p.frame_index, p.x, p.y),
                                       cfg.binarize_threshold);
      if (m.sum() == 0.0) {
        out.dropped.push_back("keyframe " + std::to_string(p.frame_index) +
                              ": empty mask at point (" + std::to_string(p.x) + ", " +
                              std::to_string(p.y) + ")");
        continue;
      }
      cands.push_back({p, std::move(m)});
    } catch (const std::exception& e) {
      out.dropped.push_back("keyframe " + std::to_string(p.frame_index) + ": segmenter failed: " + e.what());
    }
  }
  out.candidates_before_nms = cands.size();
  std::vector<NmsItem> items;
  for (const auto& c : cands) items.push_back({&c.mask, c.point.attention, c.point.keyframe});
  const auto kept = dedupe_nms(items, cfg.nms_iou);

  const std::size_t T = seg.num_frames();
  for (std::size_t i : kept) {
    const auto& c = cands[i];
    try {
      const auto fwd = seg.propagate(c.mask, c.point.frame_index, Direction::forward);
      const auto bwd = seg.propagate(c.mask, c.point.frame_index, Direction::backward);
      Tracklet t;
      t.seed = c.point;
      t.masks.assign(T, DenseGrid());
      t.logits.assign(T, DenseGrid());
      for (const auto* r : {&bwd, &fwd}) {
        for (std::size_t k = 0; k < r->frame_indices.size(); ++k) {
          t.masks.at(r->frame_indices[k]) = r->probabilities[k];
          t.logits.at(r->frame_indices[k]) = r->logits[k];
        }
      }
      double area = 0;
      for (std::size_t f = 0; f < T; ++f) {
        if (t.masks[f].empty()) throw BackendError("propagation skipped frame " + std::to_string(f), long(f));
        area += t.masks[f].sum();
      }
      if (area == 0.0) {
        out.dropped.push_back("keyframe " + std::to_string(c.point.frame_index) + ": empty after propagation");
        continue;
      }
      t.keyframe_volume = keyframe_volume(t.masks, frame_keyframes, map_h, map_w, cfg.logit_eps);
      out.tracklets.push_back(std::move(t));
    } catch (const std::exception& e) {
      out.dropped.push_back("keyframe " + std::to_string(c.point.frame_index) +
                            ": propagation failed: " + e.what());
    }
  }
  return out;
}

/// Index of the frame keyframe nearest to `v` (ties: the earlier one).
inline std::size_t nearest_keyframe(std::size_t v, const std::vector<std::size_t>& frame_keyframes) {
  require(!frame_keyframes.empty(), "nearest_keyframe: no keyframes");
  std::size_t best = 0;
  for (std::size_t k = 1; k < frame_keyframes.size(); ++k) {
    const auto d = [&](std::size_t i) {
      return frame_keyframes[i] > v ? frame_keyframes[i] - v : v - frame_keyframes[i];
    };
    if (d(k) < d(best)) best = k;
  }
  return best;
}

/// Temporal alignment by nearest frame keyframe, then spatial pooling.
inline DenseGrid align_for_video(const DenseGrid& m, const std::vector<std::size_t>& video_keyframes,
                                 const std::vector<std::size_t>& frame_keyframes,
                                 std::size_t factor = 2) {
  require(m.rank() == 3 && m.extent(0) == frame_keyframes.size(),
          "align_for_video: volume does not match the frame keyframes");
  std::vector<DenseGrid> slices;
  for (std::size_t v : video_keyframes) {
    slices.push_back(numerics::area_downsample(m.slice(nearest_keyframe(v, frame_keyframes)), factor));
  }
  return DenseGrid::stack(slices);
}

inline double fuse(double alpha, double s_frm, double s_vid) {
  return alpha * s_frm + (1.0 - alpha) * s_vid;
}

inline void score_tracklet(Tracklet& t, const rollout::GroundingMaps& maps, double alpha,
                           std::size_t video_factor = 2) {
  t.s_frm = numerics::pearson_corr(t.keyframe_volume, maps.frame_maps);
  t.s_vid = numerics::pearson_corr(
      align_for_video(t.keyframe_volume, maps.video_keyframes, maps.frame_keyframes, video_factor),
      maps.video_map);
  t.s = fuse(alpha, t.s_frm, t.s_vid);
}

/// Highest s; ties go to the earlier seed keyframe, then the smaller seed cell.
inline std::size_t select_best(const std::vector<Tracklet>& ts) {
  require(!ts.empty(), "select_best: no tracklets");
  std::size_t best = 0;
  for (std::size_t i = 1; i < ts.size(); ++i) {
    const auto& a = ts[i];
    const auto& b = ts[best];
    if (a.s > b.s || (a.s == b.s && (a.seed.keyframe < b.seed.keyframe ||
                                     (a.seed.keyframe == b.seed.keyframe && a.seed.cell < b.seed.cell)))) {
      best = i;
    }
  }
  return best;
}

struct FinalMasks {
  std::vector<DenseGrid> probabilities;
  std::vector<DenseGrid> binary;
};

inline FinalMasks finalize(const std::vector<DenseGrid>& masks, std::size_t native_h,
                           std::size_t native_w, double threshold = 0.5) {
  FinalMasks out;
  for (const auto& m : masks) {
    DenseGrid p = (m.extent(0) == native_h && m.extent(1) == native_w)
                      ? m
                      : numerics::bilinear_resize(m, native_h, native_w);
    out.binary.push_back(numerics::binarize(p, threshold));
    out.probabilities.push_back(std::move(p));
  }
  return out;
}

/// Empty result of the right size for videos where no candidate survived.
inline FinalMasks empty_masks(std::size_t frames, std::size_t h, std::size_t w) {
  FinalMasks out;
  for (std::size_t t = 0; t < frames; ++t) {
    out.probabilities.push_back(DenseGrid::matrix(h, w));
    out.binary.push_back(DenseGrid::matrix(h, w));
  }
  return out;
}

/// FNV-1a over the bit patterns of masks, logits and the keyframe volume.
inline std::uint64_t tracklet_hash(const Tracklet& t) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  auto grid = [&](const DenseGrid& g) {
    for (double v : g.values()) mix(std::bit_cast<std::uint64_t>(v));
  };
  for (const auto& m : t.masks) grid(m);
  for (const auto& m : t.logits) grid(m);
  grid(t.keyframe_volume);
  mix(t.seed.frame_index);
  mix(t.seed.cell);
  return h;
}

}  // namespace steerseg::tracklets

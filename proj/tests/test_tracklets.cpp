#include <algorithm>

#include <gtest/gtest.h>

#include "steerseg/oracle_segmenter.hpp"
#include "steerseg/tracklets.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace steerseg;
using numerics::DenseGrid;
using testing_support::random_blob;
using testing_support::random_grid;

namespace {

LabelMap disk_labels(std::size_t h, std::size_t w, std::vector<std::tuple<int, double, double, double>> disks) {
  LabelMap m(h, w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c)
      for (auto [label, cx, cy, rad] : disks)
        if ((c + 0.5 - cx) * (c + 0.5 - cx) + (r + 0.5 - cy) * (r + 0.5 - cy) <= rad * rad) m.at(r, c) = label;
  return m;
}

class FlakySegmenter final : public Segmenter {
 public:
  explicit FlakySegmenter(OracleSegmenter inner) : inner_(std::move(inner)) {}
  std::size_t num_frames() const override { return inner_.num_frames(); }
  std::size_t height() const override { return inner_.height(); }
  std::size_t width() const override { return inner_.width(); }
  DenseGrid segment_from_point(std::size_t f, double x, double y) const override {
    if (f == 1) throw std::runtime_error("decoder crashed");
    return inner_.segment_from_point(f, x, y);
  }
  PropagationResult propagate(const DenseGrid& seed, std::size_t f, Direction d) const override {
    auto r = inner_.propagate(seed, f, d);
    if (f == 2 && d == Direction::forward) {
      r.frame_indices.pop_back();
      r.probabilities.pop_back();
      r.logits.pop_back();
    }
    return r;
  }

 private:
  OracleSegmenter inner_;
};

}  // namespace

TEST(Nms, MatchesSuppressionReferenceOnRandomSets) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 12;
    std::vector<DenseGrid> masks;
    for (std::size_t i = 0; i < n; ++i) masks.push_back(random_blob(rng, 8, 8));
    std::vector<tracklets::NmsItem> items;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse priorities force ties that the order field must break.
      items.push_back({&masks[i], double(rng() % 4), rng() % 5});
    }
    const double thr = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
    const auto got = tracklets::dedupe_nms(items, thr);
    auto want = testing_support::oracle::nms(items, thr);
    // Equal priority and order leaves the index to decide; the reference's
    // scan already picks the first such index.
    EXPECT_EQ(got, want) << "trial " << trial;
  }
}

TEST(Nms, IdenticalMasksCollapseToOne) {
  const auto m = DenseGrid::matrix(4, 4, 1.0);
  std::vector<tracklets::NmsItem> items{{&m, 0.5, 3}, {&m, 0.5, 1}, {&m, 0.2, 0}};
  EXPECT_EQ(tracklets::dedupe_nms(items, 0.7), (std::vector<std::size_t>{1}));
}

TEST(SelectPoints, ArgmaxCellCentersInNativePixels) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t t = 1 + rng() % 5, h = 2 + rng() % 6, w = 2 + rng() % 6;
    auto maps = random_grid(rng, {t, h, w});
    for (auto& v : maps.values()) v = std::round(v * 4) / 4;  // ties
    std::vector<std::size_t> kfs;
    for (std::size_t k = 0; k < t; ++k) kfs.push_back(3 * k);
    const auto pts = tracklets::select_points(maps, kfs, h * 8, w * 8);
    ASSERT_EQ(pts.size(), t);
    for (std::size_t k = 0; k < t; ++k) {
      std::size_t br = 0, bc = 0;
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
          if (maps.at(k, r, c) > maps.at(k, br, bc)) br = r, bc = c;
      EXPECT_EQ(pts[k].cell, br * w + bc);
      EXPECT_EQ(pts[k].frame_index, kfs[k]);
      EXPECT_EQ(pts[k].keyframe, k);
      EXPECT_DOUBLE_EQ(pts[k].x, bc * 8 + 4.0);
      EXPECT_DOUBLE_EQ(pts[k].y, br * 8 + 4.0);
      EXPECT_EQ(pts[k].attention, maps.at(k, br, bc));
    }
  }
}

TEST(AlignForVideo, NearestKeyframeThenPooling) {
  std::mt19937_64 rng(33);
  const std::vector<std::size_t> fk{0, 3, 5, 9}, vk{0, 4, 7, 9};
  const auto m = random_grid(rng, {4, 4, 6});
  const auto out = tracklets::align_for_video(m, vk, fk, 2);
  // 4 is 1 from 3 and 5: earlier wins. 7 is 2 from 5 and 9: earlier wins.
  const std::size_t src[4] = {0, 1, 2, 3};
  ASSERT_EQ(out.shape(), (numerics::Shape{4, 2, 3}));
  for (std::size_t v = 0; v < 4; ++v)
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 3; ++c) {
        const double e = (m.at(src[v], 2 * r, 2 * c) + m.at(src[v], 2 * r + 1, 2 * c) +
                          m.at(src[v], 2 * r, 2 * c + 1) + m.at(src[v], 2 * r + 1, 2 * c + 1)) / 4;
        EXPECT_NEAR(out.at(v, r, c), e, 1e-14);
      }
  EXPECT_EQ(tracklets::nearest_keyframe(4, fk), 1u);
  EXPECT_EQ(tracklets::nearest_keyframe(7, fk), 2u);
  EXPECT_EQ(tracklets::nearest_keyframe(100, fk), 3u);
}

TEST(Fusion, ScoreIsConvexCombination) {
  std::mt19937_64 rng(34);
  rollout::GroundingMaps maps;
  maps.frame_keyframes = {0, 1, 2, 3};
  maps.video_keyframes = {0, 3};
  maps.frame_maps = random_grid(rng, {4, 4, 4});
  maps.video_map = random_grid(rng, {2, 2, 2});
  tracklets::Tracklet t;
  t.keyframe_volume = random_grid(rng, {4, 4, 4}, -9, 9);
  for (int i = 0; i <= 10; ++i) {
    const double a = i / 10.0;
    tracklets::score_tracklet(t, maps, a);
    EXPECT_NEAR(t.s, a * t.s_frm + (1 - a) * t.s_vid, 1e-15);
  }
  EXPECT_NEAR(t.s_frm, numerics::pearson_corr(t.keyframe_volume, maps.frame_maps), 0);
}

TEST(SelectBest, TiesGoToEarlierKeyframeThenSmallerCell) {
  std::vector<tracklets::Tracklet> ts(4);
  ts[0].s = 0.5, ts[0].seed.keyframe = 3, ts[0].seed.cell = 1;
  ts[1].s = 0.7, ts[1].seed.keyframe = 5, ts[1].seed.cell = 9;
  ts[2].s = 0.7, ts[2].seed.keyframe = 2, ts[2].seed.cell = 8;
  ts[3].s = 0.7, ts[3].seed.keyframe = 2, ts[3].seed.cell = 4;
  EXPECT_EQ(tracklets::select_best(ts), 3u);
  ts[0].s = 0.9;
  EXPECT_EQ(tracklets::select_best(ts), 0u);
}

TEST(BuildTracklets, DropsFailedCandidatesWithReasonsAndKeepsGoing) {
  std::vector<LabelMap> labels;
  for (int t = 0; t < 4; ++t) labels.push_back(disk_labels(16, 16, {{1, 4.0 + t, 5, 3}, {2, 12, 11, 3}}));
  FlakySegmenter seg{OracleSegmenter(labels)};
  std::vector<tracklets::PointPrompt> pts(4);
  pts[0] = {0, 0, 0, 4.5, 5.5, 0.9};   // instance 1
  pts[1] = {1, 1, 0, 12.5, 11.5, 0.8}; // segmenter throws
  pts[2] = {2, 2, 0, 12.5, 11.5, 0.7}; // propagation misses a frame
  pts[3] = {3, 3, 0, 0.5, 15.5, 0.6};  // background: empty mask
  const auto res = tracklets::build_tracklets(pts, seg, {0, 1, 2, 3}, 4, 4, {});
  EXPECT_EQ(res.candidates_before_nms, 2u);
  ASSERT_EQ(res.tracklets.size(), 1u);
  EXPECT_EQ(res.dropped.size(), 3u);
  const auto joined = res.dropped[0] + "|" + res.dropped[1] + "|" + res.dropped[2];
  EXPECT_NE(joined.find("segmenter failed"), std::string::npos);
  EXPECT_NE(joined.find("empty mask"), std::string::npos);
  EXPECT_NE(joined.find("propagation failed"), std::string::npos);
  const auto& t = res.tracklets[0];
  EXPECT_EQ(t.masks.size(), 4u);
  for (int f = 0; f < 4; ++f) EXPECT_EQ(t.masks[f].storage(), labels[f].indicator(1).storage());
  EXPECT_EQ(t.keyframe_volume.shape(), (numerics::Shape{4, 4, 4}));
}

TEST(KeyframeVolume, AveragesClampedLogits) {
  auto m = DenseGrid::matrix(4, 4);
  m.at(0, 0) = 1;
  const auto v = tracklets::keyframe_volume({m}, {0}, 2, 2, 1e-4);
  const double hi = std::log((1 - 1e-4) / 1e-4);
  EXPECT_NEAR(v.at(0, 0, 0), (hi - 3 * hi) / 4, 1e-12);
  EXPECT_NEAR(v.at(0, 1, 1), -hi, 1e-12);
}

TEST(Finalize, ResizesToNativeAndThresholds) {
  DenseGrid m({2, 2}, std::vector<double>{0, 1, 0, 1});
  const auto f = tracklets::finalize({m}, 4, 4, 0.5);
  ASSERT_EQ(f.binary[0].shape(), (numerics::Shape{4, 4}));
  for (int r = 0; r < 4; ++r) {
    EXPECT_EQ(f.binary[0].at(r, 0), 0.0);
    EXPECT_EQ(f.binary[0].at(r, 1), 0.0);  // 0.25
    EXPECT_EQ(f.binary[0].at(r, 2), 1.0);  // 0.75
    EXPECT_EQ(f.binary[0].at(r, 3), 1.0);
  }
}

TEST(TrackletHash, SensitiveToMaskContent) {
  tracklets::Tracklet t;
  t.masks = {DenseGrid::matrix(3, 3)};
  t.logits = {DenseGrid::matrix(3, 3)};
  t.keyframe_volume = DenseGrid({1, 1, 1});
  const auto h0 = tracklets::tracklet_hash(t);
  EXPECT_EQ(tracklets::tracklet_hash(t), h0);
  t.masks[0][4] = 1;
  EXPECT_NE(tracklets::tracklet_hash(t), h0);
}

#pragma once

// Synthetic moving-shape videos with instance label maps, referring
// expressions and ground-truth attribute lists.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "steerseg/errors.hpp"
#include "steerseg/image.hpp"
#include "steerseg/rollout.hpp"
#include "steerseg/toy_backend.hpp"
#include "steerseg/toy_world.hpp"

namespace steerseg::scenes {

struct InstanceRecord {
  int label = 0;
  world::Shape shape = world::Shape::circle;
  std::string color;
  double cx = 0, cy = 0;  // center at frame 0, pixels
  double vx = 0, vy = 0;  // pixels per frame
  double radius = 0;

  double x_at(std::size_t t) const { return cx + vx * double(t); }
  double y_at(std::size_t t) const { return cy + vy * double(t); }
  bool moving() const { return vx != 0.0 || vy != 0.0; }

  /// Analytic shape test for the pixel whose center is (px, py).
  bool covers(std::size_t t, double px, double py) const {
    const double dx = px - x_at(t), dy = py - y_at(t);
    switch (shape) {
      case world::Shape::circle: return dx * dx + dy * dy <= radius * radius;
      case world::Shape::square: return std::abs(dx) <= radius && std::abs(dy) <= radius;
      case world::Shape::triangle: {
        const double big = 1.35 * radius;  // circumradius, apex up
        return dy <= 0.5 * big && std::abs(dx) * std::sqrt(3.0) <= dy + big;
      }
    }
    return false;
  }

  /// Radius of a circle around the center that contains the shape.
  double extent() const {
    return shape == world::Shape::triangle ? 1.35 * radius
           : shape == world::Shape::square ? radius * std::sqrt(2.0)
                                           : radius;
  }
  /// Half width / half height of the axis-aligned bounding box (the triangle
  /// box is not centered; its larger half is used).
  double half_box() const { return shape == world::Shape::triangle ? 1.35 * radius : radius; }
};

struct SyntheticScene {
  std::string id;
  rollout::Video video;
  std::vector<LabelMap> label_maps;
  std::vector<InstanceRecord> instances;
  std::string expression;
  int target = 1;
  std::vector<std::string> attributes;  // ground-truth attribute list

  std::size_t num_frames() const { return video.size(); }
  std::vector<numerics::DenseGrid> target_masks() const {
    std::vector<numerics::DenseGrid> out;
    for (const auto& m : label_maps) out.push_back(m.indicator(target));
    return out;
  }
};

struct SceneSpec {
  std::size_t min_instances = 2;
  std::size_t max_instances = 3;
  std::size_t resolution = 64;
  std::size_t frames = 16;
  double min_radius = 7.0;
  double max_radius = 10.0;
  double moving_probability = 0.7;
  double min_speed = 0.25;
  double max_speed = 0.5;
  std::size_t max_attempts = 2000;

  void check() const {
    require(min_instances >= 1 && min_instances <= max_instances && max_instances <= 4,
            "scene spec: instance counts must satisfy 1 <= min <= max <= 4");
    require(resolution >= 64, "scene spec: resolution must be >= 64");
    require(frames >= 8 && frames <= 32, "scene spec: frame count must be in [8, 32]");
    require(min_radius > 0 && min_radius <= max_radius, "scene spec: invalid radius range");
  }
};

inline void render(SyntheticScene& s, std::size_t resolution, std::size_t frames) {
  s.video.frames.clear();
  s.label_maps.clear();
  for (std::size_t t = 0; t < frames; ++t) {
    LabelMap lab(resolution, resolution);
    Image img(resolution, resolution);
    for (std::size_t r = 0; r < resolution; ++r) {
      for (std::size_t c = 0; c < resolution; ++c) {
        std::array<double, 3> rgb = world::kBackground;
        for (const auto& inst : s.instances) {
          if (inst.covers(t, double(c) + 0.5, double(r) + 0.5)) {
            lab.at(r, c) = inst.label;
            rgb = *world::color_rgb(inst.color);
          }
        }
        for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = rgb[ch];
      }
    }
    s.video.frames.push_back(std::move(img));
    s.label_maps.push_back(std::move(lab));
  }
}

inline std::vector<toy::ObjectSummary> summaries(const SyntheticScene& s) {
  std::vector<toy::ObjectSummary> out;
  for (const auto& i : s.instances) out.push_back({i.color, i.shape, i.cx, i.cy, i.moving()});
  return out;
}

namespace detail {

inline bool placement_ok(const std::vector<InstanceRecord>& insts, const SceneSpec& spec) {
  const double lo = 1.0, hi = double(spec.resolution) - 1.0;
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t i = 0; i < insts.size(); ++i) {
      const auto& a = insts[i];
      const double e = a.half_box();
      if (a.x_at(t) - e < lo || a.x_at(t) + e > hi || a.y_at(t) - e < lo || a.y_at(t) + e > hi) {
        return false;
      }
      for (std::size_t j = i + 1; j < insts.size(); ++j) {
        const auto& b = insts[j];
        const double d = std::hypot(a.x_at(t) - b.x_at(t), a.y_at(t) - b.y_at(t));
        if (d < a.extent() + b.extent() + 3.0) return false;
      }
    }
  }
  return true;
}

}  // namespace detail

/// Expression drawn uniformly from the templates that identify the target
/// under toy::resolve_target.
inline std::string choose_expression(const SyntheticScene& s, std::mt19937_64& rng) {
  const auto objs = summaries(s);
  const std::size_t target = std::size_t(s.target - 1);
  const auto& t = s.instances[target];
  const std::string color = t.color;
  const std::string shape(world::shape_name(t.shape));
  std::vector<std::string> candidates{"the " + color + " " + shape};
  for (auto d : world::kDirectionWords) {
    candidates.push_back("the " + shape + " on the " + std::string(d));
  }
  candidates.push_back("the " + color + " " + shape + " that is " + (t.moving() ? "moving" : "static"));
  std::vector<std::string> valid;
  for (const auto& e : candidates) {
    const auto cues = toy::parse_cues(e);
    if (toy::resolve_target(objs, cues) != target) continue;
    // Directional expressions need a clear margin over every same-shape object.
    if (cues.direction) {
      bool clear = true;
      for (std::size_t i = 0; i < objs.size(); ++i) {
        if (i == target || objs[i].shape != t.shape) continue;
        const double dx = t.cx - objs[i].cx, dy = t.cy - objs[i].cy;
        const auto& d = *cues.direction;
        const double margin = d == "left" ? -dx : d == "right" ? dx : d == "top" ? -dy : dy;
        if (margin < 6.0) clear = false;
      }
      if (!clear) continue;
    }
    valid.push_back(e);
  }
  if (valid.empty()) throw GenerationError("no identifying expression for scene " + s.id);
  return valid[std::uniform_int_distribution<std::size_t>(0, valid.size() - 1)(rng)];
}

/// Deterministic from (seed, index): scene i of a suite does not depend on
/// how many scenes are requested.
inline SyntheticScene generate_scene(std::uint64_t seed, std::size_t index, const SceneSpec& spec) {
  spec.check();
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + index * 0xD1B54A32D192ED03ull + 1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  SyntheticScene s;
  s.id = "scene_" + std::to_string(seed) + "_" + std::to_string(index);
  const std::size_t n = spec.min_instances + pick(spec.max_instances - spec.min_instances + 1);
  const auto& colors = world::kPaintColors;

  for (std::size_t attempt = 0; attempt < spec.max_attempts; ++attempt) {
    std::vector<InstanceRecord> insts;
    InstanceRecord tgt;
    tgt.color = std::string(colors[pick(colors.size())].name);
    tgt.shape = world::Shape(pick(3));
    insts.push_back(tgt);
    for (std::size_t i = 1; i < n; ++i) {
      InstanceRecord o;
      if (i == 1) {
        // The designated distractor shares exactly one of color / shape.
        if (u01(rng) < 0.5) {
          o.color = tgt.color;
          do o.shape = world::Shape(pick(3)); while (o.shape == tgt.shape);
        } else {
          o.shape = tgt.shape;
          do o.color = std::string(colors[pick(colors.size())].name); while (o.color == tgt.color);
        }
      } else {
        do {
          o.color = std::string(colors[pick(colors.size())].name);
          o.shape = world::Shape(pick(3));
        } while (o.color == tgt.color && o.shape == tgt.shape);
      }
      insts.push_back(o);
    }
    const double res = double(spec.resolution);
    for (std::size_t i = 0; i < insts.size(); ++i) {
      auto& in = insts[i];
      in.label = int(i + 1);
      in.radius = spec.min_radius + (spec.max_radius - spec.min_radius) * u01(rng);
      in.cx = in.radius + 2 + (res - 2 * in.radius - 4) * u01(rng);
      in.cy = in.radius + 2 + (res - 2 * in.radius - 4) * u01(rng);
      if (u01(rng) < spec.moving_probability) {
        const double speed = spec.min_speed + (spec.max_speed - spec.min_speed) * u01(rng);
        const double ang = 2.0 * std::numbers::pi * u01(rng);
        in.vx = speed * std::cos(ang);
        in.vy = speed * std::sin(ang);
      }
    }
    if (!detail::placement_ok(insts, spec)) continue;
    s.instances = std::move(insts);
    s.target = 1;
    try {
      s.expression = choose_expression(s, rng);
    } catch (const GenerationError&) {
      continue;
    }
    s.attributes = toy::describe(summaries(s), 0);
    render(s, spec.resolution, spec.frames);
    return s;
  }
  throw GenerationError("could not place " + std::to_string(n) + " instances in a " +
                        std::to_string(spec.resolution) + "px frame after " +
                        std::to_string(spec.max_attempts) + " attempts");
}

inline std::vector<SyntheticScene> generate_scenes(std::uint64_t seed, std::size_t count,
                                                   const SceneSpec& spec) {
  std::vector<SyntheticScene> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_scene(seed, i, spec));
  return out;
}

}  // namespace steerseg::scenes

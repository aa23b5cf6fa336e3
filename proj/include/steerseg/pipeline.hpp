#pragma once

// End-to-end inference: reasoning round, query prompt, dual grounding maps,
// candidate tracklets and fused selection.

#include <optional>
#include <string>
#include <vector>

#include "steerseg/backend.hpp"
#include "steerseg/errors.hpp"
#include "steerseg/prompting.hpp"
#include "steerseg/rollout.hpp"
#include "steerseg/tracklets.hpp"

namespace steerseg::pipeline {

struct QueryPlan {
  std::string expression;
  std::string reasoning;
  std::vector<std::string> attributes;
  std::string query_prompt;
  std::string warning;  // set when the reasoning round could not be parsed
};

/// Runs the reasoning round over the video keyframes when `use_cot` is set.
/// An unparseable response degrades to the attribute-free query.
inline QueryPlan plan_query(const std::string& expression, const rollout::Video& video,
                            const LanguageBackend& backend, const rollout::RolloutConfig& cfg,
                            bool use_cot) {
  QueryPlan plan;
  plan.expression = expression;
  if (use_cot) {
    std::vector<const Image*> frames;
    for (std::size_t t : rollout::keyframe_indices(video.size(), cfg.video_keyframes)) {
      frames.push_back(&video.frames[t]);
    }
    const std::string raw = backend.generate(prompting::build_cot_prompt(expression), frames);
    try {
      auto parsed = prompting::parse_cot_response(raw);
      plan.reasoning = std::move(parsed.reasoning);
      plan.attributes = std::move(parsed.attributes);
    } catch (const ParseError& e) {
      plan.warning = std::string("reasoning round unparseable, continuing without attributes: ") + e.what();
    }
  }
  plan.query_prompt = prompting::build_query_prompt(expression, plan.attributes);
  return plan;
}

struct Options {
  rollout::RolloutConfig rollout;
  tracklets::SelectionConfig selection;
  bool use_cot = true;
  SoftPromptPosition soft_position = SoftPromptPosition::prepend;
};

/// Everything that does not depend on alpha.
struct Candidates {
  QueryPlan plan;
  rollout::GroundingMaps maps;
  std::vector<tracklets::PointPrompt> points;
  tracklets::BuildResult built;
  std::size_t height = 0, width = 0, frames = 0;
};

inline Candidates build_candidates(const rollout::Video& video, const std::string& expression,
                                   const LanguageBackend& backend, const Segmenter& segmenter,
                                   const Matrix* frame_prompts, const Matrix* video_prompts,
                                   const Options& opt) {
  opt.rollout.check();
  opt.selection.check();
  require(video.size() > 0, "pipeline: empty video");
  require(segmenter.num_frames() == video.size(), "pipeline: segmenter and video lengths differ");
  Candidates c;
  c.frames = video.size();
  c.height = video.frames.front().height;
  c.width = video.frames.front().width;
  c.plan = plan_query(expression, video, backend, opt.rollout, opt.use_cot);
  c.maps = rollout::compute_grounding_maps(
      {&video, c.plan.query_prompt, frame_prompts, video_prompts, opt.soft_position}, backend,
      opt.rollout);
  c.points = tracklets::select_points(c.maps.frame_maps, c.maps.frame_keyframes, c.height, c.width);
  c.built = tracklets::build_tracklets(c.points, segmenter, c.maps.frame_keyframes,
                                       c.maps.frame_maps.extent(1), c.maps.frame_maps.extent(2),
                                       opt.selection);
  return c;
}

struct Selection {
  std::vector<tracklets::Tracklet> scored;  // copies carrying s for this alpha
  std::optional<std::size_t> chosen;
  tracklets::FinalMasks masks;
  double alpha = 0;
};

inline Selection select(const Candidates& c, double alpha, const rollout::RolloutConfig& rcfg,
                        double threshold = 0.5) {
  require(alpha >= 0 && alpha <= 1, "select: alpha must be in [0, 1]");
  Selection out;
  out.alpha = alpha;
  out.scored = c.built.tracklets;
  for (auto& t : out.scored) tracklets::score_tracklet(t, c.maps, alpha, rcfg.video_downsample);
  if (out.scored.empty()) {
    out.masks = tracklets::empty_masks(c.frames, c.height, c.width);
    return out;
  }
  out.chosen = tracklets::select_best(out.scored);
  out.masks = tracklets::finalize(out.scored[*out.chosen].masks, c.height, c.width, threshold);
  return out;
}

struct Result {
  Candidates candidates;
  Selection selection;
};

inline Result run(const rollout::Video& video, const std::string& expression,
                  const LanguageBackend& backend, const Segmenter& segmenter,
                  const Matrix* frame_prompts, const Matrix* video_prompts, const Options& opt) {
  Result r;
  r.candidates = build_candidates(video, expression, backend, segmenter, frame_prompts, video_prompts, opt);
  r.selection = select(r.candidates, opt.selection.alpha, opt.rollout, opt.selection.binarize_threshold);
  return r;
}

}  // namespace steerseg::pipeline

#pragma once

// Attention rollout over a layer range and the per-frame / joint-video
// grounding maps of the response token.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "steerseg/backend.hpp"
#include "steerseg/errors.hpp"
#include "steerseg/numerics.hpp"

namespace steerseg::rollout {

using numerics::DenseGrid;

struct RolloutConfig {
  int first_layer = -1;  // negative: the backend's default range
  int last_layer = -1;
  std::size_t frame_keyframes = 16;
  std::size_t video_keyframes = 8;
  std::size_t video_downsample = 2;

  void check() const {
    require(frame_keyframes >= 1 && video_keyframes >= 1, "rollout: keyframe counts must be >= 1");
    require(video_keyframes <= frame_keyframes, "rollout: T_v must not exceed T_f");
    require(video_downsample >= 1, "rollout: video downsample must be >= 1");
    require((first_layer < 0) == (last_layer < 0),
            "rollout: set both layer bounds or neither");
    require(first_layer <= last_layer, "rollout: first layer after last layer");
  }
};

/// ½ (mean_h A_h + I).
inline Matrix layer_transition(const std::vector<Matrix>& heads) {
  require(!heads.empty(), "layer_transition: no heads");
  const auto n = heads.front().rows();
  Matrix mean = Matrix::Zero(n, n);
  for (const auto& a : heads) {
    require(a.rows() == n && a.cols() == n, "layer_transition: head matrices must be square and equal size");
    mean += a;
  }
  mean /= double(heads.size());
  return 0.5 * (mean + Matrix::Identity(n, n));
}

inline std::pair<int, int> resolve_range(const AttentionTensor& att, int first, int last) {
  require(att.num_layers() > 0, "rollout: empty attention tensor");
  require(first <= last, "rollout: first layer " + std::to_string(first) + " after last " +
                             std::to_string(last));
  require(att.has_layer(first) && att.has_layer(last),
          "rollout: layer range [" + std::to_string(first) + ", " + std::to_string(last) +
              "] outside captured layers [" + std::to_string(att.first_layer) + ", " +
              std::to_string(att.last_layer()) + "]");
  return {first, last};
}

/// R = Ã(last) · ... · Ã(first): later layers multiply from the left.
inline Matrix rollout(const AttentionTensor& att, int first, int last) {
  resolve_range(att, first, last);
  Matrix r = layer_transition(att.layer(first));
  for (int l = first + 1; l <= last; ++l) r = layer_transition(att.layer(l)) * r;
  return r;
}

/// Row i_q of the rollout, computed by vector-matrix products only.
inline RowVector query_rollout(const AttentionTensor& att, int first, int last, std::size_t iq) {
  resolve_range(att, first, last);
  const auto n = Eigen::Index(att.seq_len());
  require(Eigen::Index(iq) < n, "query_rollout: i_q out of range");
  RowVector u = RowVector::Zero(n);
  u(Eigen::Index(iq)) = 1.0;
  for (int l = last; l >= first; --l) u = u * layer_transition(att.layer(l));
  return u;
}

/// Gathers R[i_q, visual_indices] in the given order.
inline Vector extract_query_attention(const Matrix& r, std::size_t iq,
                                      const std::vector<std::size_t>& visual_indices) {
  require(Eigen::Index(iq) < r.rows(), "extract_query_attention: i_q out of range");
  Vector out(Eigen::Index(visual_indices.size()));
  for (std::size_t k = 0; k < visual_indices.size(); ++k) {
    require(Eigen::Index(visual_indices[k]) < r.cols(),
            "extract_query_attention: visual index out of range");
    out(Eigen::Index(k)) = r(Eigen::Index(iq), Eigen::Index(visual_indices[k]));
  }
  return out;
}

inline Vector extract_query_attention(const RowVector& row,
                                      const std::vector<std::size_t>& visual_indices) {
  Vector out(Eigen::Index(visual_indices.size()));
  for (std::size_t k = 0; k < visual_indices.size(); ++k) {
    require(Eigen::Index(visual_indices[k]) < row.size(),
            "extract_query_attention: visual index out of range");
    out(Eigen::Index(k)) = row(Eigen::Index(visual_indices[k]));
  }
  return out;
}

/// Cotangents of every captured attention matrix given the cotangent of the
/// query rollout row. Layers outside [first, last] get empty matrices.
inline std::vector<std::vector<Matrix>> query_rollout_backward(const AttentionTensor& att,
                                                               int first, int last,
                                                               std::size_t iq,
                                                               const RowVector& d_row) {
  resolve_range(att, first, last);
  const auto n = Eigen::Index(att.seq_len());
  require(d_row.size() == n, "query_rollout_backward: cotangent length mismatch");
  std::vector<Matrix> trans;
  for (int l = first; l <= last; ++l) trans.push_back(layer_transition(att.layer(l)));
  // u[l - first] is the row entering layer l from above.
  std::vector<RowVector> upper(trans.size());
  RowVector u = RowVector::Zero(n);
  u(Eigen::Index(iq)) = 1.0;
  for (int l = last; l >= first; --l) {
    upper[std::size_t(l - first)] = u;
    u = u * trans[std::size_t(l - first)];
  }
  std::vector<std::vector<Matrix>> out(att.num_layers());
  RowVector g = d_row;
  const double per_head = 0.5 / double(att.heads());
  for (int l = first; l <= last; ++l) {
    const std::size_t k = std::size_t(l - first);
    const Matrix d_trans = upper[k].transpose() * g;
    out[std::size_t(l - att.first_layer)].assign(att.heads(), d_trans * per_head);
    g = g * trans[k].transpose();
  }
  return out;
}

/// round(linspace(0, T-1, k)) with duplicates removed (k clamped to T).
inline std::vector<std::size_t> keyframe_indices(std::size_t total_frames, std::size_t k) {
  require(total_frames >= 1 && k >= 1, "keyframe_indices: counts must be >= 1");
  k = std::min(k, total_frames);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) {
    const double pos = k == 1 ? 0.0 : double(i) * double(total_frames - 1) / double(k - 1);
    const auto idx = static_cast<std::size_t>(std::llround(pos));
    if (out.empty() || out.back() != idx) out.push_back(idx);
  }
  return out;
}

struct GroundingMaps {
  DenseGrid frame_maps;  // T_f x H_v x W_v
  DenseGrid video_map;   // T_v x H_v/2 x W_v/2
  std::vector<std::size_t> frame_keyframes;
  std::vector<std::size_t> video_keyframes;
  std::vector<std::size_t> frame_query_index;  // i_q of each keyframe forward
  std::size_t video_query_index = 0;
  std::string generated_word;
};

struct Video {
  std::vector<Image> frames;
  std::size_t size() const { return frames.size(); }
};

inline std::pair<int, int> layer_range(const RolloutConfig& cfg, const BackendForwardResult& res) {
  if (cfg.first_layer >= 0) return {cfg.first_layer, cfg.last_layer};
  return {res.default_rollout_first, res.default_rollout_last};
}

/// Visual-token attention of the query row reshaped to (frames, H, W).
inline DenseGrid query_map(const BackendForwardResult& res, const RolloutConfig& cfg) {
  const auto [first, last] = layer_range(cfg, res);
  const RowVector row = query_rollout(res.attention, first, last, res.query_index);
  const auto vis = res.tokens.visual_indices();
  const auto& lay = res.tokens.visual_layout;
  std::vector<double> values(vis.size());
  for (std::size_t k = 0; k < vis.size(); ++k) values[k] = row(Eigen::Index(vis[k]));
  return DenseGrid({lay.frames, lay.height, lay.width}, std::move(values));
}

inline BackendForwardResult forward_or_throw(const LanguageBackend& backend,
                                             const ForwardRequest& req, long frame_index) {
  try {
    BackendForwardResult res = backend.forward(req);
    res.check();
    res.attention.validate();
    return res;
  } catch (const BackendError&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendError(std::string("backend forward failed at frame ") +
                           std::to_string(frame_index) + ": " + e.what(),
                       frame_index);
  }
}

struct MapRequest {
  const Video* video = nullptr;
  std::string query_prompt;
  const Matrix* soft_prompts = nullptr;
  SoftPromptPosition soft_position = SoftPromptPosition::prepend;
};

/// One forward per keyframe; per-frame rollout of the response token.
inline DenseGrid compute_frame_maps(const MapRequest& req, const LanguageBackend& backend,
                                    const RolloutConfig& cfg, std::vector<std::size_t>* keyframes,
                                    std::vector<std::size_t>* query_indices = nullptr,
                                    std::string* generated_word = nullptr) {
  cfg.check();
  require(req.video && req.video->size() > 0, "compute_frame_maps: empty video");
  const auto kfs = keyframe_indices(req.video->size(), cfg.frame_keyframes);
  std::vector<DenseGrid> slices;
  if (query_indices) query_indices->clear();
  for (std::size_t t : kfs) {
    ForwardRequest fr;
    fr.prompt = req.query_prompt;
    fr.frames = {&req.video->frames[t]};
    fr.soft_prompts = req.soft_prompts;
    fr.soft_position = req.soft_position;
    fr.token_pool = 1;
    const auto res = forward_or_throw(backend, fr, long(t));
    slices.push_back(query_map(res, cfg).slice(0));
    if (query_indices) query_indices->push_back(res.query_index);
    if (generated_word) *generated_word = res.generated_word;
  }
  if (keyframes) *keyframes = kfs;
  return DenseGrid::stack(slices);
}

/// One joint forward over the video keyframes with merged visual tokens.
inline DenseGrid compute_video_map(const MapRequest& req, const LanguageBackend& backend,
                                   const RolloutConfig& cfg, std::vector<std::size_t>* keyframes,
                                   std::size_t* query_index = nullptr) {
  cfg.check();
  require(req.video && req.video->size() > 0, "compute_video_map: empty video");
  const auto kfs = keyframe_indices(req.video->size(), cfg.video_keyframes);
  ForwardRequest fr;
  fr.prompt = req.query_prompt;
  for (std::size_t t : kfs) fr.frames.push_back(&req.video->frames[t]);
  fr.soft_prompts = req.soft_prompts;
  fr.soft_position = req.soft_position;
  fr.token_pool = cfg.video_downsample;
  const auto res = forward_or_throw(backend, fr, long(kfs.front()));
  if (keyframes) *keyframes = kfs;
  if (query_index) *query_index = res.query_index;
  return query_map(res, cfg);
}

struct DualRequest {
  const Video* video = nullptr;
  std::string query_prompt;
  const Matrix* frame_prompts = nullptr;
  const Matrix* video_prompts = nullptr;
  SoftPromptPosition soft_position = SoftPromptPosition::prepend;
};

inline GroundingMaps compute_grounding_maps(const DualRequest& req, const LanguageBackend& backend,
                                            const RolloutConfig& cfg) {
  GroundingMaps maps;
  maps.frame_maps = compute_frame_maps({req.video, req.query_prompt, req.frame_prompts, req.soft_position},
                                       backend, cfg, &maps.frame_keyframes,
                                       &maps.frame_query_index, &maps.generated_word);
  maps.video_map = compute_video_map({req.video, req.query_prompt, req.video_prompts, req.soft_position},
                                     backend, cfg, &maps.video_keyframes, &maps.video_query_index);
  return maps;
}

}  // namespace steerseg::rollout

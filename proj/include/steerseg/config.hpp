#pragma once

// Pipeline configuration: one JSON document, unknown keys rejected.

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "steerseg/errors.hpp"
#include "steerseg/rollout.hpp"
#include "steerseg/scenes.hpp"
#include "steerseg/steering.hpp"
#include "steerseg/toy_backend.hpp"
#include "steerseg/tracklets.hpp"
#include "steerseg/zip.hpp"

namespace steerseg::config {

using nlohmann::json;

enum class BackendKind { toy, dump, plugin };

inline const char* backend_name(BackendKind b) {
  return b == BackendKind::toy ? "toy" : b == BackendKind::dump ? "dump" : "plugin";
}

struct PipelineConfig {
  BackendKind backend = BackendKind::toy;
  std::uint64_t seed = 0;
  bool use_cot = true;
  rollout::RolloutConfig rollout;
  tracklets::SelectionConfig selection;
  steering::TrainConfig train;
  toy::ToyConfig toy;
  scenes::SceneSpec scenes;
  std::string frame_prompts;  // checkpoint paths; empty means none
  std::string video_prompts;
  int boundary_tolerance = -1;  // negative: max(1, round(0.008 * diagonal))

  void check() const {
    rollout.check();
    selection.check();
    train.check();
    scenes.check();
  }
};

namespace detail {

inline void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

inline SoftPromptPosition parse_position(const std::string& s) {
  if (s == "prepend") return SoftPromptPosition::prepend;
  if (s == "append") return SoftPromptPosition::append;
  throw ConfigError("train.position: expected 'prepend' or 'append', got '" + s + "'");
}

}  // namespace detail

inline PipelineConfig from_json(const json& j) {
  using detail::read;
  detail::only_keys(j, "config", {"backend", "seed", "use_cot", "rollout", "selection", "train", "toy",
                                  "scenes", "prompts", "boundary_tolerance"});
  PipelineConfig c;
  std::string backend = "toy";
  read(j, "backend", backend, "config");
  if (backend == "toy") c.backend = BackendKind::toy;
  else if (backend == "dump") c.backend = BackendKind::dump;
  else if (backend == "plugin") c.backend = BackendKind::plugin;
  else throw ConfigError("config.backend: unknown backend '" + backend + "'");
  read(j, "seed", c.seed, "config");
  read(j, "use_cot", c.use_cot, "config");
  read(j, "boundary_tolerance", c.boundary_tolerance, "config");

  if (j.contains("rollout")) {
    const auto& r = j["rollout"];
    detail::only_keys(r, "rollout", {"first_layer", "last_layer", "frame_keyframes", "video_keyframes", "video_downsample"});
    read(r, "first_layer", c.rollout.first_layer, "rollout");
    read(r, "last_layer", c.rollout.last_layer, "rollout");
    read(r, "frame_keyframes", c.rollout.frame_keyframes, "rollout");
    read(r, "video_keyframes", c.rollout.video_keyframes, "rollout");
    read(r, "video_downsample", c.rollout.video_downsample, "rollout");
  }
  if (j.contains("selection")) {
    const auto& s = j["selection"];
    detail::only_keys(s, "selection", {"alpha", "nms_iou", "binarize_threshold", "logit_eps"});
    read(s, "alpha", c.selection.alpha, "selection");
    read(s, "nms_iou", c.selection.nms_iou, "selection");
    read(s, "binarize_threshold", c.selection.binarize_threshold, "selection");
    read(s, "logit_eps", c.selection.logit_eps, "selection");
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    detail::only_keys(t, "train", {"learning_rate", "steps", "effective_batch", "warmup_fraction", "n_p",
                                   "weight_decay", "beta1", "beta2", "adam_eps", "position"});
    read(t, "learning_rate", c.train.learning_rate, "train");
    read(t, "steps", c.train.steps, "train");
    read(t, "effective_batch", c.train.effective_batch, "train");
    read(t, "warmup_fraction", c.train.warmup_fraction, "train");
    read(t, "n_p", c.train.n_p, "train");
    read(t, "weight_decay", c.train.weight_decay, "train");
    read(t, "beta1", c.train.beta1, "train");
    read(t, "beta2", c.train.beta2, "train");
    read(t, "adam_eps", c.train.adam_eps, "train");
    std::string pos = "prepend";
    read(t, "position", pos, "train");
    c.train.position = detail::parse_position(pos);
  }
  if (j.contains("toy")) {
    const auto& t = j["toy"];
    detail::only_keys(t, "toy", {"seed", "patch", "random_scale", "output_scale", "sink_gen", "gather0", "gather1",
                                 "sink1", "readout", "sink_readout", "diffuse", "color_gain", "position_gain",
                                 "rbf_sigma", "word_noise", "color_projection"});
    auto& y = c.toy;
    read(t, "seed", y.seed, "toy");
    read(t, "patch", y.patch, "toy");
    read(t, "random_scale", y.random_scale, "toy");
    read(t, "output_scale", y.output_scale, "toy");
    read(t, "sink_gen", y.sink_gen, "toy");
    read(t, "gather0", y.gather0, "toy");
    read(t, "gather1", y.gather1, "toy");
    read(t, "sink1", y.sink1, "toy");
    read(t, "readout", y.readout, "toy");
    read(t, "sink_readout", y.sink_readout, "toy");
    read(t, "diffuse", y.diffuse, "toy");
    read(t, "color_gain", y.color_gain, "toy");
    read(t, "position_gain", y.position_gain, "toy");
    read(t, "rbf_sigma", y.rbf_sigma, "toy");
    read(t, "word_noise", y.word_noise, "toy");
    read(t, "color_projection", y.color_projection, "toy");
  }
  if (j.contains("scenes")) {
    const auto& s = j["scenes"];
    detail::only_keys(s, "scenes", {"min_instances", "max_instances", "resolution", "frames", "min_radius",
                                    "max_radius", "moving_probability", "min_speed", "max_speed", "max_attempts"});
    auto& y = c.scenes;
    read(s, "min_instances", y.min_instances, "scenes");
    read(s, "max_instances", y.max_instances, "scenes");
    read(s, "resolution", y.resolution, "scenes");
    read(s, "frames", y.frames, "scenes");
    read(s, "min_radius", y.min_radius, "scenes");
    read(s, "max_radius", y.max_radius, "scenes");
    read(s, "moving_probability", y.moving_probability, "scenes");
    read(s, "min_speed", y.min_speed, "scenes");
    read(s, "max_speed", y.max_speed, "scenes");
    read(s, "max_attempts", y.max_attempts, "scenes");
  }
  if (j.contains("prompts")) {
    const auto& p = j["prompts"];
    detail::only_keys(p, "prompts", {"frame", "video"});
    read(p, "frame", c.frame_prompts, "prompts");
    read(p, "video", c.video_prompts, "prompts");
  }
  try {
    c.check();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline PipelineConfig parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

inline PipelineConfig load(const std::filesystem::path& p) {
  std::string text;
  try {
    text = zip::read_file(p);
  } catch (const LoadError& e) {
    throw ConfigError(e.what());
  }
  try {
    return parse(text);
  } catch (const ConfigError& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

/// The --config path if given, else $STEERSEG_CONFIG, else the defaults.
inline PipelineConfig resolve(const std::string& cli_path) {
  if (!cli_path.empty()) return load(cli_path);
  if (const char* env = std::getenv("STEERSEG_CONFIG"); env && *env) return load(env);
  return {};
}

inline json to_json(const PipelineConfig& c) {
  json j;
  j["backend"] = backend_name(c.backend);
  j["seed"] = c.seed;
  j["use_cot"] = c.use_cot;
  j["boundary_tolerance"] = c.boundary_tolerance;
  j["rollout"] = {{"first_layer", c.rollout.first_layer},         {"last_layer", c.rollout.last_layer},
                  {"frame_keyframes", c.rollout.frame_keyframes}, {"video_keyframes", c.rollout.video_keyframes},
                  {"video_downsample", c.rollout.video_downsample}};
  j["selection"] = {{"alpha", c.selection.alpha},
                    {"nms_iou", c.selection.nms_iou},
                    {"binarize_threshold", c.selection.binarize_threshold},
                    {"logit_eps", c.selection.logit_eps}};
  j["train"] = {{"learning_rate", c.train.learning_rate}, {"steps", c.train.steps},
                {"effective_batch", c.train.effective_batch}, {"warmup_fraction", c.train.warmup_fraction},
                {"n_p", c.train.n_p}, {"weight_decay", c.train.weight_decay}, {"beta1", c.train.beta1},
                {"beta2", c.train.beta2}, {"adam_eps", c.train.adam_eps},
                {"position", c.train.position == SoftPromptPosition::prepend ? "prepend" : "append"}};
  j["prompts"] = {{"frame", c.frame_prompts}, {"video", c.video_prompts}};
  return j;
}

}  // namespace steerseg::config

#pragma once

// VOS-style dataset directories and the exported mask directory.
//
//   <root>/JPEGImages/<video>/<frame>.png
//   <root>/Annotations/<video>/<frame>.png   indexed, label = object id
//   <root>/expressions.json                  {video: {object id: [text, ...]}}
//
// Frames are PNG only.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "steerseg/container.hpp"
#include "steerseg/errors.hpp"
#include "steerseg/image.hpp"
#include "steerseg/rollout.hpp"
#include "steerseg/tracklets.hpp"

namespace steerseg::vos {

namespace fs = std::filesystem;

struct VosVideo {
  std::string id;
  rollout::Video video;
  std::vector<LabelMap> labels;
  std::map<int, std::vector<std::string>> expressions;
};

struct VosSample {
  const VosVideo* video = nullptr;
  int object_id = 0;
  std::string expression;

  std::vector<numerics::DenseGrid> gt() const {
    std::vector<numerics::DenseGrid> out;
    for (const auto& l : video->labels) out.push_back(l.indicator(object_id));
    return out;
  }
};

inline std::vector<fs::path> sorted_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw LoadError("missing directory " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::map<std::string, std::map<int, std::vector<std::string>>> read_manifest(const fs::path& p) {
  if (!fs::exists(p)) throw LoadError("missing expressions manifest " + p.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(zip::read_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(p.string() + ": " + e.what());
  }
  std::map<std::string, std::map<int, std::vector<std::string>>> out;
  if (!j.is_object()) throw LoadError(p.string() + ": expected an object of videos");
  for (auto& [vid, objs] : j.items()) {
    if (!objs.is_object()) throw LoadError(p.string() + ": video " + vid + " must map object ids");
    for (auto& [oid, exprs] : objs.items()) {
      int id = 0;
      try {
        std::size_t used = 0;
        id = std::stoi(oid, &used);
        if (used != oid.size() || id <= 0 || id > 255) throw std::invalid_argument(oid);
      } catch (const std::exception&) {
        throw LoadError(p.string() + ": bad object id '" + oid + "' in video " + vid);
      }
      if (!exprs.is_array()) throw LoadError(p.string() + ": expressions of " + vid + "/" + oid + " must be a list");
      for (const auto& e : exprs) {
        if (!e.is_string()) throw LoadError(p.string() + ": non-string expression in " + vid + "/" + oid);
        out[vid][id].push_back(e.get<std::string>());
      }
    }
  }
  return out;
}

inline std::vector<VosVideo> load_vos_directory(const fs::path& root) {
  const auto manifest = read_manifest(root / "expressions.json");
  std::vector<VosVideo> out;
  for (const auto& [vid, objs] : manifest) {
    VosVideo v;
    v.id = vid;
    v.expressions = objs;
    for (const auto& f : sorted_files(root / "JPEGImages" / vid)) {
      if (f.extension() != ".png") throw LoadError(f.string() + ": unsupported frame format (PNG only)");
      v.video.frames.push_back(read_png_rgb(f));
    }
    for (const auto& f : sorted_files(root / "Annotations" / vid)) {
      v.labels.push_back(read_png_labels(f));
    }
    if (v.video.frames.empty()) throw LoadError("video " + vid + " has no frames");
    if (v.labels.size() != v.video.size()) {
      throw LoadError("video " + vid + ": " + std::to_string(v.video.size()) + " frames but " +
                      std::to_string(v.labels.size()) + " masks");
    }
    for (std::size_t t = 0; t < v.video.size(); ++t) {
      const auto& fr = v.video.frames[t];
      if (fr.height != v.video.frames[0].height || fr.width != v.video.frames[0].width ||
          v.labels[t].height != fr.height || v.labels[t].width != fr.width) {
        throw LoadError("video " + vid + ": frame " + std::to_string(t) + " size mismatch");
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

/// (video, object, expression) triples in manifest order.
inline std::vector<VosSample> samples(const std::vector<VosVideo>& videos) {
  std::vector<VosSample> out;
  for (const auto& v : videos)
    for (const auto& [oid, exprs] : v.expressions)
      for (const auto& e : exprs) out.push_back({&v, oid, e});
  return out;
}

inline std::string frame_name(std::size_t t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu.png", t);
  return buf;
}

inline void write_vos_directory(const fs::path& root, const std::vector<VosVideo>& videos) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& v : videos) {
    require(v.labels.size() == v.video.size(), "write_vos_directory: frame/mask count mismatch");
    for (std::size_t t = 0; t < v.video.size(); ++t) {
      write_png_rgb(root / "JPEGImages" / v.id / frame_name(t), v.video.frames[t]);
      write_png_indexed(root / "Annotations" / v.id / frame_name(t), v.labels[t]);
    }
    auto& objs = j[v.id] = nlohmann::ordered_json::object();
    for (const auto& [oid, exprs] : v.expressions) objs[std::to_string(oid)] = exprs;
  }
  zip::write_file(root / "expressions.json", j.dump(2) + "\n");
}

// Exported masks:
//   <dir>/masks/<frame>.png       indexed, 1 = target
//   <dir>/probabilities.bin       container with blob "p" (frames x H x W)

inline void write_mask_directory(const fs::path& dir, const tracklets::FinalMasks& m) {
  require(!m.binary.empty() && m.binary.size() == m.probabilities.size(),
          "write_mask_directory: empty or inconsistent mask sequence");
  const std::size_t h = m.binary[0].extent(0), w = m.binary[0].extent(1);
  std::vector<double> all;
  for (std::size_t t = 0; t < m.binary.size(); ++t) {
    LabelMap lab(h, w);
    for (std::size_t i = 0; i < lab.labels.size(); ++i) lab.labels[i] = m.binary[t][i] != 0.0 ? 1 : 0;
    write_png_indexed(dir / "masks" / frame_name(t), lab);
    all.insert(all.end(), m.probabilities[t].values().begin(), m.probabilities[t].values().end());
  }
  container::ArrayContainer c;
  c.manifest.set("magic", std::string("steerseg-masks"));
  c.manifest.set("version", 1);
  c.manifest.set("frames", m.binary.size());
  c.manifest.set("height", h);
  c.manifest.set("width", w);
  c.put("p", all);
  c.save(dir / "probabilities.bin");
}

inline tracklets::FinalMasks read_mask_directory(const fs::path& dir) {
  const auto c = container::ArrayContainer::load(dir / "probabilities.bin");
  if (!c.manifest.has("magic") || c.manifest.get("magic") != "steerseg-masks") {
    throw FormatError(dir.string() + ": not a mask directory");
  }
  const auto frames = std::size_t(c.manifest.get_int("frames"));
  const auto h = std::size_t(c.manifest.get_int("height"));
  const auto w = std::size_t(c.manifest.get_int("width"));
  const auto p = c.get("p");
  if (frames == 0 || p.size() != frames * h * w) throw FormatError(dir.string() + ": probability blob size mismatch");
  const auto files = sorted_files(dir / "masks");
  if (files.size() != frames) throw LoadError(dir.string() + ": mask count does not match the manifest");
  tracklets::FinalMasks out;
  for (std::size_t t = 0; t < frames; ++t) {
    const auto lab = read_png_labels(files[t]);
    if (lab.height != h || lab.width != w) throw LoadError(files[t].string() + ": size mismatch");
    auto b = numerics::DenseGrid::matrix(h, w);
    for (std::size_t i = 0; i < lab.labels.size(); ++i) b[i] = lab.labels[i] != 0 ? 1.0 : 0.0;
    out.binary.push_back(std::move(b));
    out.probabilities.emplace_back(numerics::Shape{h, w},
                                   std::vector<double>(p.begin() + long(t * h * w), p.begin() + long((t + 1) * h * w)));
  }
  return out;
}

}  // namespace steerseg::vos

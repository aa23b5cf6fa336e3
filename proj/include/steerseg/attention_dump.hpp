#pragma once

// Attention dumps: the file boundary for models that run outside this
// process. A stored zip holding `manifest` (key=value lines) and one float32
// little-endian blob per layer, `layer_<l>.bin`, laid out head-major then
// row-major.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "steerseg/backend.hpp"
#include "steerseg/container.hpp"
#include "steerseg/errors.hpp"

namespace steerseg::dump {

inline constexpr const char* kMagic = "steerseg-attention-dump";
inline constexpr int kVersion = 1;
inline constexpr double kLoadRowTolerance = 1e-3;

inline char role_code(TokenRole r) {
  switch (r) {
    case TokenRole::soft_prompt: return 'p';
    case TokenRole::text: return 't';
    case TokenRole::visual: return 'v';
    case TokenRole::generated: return 'g';
  }
  return '?';
}

inline TokenRole role_from_code(char c) {
  switch (c) {
    case 'p': return TokenRole::soft_prompt;
    case 't': return TokenRole::text;
    case 'v': return TokenRole::visual;
    case 'g': return TokenRole::generated;
    default: throw FormatError(std::string("attention dump: unknown token role code '") + c + "'");
  }
}

inline std::string layer_blob(int l) { return "layer_" + std::to_string(l) + ".bin"; }

inline container::ArrayContainer to_container(const BackendForwardResult& res) {
  res.check();
  const auto& att = res.attention;
  container::ArrayContainer c;
  auto& m = c.manifest;
  m.set("magic", std::string(kMagic));
  m.set("version", kVersion);
  m.set("first_layer", att.first_layer);
  m.set("last_layer", att.last_layer());
  m.set("heads", att.heads());
  m.set("seq_len", att.seq_len());
  m.set("n_v", res.tokens.visual_layout.count());
  m.set("visual_layout", std::to_string(res.tokens.visual_layout.frames) + "x" +
                             std::to_string(res.tokens.visual_layout.height) + "x" +
                             std::to_string(res.tokens.visual_layout.width));
  m.set("query_index", res.query_index);
  m.set("generated_word", res.generated_word);
  m.set("rollout_first", res.default_rollout_first);
  m.set("rollout_last", res.default_rollout_last);
  std::string roles, ids;
  for (std::size_t i = 0; i < res.tokens.size(); ++i) {
    roles += role_code(res.tokens.roles[i]);
    if (i) ids += ',';
    ids += std::to_string(res.tokens.ids[i]);
  }
  m.set("token_roles", roles);
  m.set("token_ids", ids);
  m.set("dtype", std::string("float32"));
  m.set("byte_order", std::string("little"));
  for (int l = att.first_layer; l <= att.last_layer(); ++l) {
    std::vector<double> flat;
    flat.reserve(att.heads() * att.seq_len() * att.seq_len());
    for (const auto& a : att.layer(l))
      for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index k = 0; k < a.cols(); ++k) flat.push_back(a(r, k));
    c.put(layer_blob(l), flat);
  }
  return c;
}

inline std::string serialize(const BackendForwardResult& res) { return to_container(res).serialize(); }

namespace detail {

inline std::size_t get_size(const container::Manifest& m, const std::string& key) {
  const long long v = m.get_int(key);
  if (v < 0) throw FormatError("attention dump: negative " + key);
  return std::size_t(v);
}

inline VisualLayout parse_layout(const std::string& s) {
  VisualLayout out;
  std::size_t a = s.find('x'), b = a == std::string::npos ? a : s.find('x', a + 1);
  if (a == std::string::npos || b == std::string::npos) throw FormatError("attention dump: bad visual_layout '" + s + "'");
  try {
    out.frames = std::stoul(s.substr(0, a));
    out.height = std::stoul(s.substr(a + 1, b - a - 1));
    out.width = std::stoul(s.substr(b + 1));
  } catch (const std::exception&) {
    throw FormatError("attention dump: bad visual_layout '" + s + "'");
  }
  return out;
}

}  // namespace detail

/// Rebuilds a forward result (no embeddings). FormatError on structural
/// problems, ValidationError naming the layer/head/row when a row is not
/// stochastic within 1e-3.
inline BackendForwardResult from_container(const container::ArrayContainer& c) {
  const auto& m = c.manifest;
  if (!m.has("magic") || m.get("magic") != kMagic) throw FormatError("attention dump: bad magic");
  if (m.get_int("version") != kVersion) {
    throw FormatError("attention dump: unsupported version " + m.get("version"));
  }
  if (m.get("dtype") != "float32") throw FormatError("attention dump: unsupported dtype " + m.get("dtype"));
  if (m.get("byte_order") != "little") throw FormatError("attention dump: unsupported byte order " + m.get("byte_order"));

  BackendForwardResult res;
  const int first = int(m.get_int("first_layer"));
  const int last = int(m.get_int("last_layer"));
  const std::size_t heads = detail::get_size(m, "heads");
  const std::size_t n = detail::get_size(m, "seq_len");
  if (last < first || heads == 0 || n == 0) throw FormatError("attention dump: empty layer range, heads or sequence");

  const std::string roles = m.get("token_roles");
  if (roles.size() != n) throw FormatError("attention dump: token_roles length differs from seq_len");
  for (char ch : roles) res.tokens.roles.push_back(role_from_code(ch));
  const std::string ids = m.get("token_ids");
  std::size_t start = 0;
  while (start <= ids.size() && !ids.empty()) {
    std::size_t comma = ids.find(',', start);
    if (comma == std::string::npos) comma = ids.size();
    try {
      res.tokens.ids.push_back(std::stoi(ids.substr(start, comma - start)));
    } catch (const std::exception&) {
      throw FormatError("attention dump: bad token id list");
    }
    start = comma + 1;
  }
  if (res.tokens.ids.size() != n) throw FormatError("attention dump: token_ids length differs from seq_len");
  res.tokens.visual_layout = detail::parse_layout(m.get("visual_layout"));
  if (detail::get_size(m, "n_v") != res.tokens.visual_layout.count() ||
      res.tokens.count(TokenRole::visual) != res.tokens.visual_layout.count()) {
    throw FormatError("attention dump: n_v disagrees with the visual layout or token roles");
  }
  res.query_index = detail::get_size(m, "query_index");
  res.generated_word = m.get("generated_word");
  res.default_rollout_first = int(m.get_int("rollout_first"));
  res.default_rollout_last = int(m.get_int("rollout_last"));

  res.attention.first_layer = first;
  for (int l = first; l <= last; ++l) {
    const std::string name = layer_blob(l);
    if (!c.has(name)) throw FormatError("attention dump: missing " + name);
    if (c.raw(name).size() != heads * n * n * 4) {
      throw FormatError("attention dump: " + name + " holds " + std::to_string(c.raw(name).size()) +
                        " bytes, expected " + std::to_string(heads * n * n * 4) + " for seq_len " +
                        std::to_string(n));
    }
    const auto flat = c.get(name);
    std::vector<Matrix> hs;
    std::size_t at = 0;
    for (std::size_t h = 0; h < heads; ++h) {
      Matrix a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index k = 0; k < a.cols(); ++k) a(r, k) = flat[at++];
      hs.push_back(std::move(a));
    }
    res.attention.layers.push_back(std::move(hs));
  }
  try {
    res.check();
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("attention dump: ") + e.what());
  }
  res.attention.validate(kLoadRowTolerance);
  return res;
}

inline BackendForwardResult parse(const std::string& bytes) {
  return from_container(container::ArrayContainer::parse(bytes));
}

inline void write_dump(const std::filesystem::path& path, const BackendForwardResult& res) {
  to_container(res).save(path);
}

inline BackendForwardResult load_attention_dump(const std::filesystem::path& path) {
  return parse(zip::read_file(path));
}

/// Replays recorded forwards for one video: a dump per frame keyframe
/// (single-frame requests) and one joint dump (multi-frame requests). Frames
/// are identified by equality with the video's frames.
class DumpBackend final : public LanguageBackend {
 public:
  DumpBackend(const std::vector<Image>& frames, std::map<std::size_t, BackendForwardResult> frame_dumps,
              BackendForwardResult video_dump, std::string reasoning = {})
      : frames_(frames), frame_dumps_(std::move(frame_dumps)), video_dump_(std::move(video_dump)),
        reasoning_(std::move(reasoning)) {}

  std::size_t embedding_dim() const override { return 0; }
  Matrix embed_text(const std::string&) const override {
    throw CapabilityError("dump backend has no embeddings");
  }
  std::string generate(const std::string&, const std::vector<const Image*>&) const override {
    if (reasoning_.empty()) throw CapabilityError("dump backend has no recorded reasoning");
    return reasoning_;
  }
  BackendForwardResult forward(const ForwardRequest& req) const override {
    if (req.soft_prompts && req.soft_prompts->rows() > 0) {
      throw CapabilityError("dump backend cannot apply soft prompts");
    }
    require(!req.frames.empty(), "dump backend: no frames");
    if (req.frames.size() > 1) return video_dump_;
    for (std::size_t t = 0; t < frames_.size(); ++t) {
      if (&frames_[t] == req.frames[0] || frames_[t] == *req.frames[0]) {
        auto it = frame_dumps_.find(t);
        if (it == frame_dumps_.end()) throw BackendError("no attention dump for frame " + std::to_string(t), long(t));
        return it->second;
      }
    }
    throw BackendError("dump backend: request frame is not part of the video", -1);
  }
  bool supports_gradient() const override { return false; }

 private:
  const std::vector<Image>& frames_;
  std::map<std::size_t, BackendForwardResult> frame_dumps_;
  BackendForwardResult video_dump_;
  std::string reasoning_;
};

}  // namespace steerseg::dump

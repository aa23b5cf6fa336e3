#pragma once

// Deterministic desk-scale language backend: a 4-layer, 2-head, d=32
// attention-only transformer with hand-placed circuits on top of seeded
// random weights, plus a pixel-analysis stand-in for the reasoning round.
//
// Embedding layout (d = 32):
//   0-7   color code: mean RBF response of patch pixels to 8 color anchors
//   8-9   x, y position in [-1, 1]
//   10    frame position in [-1, 1] (joint video forward)
//   11-15 flags: visual, text, generated, <bos>, attribute word
//   16-25 descriptor slots written by the gather heads
//   26-31 token identity: random per word, projected mean color per patch

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "steerseg/backend.hpp"
#include "steerseg/errors.hpp"
#include "steerseg/image.hpp"
#include "steerseg/toy_world.hpp"

namespace steerseg::toy {

struct ToyConfig {
  std::uint64_t seed = 7;
  std::size_t patch = 8;
  double random_scale = 0.5;   // std of Q/K/V entries is random_scale / sqrt(d)
  double output_scale = 1.0;   // std of W_O entries is output_scale / sqrt(d_head)
  double sink_gen = 2.0;       // generated token -> <bos>, every head in layers 0-1
  double gather0 = 6.0;        // layer 0 head 0: generated token -> attribute words
  double gather1 = 5.0;        // layer 1 head 0: generated token -> attribute words
  double sink1 = 7.0;          // layer 1 head 0: generated token -> <bos>
  double readout = 5.0;        // layers 2-3 head 0: descriptor . patch features
  double sink_readout = 6.0;   // layers 2-3 head 0: generated token -> <bos>
  double diffuse = 3.0;        // layers 2-3 head 1: generated token -> all visual tokens
  double color_gain = 2.0;
  double position_gain = 1.0;
  double rbf_sigma = 0.2;
  double word_noise = 0.5;
  double color_projection = 0.3;
};

inline constexpr std::size_t kDim = 32;
inline constexpr std::size_t kHeads = 2;
inline constexpr std::size_t kLayers = 4;
inline constexpr std::size_t kHeadDim = 16;
inline constexpr int kRolloutFirst = 2;
inline constexpr int kRolloutLast = 3;

namespace dims {
inline constexpr int color = 0;
inline constexpr int pos_x = 8;
inline constexpr int pos_y = 9;
inline constexpr int time = 10;
inline constexpr int visual = 11;
inline constexpr int text = 12;
inline constexpr int generated = 13;
inline constexpr int bos = 14;
inline constexpr int attribute = 15;
inline constexpr int descriptor = 16;
inline constexpr int identity = 26;
}  // namespace dims

struct Head {
  Matrix wq, wk, wv, wo;  // d x dh, d x dh, d x dh, dh x d
};

namespace detail {

struct Component {
  std::string color;
  world::Shape shape = world::Shape::circle;
  std::size_t area = 0;
  double cx = 0, cy = 0;
  std::size_t first_pixel = 0;
};

inline std::size_t nearest_paint(const Image& img, std::size_t r, std::size_t c) {
  // 0 = background, i + 1 = kPaintColors[i]
  double best = 0;
  for (int ch = 0; ch < 3; ++ch) {
    const double d = img.at(r, c, ch) - world::kBackground[ch];
    best += d * d;
  }
  std::size_t idx = 0;
  for (std::size_t i = 0; i < world::kPaintColors.size(); ++i) {
    double s = 0;
    for (int ch = 0; ch < 3; ++ch) {
      const double d = img.at(r, c, ch) - world::kPaintColors[i].rgb[ch];
      s += d * d;
    }
    if (s < best) {
      best = s;
      idx = i + 1;
    }
  }
  return idx;
}

/// Connected same-color regions (4-connectivity), in raster order of their
/// first pixel. Regions smaller than `min_area` are dropped.
inline std::vector<Component> find_components(const Image& img, std::size_t min_area = 12) {
  const std::size_t h = img.height, w = img.width;
  std::vector<std::size_t> cls(h * w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) cls[r * w + c] = nearest_paint(img, r, c);
  std::vector<char> seen(h * w, 0);
  std::vector<Component> out;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < h * w; ++start) {
    if (seen[start] || cls[start] == 0) continue;
    const std::size_t k = cls[start];
    std::size_t area = 0, rmin = h, rmax = 0, cmin = w, cmax = 0;
    double sx = 0, sy = 0;
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const std::size_t r = p / w, c = p % w;
      ++area;
      sx += double(c) + 0.5;
      sy += double(r) + 0.5;
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
      cmin = std::min(cmin, c);
      cmax = std::max(cmax, c);
      const std::size_t nb[4] = {r > 0 ? p - w : p, r + 1 < h ? p + w : p,
                                 c > 0 ? p - 1 : p, c + 1 < w ? p + 1 : p};
      for (std::size_t q : nb) {
        if (!seen[q] && cls[q] == k) {
          seen[q] = 1;
          stack.push_back(q);
        }
      }
    }
    if (area < min_area) continue;
    Component comp;
    comp.color = std::string(world::kPaintColors[k - 1].name);
    comp.area = area;
    comp.cx = sx / double(area);
    comp.cy = sy / double(area);
    comp.first_pixel = start;
    const double fill = double(area) / double((rmax - rmin + 1) * (cmax - cmin + 1));
    comp.shape = fill >= 0.9 ? world::Shape::square
                 : fill >= 0.62 ? world::Shape::circle
                                : world::Shape::triangle;
    out.push_back(comp);
  }
  return out;
}

}  // namespace detail

/// Relative direction word of `a` with respect to `b` along the dominant axis.
inline std::string relative_direction(double ax, double ay, double bx, double by) {
  const double dx = ax - bx, dy = ay - by;
  if (std::abs(dx) >= std::abs(dy)) return dx < 0 ? "left" : "right";
  return dy < 0 ? "top" : "bottom";
}

struct ObjectSummary {
  std::string color;
  world::Shape shape;
  double cx, cy;
  bool moving;
};

/// Attribute list [color, shape, direction vs most similar other object,
/// motion]. The most similar other object shares color or shape (nearest
/// first); without one, the nearest other object is used; a lone object gets
/// no direction.
inline std::vector<std::string> describe(const std::vector<ObjectSummary>& objects,
                                         std::size_t target) {
  const auto& t = objects.at(target);
  std::vector<std::string> attrs{t.color, std::string(world::shape_name(t.shape))};
  long ref = -1;
  double best = 0;
  bool best_similar = false;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (i == target) continue;
    const bool similar = objects[i].color == t.color || objects[i].shape == t.shape;
    const double d = std::hypot(objects[i].cx - t.cx, objects[i].cy - t.cy);
    if (ref < 0 || (similar && !best_similar) || (similar == best_similar && d < best)) {
      ref = long(i);
      best = d;
      best_similar = similar;
    }
  }
  if (ref >= 0) {
    attrs.push_back(relative_direction(t.cx, t.cy, objects[std::size_t(ref)].cx,
                                       objects[std::size_t(ref)].cy));
  }
  attrs.push_back(t.moving ? "moving" : "static");
  return attrs;
}

struct ExpressionCues {
  std::optional<std::string> color;
  std::optional<world::Shape> shape;
  std::optional<std::string> direction;
  std::optional<bool> moving;
};

inline ExpressionCues parse_cues(const std::string& expression) {
  ExpressionCues cues;
  for (const auto& w : world::split_words(expression)) {
    if (!cues.color && world::is_color_word(w)) cues.color = w;
    else if (!cues.shape && world::parse_shape(w)) cues.shape = world::parse_shape(w);
    else if (!cues.direction && world::is_direction_word(w)) cues.direction = w;
    else if (!cues.moving && (w == "moving" || w == "static")) cues.moving = (w == "moving");
  }
  return cues;
}

/// Index of the object best matching the cues: one point per matching
/// color/shape/motion cue, one more for the extreme object in the named
/// direction among the best candidates so far. Ties go to the lowest index.
inline std::size_t resolve_target(const std::vector<ObjectSummary>& objects,
                                  const ExpressionCues& cues) {
  require(!objects.empty(), "resolve_target: no objects");
  std::vector<int> score(objects.size(), 0);
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (cues.color && objects[i].color == *cues.color) ++score[i];
    if (cues.shape && objects[i].shape == *cues.shape) ++score[i];
    if (cues.moving && objects[i].moving == *cues.moving) ++score[i];
  }
  if (cues.direction) {
    const int top = *std::max_element(score.begin(), score.end());
    long ext = -1;
    auto key = [&](const ObjectSummary& o) {
      const auto& d = *cues.direction;
      return d == "left" ? -o.cx : d == "right" ? o.cx : d == "top" ? -o.cy : o.cy;
    };
    for (std::size_t i = 0; i < objects.size(); ++i) {
      if (score[i] != top) continue;
      if (ext < 0 || key(objects[i]) > key(objects[std::size_t(ext)])) ext = long(i);
    }
    ++score[std::size_t(ext)];
  }
  return std::size_t(std::max_element(score.begin(), score.end()) - score.begin());
}

/// Pixel-analysis stand-in for the reasoning round: finds the objects in the
/// first frame, resolves the expression against them and lists attributes.
inline std::string toy_reasoning(const std::string& expression,
                                 const std::vector<const Image*>& frames) {
  require(!frames.empty() && frames.front(), "toy_reasoning: no frames");
  const auto first = detail::find_components(*frames.front());
  const auto last = detail::find_components(*frames.back());
  if (first.empty()) {
    return "Reasoning: No object is visible in the clip.\nAttributes: object";
  }
  std::vector<ObjectSummary> objs;
  for (const auto& c : first) {
    bool moving = false;
    double best = 1e300;
    for (const auto& d : last) {
      if (d.color != c.color || d.shape != c.shape) continue;
      const double dist = std::hypot(d.cx - c.cx, d.cy - c.cy);
      if (dist < best) best = dist;
    }
    if (best < 1e300) moving = best > 2.0;
    objs.push_back({c.color, c.shape, c.cx, c.cy, moving});
  }
  const auto cues = parse_cues(expression);
  const std::size_t t = resolve_target(objs, cues);
  const auto attrs = describe(objs, t);
  std::ostringstream out;
  out << "Reasoning: The " << objs[t].color << ' ' << world::shape_name(objs[t].shape)
      << " is the object that fits the expression best";
  if (objs.size() > 1) out << " among the " << objs.size() << " objects";
  out << ".\nAttributes: ";
  for (std::size_t i = 0; i < attrs.size(); ++i) out << (i ? ", " : "") << attrs[i];
  return out.str();
}

/// Recorded forward pass for reverse-mode evaluation.
struct Tape {
  std::vector<Matrix> hidden;                 // input of each layer
  std::vector<std::vector<Matrix>> q, k, v;   // [layer][head]
};

class ToyLanguageModel final : public LanguageBackend {
 public:
  explicit ToyLanguageModel(ToyConfig cfg = {}) : cfg_(cfg) { build(); }

  const ToyConfig& config() const { return cfg_; }
  const std::vector<std::vector<Head>>& weights() const { return weights_; }

  std::size_t embedding_dim() const override { return kDim; }

  Vector word_embedding(const std::string& word) const {
    auto it = word_table_.find(word);
    if (it == word_table_.end()) it = word_table_.find("<unk>");
    return it->second;
  }

  Matrix embed_text(const std::string& text) const override {
    const auto words = world::split_words(text);
    Matrix out(Eigen::Index(words.size()), Eigen::Index(kDim));
    for (std::size_t i = 0; i < words.size(); ++i) out.row(Eigen::Index(i)) = word_embedding(words[i]).transpose();
    return out;
  }

  /// One embedding row per visual token of `frame`, row-major over the
  /// token grid, after merging `pool` x `pool` blocks by averaging.
  Matrix visual_embeddings(const Image& frame, std::size_t pool, double time) const {
    const std::size_t p = cfg_.patch;
    require(frame.height % (p * pool) == 0 && frame.width % (p * pool) == 0,
            "toy backend: frame size " + std::to_string(frame.height) + "x" +
                std::to_string(frame.width) + " not divisible by token size " +
                std::to_string(p * pool));
    const std::size_t gh = frame.height / p, gw = frame.width / p;
    Matrix base = Matrix::Zero(Eigen::Index(gh * gw), Eigen::Index(kDim));
    const double inv2s2 = 1.0 / (2.0 * cfg_.rbf_sigma * cfg_.rbf_sigma);
    for (std::size_t r = 0; r < gh; ++r) {
      for (std::size_t c = 0; c < gw; ++c) {
        const Eigen::Index row = Eigen::Index(r * gw + c);
        std::array<double, 3> mean{0, 0, 0};
        for (std::size_t y = r * p; y < (r + 1) * p; ++y) {
          for (std::size_t x = c * p; x < (c + 1) * p; ++x) {
            for (std::size_t a = 0; a < world::kColorWords.size(); ++a) {
              double d2 = 0;
              for (int ch = 0; ch < 3; ++ch) {
                const double d = frame.at(y, x, ch) - world::kColorWords[a].rgb[ch];
                d2 += d * d;
              }
              base(row, Eigen::Index(dims::color + a)) += std::exp(-d2 * inv2s2);
            }
            for (int ch = 0; ch < 3; ++ch) mean[ch] += frame.at(y, x, ch);
          }
        }
        const double n = double(p * p);
        for (std::size_t a = 0; a < world::kColorWords.size(); ++a) {
          base(row, Eigen::Index(dims::color + a)) *= cfg_.color_gain / n;
        }
        for (int ch = 0; ch < 3; ++ch) mean[ch] = mean[ch] / n - world::kBackground[ch];
        for (int j = 0; j < 6; ++j) {
          double s = 0;
          for (int ch = 0; ch < 3; ++ch) s += mean[ch] * color_proj_(ch, j);
          base(row, dims::identity + j) = s;
        }
        base(row, dims::pos_x) = cfg_.position_gain * ((double(c) + 0.5) / double(gw) * 2 - 1);
        base(row, dims::pos_y) = cfg_.position_gain * ((double(r) + 0.5) / double(gh) * 2 - 1);
        base(row, dims::time) = time;
        base(row, dims::visual) = 1.0;
      }
    }
    if (pool == 1) return base;
    const std::size_t oh = gh / pool, ow = gw / pool;
    Matrix out = Matrix::Zero(Eigen::Index(oh * ow), Eigen::Index(kDim));
    for (std::size_t r = 0; r < oh; ++r)
      for (std::size_t c = 0; c < ow; ++c)
        for (std::size_t dr = 0; dr < pool; ++dr)
          for (std::size_t dc = 0; dc < pool; ++dc)
            out.row(Eigen::Index(r * ow + c)) +=
                base.row(Eigen::Index((r * pool + dr) * gw + c * pool + dc)) / double(pool * pool);
    return out;
  }

  /// Deterministic answer word: the first shape noun in the prompt, else
  /// "object".
  static std::string answer_word(const std::string& prompt) {
    for (const auto& w : world::split_words(prompt)) {
      if (world::parse_shape(w)) return w;
    }
    return "object";
  }

  std::string generate(const std::string& prompt,
                       const std::vector<const Image*>& frames) const override {
    const bool reasoning = prompt.find("Reasoning:") != std::string::npos &&
                           prompt.find("Attributes:") != std::string::npos;
    if (!reasoning) return answer_word(prompt);
    return toy_reasoning(expression_line(prompt), frames);
  }

  BackendForwardResult forward(const ForwardRequest& req) const override {
    return run(req, nullptr);
  }

  bool supports_gradient() const override { return true; }

  std::unique_ptr<GradientSession> record(const ForwardRequest& req) const override;

  /// Input sequence without running the transformer.
  BackendForwardResult assemble(const ForwardRequest& req) const {
    require(!req.frames.empty(), "toy backend: no frames");
    require(req.token_pool >= 1, "toy backend: token_pool must be >= 1");
    BackendForwardResult res;
    std::vector<Matrix> blocks;
    auto push = [&](const Matrix& rows, TokenRole role, int id) {
      for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        res.tokens.ids.push_back(id);
        res.tokens.roles.push_back(role);
      }
      blocks.push_back(rows);
    };
    const bool has_soft = req.soft_prompts && req.soft_prompts->rows() > 0;
    if (has_soft) {
      require(std::size_t(req.soft_prompts->cols()) == kDim,
              "toy backend: soft prompt width must be " + std::to_string(kDim));
    }
    if (has_soft && req.soft_position == SoftPromptPosition::prepend) {
      push(*req.soft_prompts, TokenRole::soft_prompt, world::kSoftId);
    }
    push(word_embedding("<bos>").transpose(), TokenRole::text, world::kBosId);

    const std::size_t nf = req.frames.size();
    for (std::size_t f = 0; f < nf; ++f) {
      require(req.frames[f] != nullptr, "toy backend: null frame");
      if (f > 0) {
        require(req.frames[f]->height == req.frames[0]->height &&
                    req.frames[f]->width == req.frames[0]->width,
                "toy backend: frames differ in size");
      }
      const double time = nf == 1 ? 0.0 : double(f) / double(nf - 1) * 2.0 - 1.0;
      push(visual_embeddings(*req.frames[f], req.token_pool, time), TokenRole::visual,
           world::kImgId);
    }
    const std::size_t tok = cfg_.patch * req.token_pool;
    res.tokens.visual_layout = {nf, req.frames[0]->height / tok, req.frames[0]->width / tok};

    for (const auto& w : world::split_words(req.prompt)) {
      push(word_embedding(w).transpose(), TokenRole::text, world::word_id(w));
    }
    if (has_soft && req.soft_position == SoftPromptPosition::append) {
      push(*req.soft_prompts, TokenRole::soft_prompt, world::kSoftId);
    }
    res.generated_word = answer_word(req.prompt);
    Vector g = word_embedding(res.generated_word);
    g(dims::text) = 0.0;
    g(dims::generated) = 1.0;
    res.query_index = res.tokens.size();
    push(g.transpose(), TokenRole::generated, world::word_id(res.generated_word));

    res.input_embeddings.resize(Eigen::Index(res.tokens.size()), Eigen::Index(kDim));
    Eigen::Index at = 0;
    for (const auto& b : blocks) {
      res.input_embeddings.middleRows(at, b.rows()) = b;
      at += b.rows();
    }
    res.default_rollout_first = kRolloutFirst;
    res.default_rollout_last = kRolloutLast;
    return res;
  }

  /// Runs the transformer on an explicit embedding matrix.
  AttentionTensor attend(const Matrix& x, Tape* tape) const {
    const Eigen::Index n = x.rows();
    AttentionTensor att;
    att.first_layer = 0;
    Matrix h = x;
    const double scale = 1.0 / std::sqrt(double(kHeadDim));
    if (tape) {
      tape->hidden.clear();
      tape->q.assign(kLayers, {});
      tape->k.assign(kLayers, {});
      tape->v.assign(kLayers, {});
    }
    for (std::size_t l = 0; l < kLayers; ++l) {
      if (tape) tape->hidden.push_back(h);
      Matrix delta = Matrix::Zero(n, Eigen::Index(kDim));
      std::vector<Matrix> heads;
      for (std::size_t hd = 0; hd < kHeads; ++hd) {
        const Head& w = weights_[l][hd];
        Matrix q = h * w.wq;
        Matrix k = h * w.wk;
        Matrix v = h * w.wv;
        Matrix s = (q * k.transpose()) * scale;
        Matrix a = Matrix::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
          const double mx = s.row(i).head(i + 1).maxCoeff();
          double z = 0;
          for (Eigen::Index j = 0; j <= i; ++j) {
            const double e = std::exp(s(i, j) - mx);
            a(i, j) = e;
            z += e;
          }
          a.row(i).head(i + 1) /= z;
        }
        delta.noalias() += (a * v) * w.wo;
        if (tape) {
          tape->q[l].push_back(std::move(q));
          tape->k[l].push_back(std::move(k));
          tape->v[l].push_back(std::move(v));
        }
        heads.push_back(std::move(a));
      }
      h += delta;
      att.layers.push_back(std::move(heads));
    }
    return att;
  }

  /// Cotangent of the input embeddings given cotangents of every captured
  /// attention matrix (layers with an empty entry contribute nothing).
  Matrix backprop(const Tape& tape, const AttentionTensor& att,
                  const std::vector<std::vector<Matrix>>& d_att) const {
    const Eigen::Index n = tape.hidden.front().rows();
    const double scale = 1.0 / std::sqrt(double(kHeadDim));
    Matrix dh = Matrix::Zero(n, Eigen::Index(kDim));
    for (std::size_t l = kLayers; l-- > 0;) {
      Matrix dprev = dh;
      for (std::size_t hd = 0; hd < kHeads; ++hd) {
        const Head& w = weights_[l][hd];
        const Matrix& a = att.layers[l][hd];
        const Matrix dav = dh * w.wo.transpose();
        Matrix da = dav * tape.v[l][hd].transpose();
        if (l < d_att.size() && hd < d_att[l].size() && d_att[l][hd].size() > 0) {
          da += d_att[l][hd];
        }
        const Matrix dv = a.transpose() * dav;
        const Eigen::VectorXd rowdot = (da.array() * a.array()).rowwise().sum();
        Matrix ds = a.array() * (da.colwise() - rowdot).array();
        ds *= scale;
        const Matrix dq = ds * tape.k[l][hd];
        const Matrix dk = ds.transpose() * tape.q[l][hd];
        dprev.noalias() += dq * w.wq.transpose() + dk * w.wk.transpose() + dv * w.wv.transpose();
      }
      dh = std::move(dprev);
    }
    return dh;
  }

 private:
  BackendForwardResult run(const ForwardRequest& req, Tape* tape) const {
    BackendForwardResult res = assemble(req);
    res.attention = attend(res.input_embeddings, tape);
    return res;
  }

  static std::string expression_line(const std::string& prompt) {
    const auto pos = prompt.find("Expression:");
    if (pos == std::string::npos) return prompt;
    const auto start = pos + std::string("Expression:").size();
    const auto end = prompt.find('\n', start);
    return prompt.substr(start, end == std::string::npos ? std::string::npos : end - start);
  }

  void build() {
    std::mt19937_64 rng(cfg_.seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    for (const auto& w : world::kVocabulary) {
      Vector e = Vector::Zero(Eigen::Index(kDim));
      for (int j = 0; j < 6; ++j) e(dims::identity + j) = cfg_.word_noise * unit(rng);
      e(dims::text) = 1.0;
      if (auto rgb = world::color_rgb(w)) {
        for (std::size_t a = 0; a < world::kColorWords.size(); ++a) {
          double d2 = 0;
          for (int ch = 0; ch < 3; ++ch) {
            const double d = (*rgb)[ch] - world::kColorWords[a].rgb[ch];
            d2 += d * d;
          }
          e(Eigen::Index(dims::color + a)) =
              cfg_.color_gain * std::exp(-d2 / (2 * cfg_.rbf_sigma * cfg_.rbf_sigma));
        }
        e(dims::attribute) = 1.0;
      }
      if (world::is_direction_word(w)) {
        const double x = w == "left" ? -1 : w == "right" ? 1 : 0;
        const double y = w == "top" ? -1 : w == "bottom" ? 1 : 0;
        e(dims::pos_x) = cfg_.position_gain * x;
        e(dims::pos_y) = cfg_.position_gain * y;
        e(dims::attribute) = 1.0;
      }
      if (w == "<bos>") {
        e.setZero();
        e(dims::bos) = 1.0;
      }
      word_table_.emplace(std::string(w), e);
    }
    color_proj_.resize(3, 6);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 6; ++j) color_proj_(i, j) = cfg_.color_projection * unit(rng);

    const double s = cfg_.random_scale / std::sqrt(double(kDim));
    const double so = cfg_.output_scale / std::sqrt(double(kHeadDim));
    auto random = [&](Eigen::Index r, Eigen::Index c, double std) {
      Matrix m(r, c);
      for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = std * unit(rng);
      return m;
    };
    const auto D = Eigen::Index(kDim), DH = Eigen::Index(kHeadDim);
    weights_.assign(kLayers, {});
    for (std::size_t l = 0; l < kLayers; ++l) {
      for (std::size_t hd = 0; hd < kHeads; ++hd) {
        Head w{random(D, DH, s), random(D, DH, s), random(D, DH, s), random(DH, D, so)};
        // The descriptor channel is written only by the gather heads.
        w.wo.middleCols(dims::descriptor, 10).setZero();
        // Query/key channel 15 carries the generated-token -> <bos> sink of
        // the lower layers; channel 14 the upper-layer sinks; channel 0 the
        // attribute gather.
        if (l < 2 || hd == 0) {
          w.wq(dims::generated, 15) += cfg_.sink_gen;
          w.wk(dims::bos, 15) += cfg_.sink_gen;
        }
        if (hd == 0 && l < 2) {
          const double g = l == 0 ? cfg_.gather0 : cfg_.gather1;
          w.wq(dims::generated, 0) += g;
          w.wk(dims::attribute, 0) += g;
          w.wv.setZero();
          w.wo.setZero();
          for (int i = 0; i < 10; ++i) {
            w.wv(i, 1 + i) = 1.0;
            w.wo(1 + i, dims::descriptor + i) = 1.0;
          }
          if (l == 1) {
            w.wq(dims::generated, 14) += cfg_.sink1;
            w.wk(dims::bos, 14) += cfg_.sink1;
          }
        }
        if (l >= 2 && hd == 0) {
          for (int i = 0; i < 10; ++i) {
            w.wq(dims::descriptor + i, 1 + i) += cfg_.readout;
            w.wk(i, 1 + i) += cfg_.readout;
          }
          w.wq(dims::generated, 14) += cfg_.sink_readout;
          w.wk(dims::bos, 14) += cfg_.sink_readout;
        }
        if (l >= 2 && hd == 1) {
          w.wq(dims::generated, 14) += cfg_.diffuse;
          w.wk(dims::visual, 14) += cfg_.diffuse;
        }
        weights_[l].push_back(std::move(w));
      }
    }
  }

  ToyConfig cfg_;
  std::map<std::string, Vector> word_table_;
  Matrix color_proj_;
  std::vector<std::vector<Head>> weights_;
};

class ToyGradientSession final : public GradientSession {
 public:
  ToyGradientSession(const ToyLanguageModel& model, const ForwardRequest& req) : model_(model) {
    result_ = model.assemble(req);
    result_.attention = model.attend(result_.input_embeddings, &tape_);
  }
  const BackendForwardResult& result() const override { return result_; }
  Matrix backward(const std::vector<std::vector<Matrix>>& d_att) const override {
    return model_.backprop(tape_, result_.attention, d_att);
  }

 private:
  const ToyLanguageModel& model_;
  BackendForwardResult result_;
  Tape tape_;
};

inline std::unique_ptr<GradientSession> ToyLanguageModel::record(const ForwardRequest& req) const {
  return std::make_unique<ToyGradientSession>(*this, req);
}

}  // namespace steerseg::toy

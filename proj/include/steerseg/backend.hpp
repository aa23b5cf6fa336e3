#pragma once

// Backend contracts: captured attention, token bookkeeping, the language
// backend interface (forward pass, text generation, optional gradients with
// respect to input embeddings) and the promptable segmenter interface.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "steerseg/errors.hpp"
#include "steerseg/image.hpp"
#include "steerseg/numerics.hpp"

namespace steerseg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class TokenRole { soft_prompt, text, visual, generated };

inline const char* role_name(TokenRole r) {
  switch (r) {
    case TokenRole::soft_prompt: return "soft_prompt";
    case TokenRole::text: return "text";
    case TokenRole::visual: return "visual";
    case TokenRole::generated: return "generated";
  }
  return "?";
}

struct VisualLayout {
  std::size_t frames = 0;
  std::size_t height = 0;  // H_v in tokens
  std::size_t width = 0;   // W_v in tokens

  std::size_t count() const { return frames * height * width; }
  friend bool operator==(const VisualLayout&, const VisualLayout&) = default;
};

struct TokenSequence {
  std::vector<int> ids;
  std::vector<TokenRole> roles;
  VisualLayout visual_layout;

  std::size_t size() const { return ids.size(); }

  std::size_t count(TokenRole role) const {
    std::size_t n = 0;
    for (auto r : roles) n += (r == role);
    return n;
  }

  /// Positions of visual tokens, in layout order.
  std::vector<std::size_t> visual_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < roles.size(); ++i) {
      if (roles[i] == TokenRole::visual) out.push_back(i);
    }
    return out;
  }

  void check() const {
    require(ids.size() == roles.size(), "TokenSequence: ids/roles length mismatch");
    require(count(TokenRole::visual) == visual_layout.count(),
            "TokenSequence: visual token count " +
                std::to_string(count(TokenRole::visual)) +
                " does not match layout " + std::to_string(visual_layout.count()));
  }
};

inline constexpr double kRowSumTolerance = 1e-5;

/// Per-layer, per-head attention. Layer indices start at `first_layer` so a
/// dump can carry only a sub-range of a deeper model.
struct AttentionTensor {
  int first_layer = 0;
  std::vector<std::vector<Matrix>> layers;  // [layer][head] -> seq x seq

  std::size_t num_layers() const { return layers.size(); }
  int last_layer() const { return first_layer + int(layers.size()) - 1; }
  std::size_t heads() const { return layers.empty() ? 0 : layers.front().size(); }
  std::size_t seq_len() const {
    return heads() == 0 ? 0 : std::size_t(layers.front().front().rows());
  }

  bool has_layer(int l) const { return l >= first_layer && l <= last_layer(); }

  const std::vector<Matrix>& layer(int l) const {
    require(has_layer(l), "AttentionTensor: layer " + std::to_string(l) +
                              " outside captured range [" +
                              std::to_string(first_layer) + ", " +
                              std::to_string(last_layer()) + "]");
    return layers[std::size_t(l - first_layer)];
  }

  /// Throws ValidationError (naming layer/head/row) when a row is negative or
  /// does not sum to 1 within `tol`; ContractViolation on shape problems.
  void validate(double tol = kRowSumTolerance) const {
    require(!layers.empty(), "AttentionTensor: no layers");
    const std::size_t h = heads();
    const std::size_t n = seq_len();
    require(h >= 1 && n >= 1, "AttentionTensor: empty layer");
    for (std::size_t li = 0; li < layers.size(); ++li) {
      const int l = first_layer + int(li);
      require(layers[li].size() == h, "AttentionTensor: head count differs at layer " +
                                          std::to_string(l));
      for (std::size_t hi = 0; hi < h; ++hi) {
        const Matrix& a = layers[li][hi];
        require(std::size_t(a.rows()) == n && std::size_t(a.cols()) == n,
                "AttentionTensor: matrix at layer " + std::to_string(l) +
                    " head " + std::to_string(hi) + " is not " + std::to_string(n) +
                    "x" + std::to_string(n));
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
          const double s = a.row(r).sum();
          const double mn = a.row(r).minCoeff();
          if (!std::isfinite(s) || mn < -tol || std::abs(s - 1.0) > tol) {
            throw ValidationError("attention row not stochastic at layer " +
                                      std::to_string(l) + ", head " +
                                      std::to_string(hi) + ", row " +
                                      std::to_string(r) + " (sum " +
                                      std::to_string(s) + ")",
                                  l, int(hi), long(r));
          }
        }
      }
    }
  }
};

struct BackendForwardResult {
  AttentionTensor attention;
  TokenSequence tokens;
  std::string generated_word;
  std::size_t query_index = 0;   // i_q
  Matrix input_embeddings;       // seq x d; empty for dump-loaded results
  int default_rollout_first = 0;
  int default_rollout_last = 0;

  void check() const {
    tokens.check();
    require(query_index < tokens.size(), "forward result: i_q out of range");
    require(tokens.roles[query_index] == TokenRole::generated,
            "forward result: i_q does not point at a generated token");
    require(!generated_word.empty() &&
                generated_word.find_first_of(" \t\r\n") == std::string::npos,
            "forward result: generated word must be a single word");
    require(attention.seq_len() == tokens.size(),
            "forward result: attention size differs from token count");
  }
};

enum class SoftPromptPosition { prepend, append };

struct ForwardRequest {
  std::string prompt;
  std::vector<const Image*> frames;
  const Matrix* soft_prompts = nullptr;  // N_p x d, may be null or empty
  SoftPromptPosition soft_position = SoftPromptPosition::prepend;
  std::size_t token_pool = 1;  // 2 merges 2x2 visual tokens (video modality)
};

/// Reverse-mode handle over one recorded forward pass. `backward` takes the
/// loss cotangent with respect to each captured attention matrix and returns
/// the cotangent with respect to the input embeddings.
class GradientSession {
 public:
  virtual ~GradientSession() = default;
  virtual const BackendForwardResult& result() const = 0;
  virtual Matrix backward(const std::vector<std::vector<Matrix>>& attention_cotangent) const = 0;
};

class LanguageBackend {
 public:
  virtual ~LanguageBackend() = default;

  virtual BackendForwardResult forward(const ForwardRequest& req) const = 0;

  /// Free-form generation, used for the reasoning round.
  virtual std::string generate(const std::string& prompt,
                               const std::vector<const Image*>& frames) const = 0;

  virtual std::size_t embedding_dim() const = 0;

  /// Input-embedding rows for the tokens of `text`, in order.
  virtual Matrix embed_text(const std::string& text) const = 0;

  virtual bool supports_gradient() const { return false; }

  virtual std::unique_ptr<GradientSession> record(const ForwardRequest&) const {
    throw CapabilityError("backend does not support gradient evaluation");
  }
};

enum class Direction { forward, backward };

struct PropagationResult {
  std::vector<numerics::DenseGrid> probabilities;  // one per frame visited
  std::vector<numerics::DenseGrid> logits;
  std::vector<std::size_t> frame_indices;
};

/// Promptable video segmenter.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual std::size_t num_frames() const = 0;
  virtual std::size_t height() const = 0;
  virtual std::size_t width() const = 0;
  virtual numerics::DenseGrid segment_from_point(std::size_t frame_index, double x,
                                                 double y) const = 0;
  /// Includes the seed frame itself, ordered in the direction of travel.
  virtual PropagationResult propagate(const numerics::DenseGrid& seed_mask,
                                      std::size_t seed_frame, Direction dir) const = 0;
};

}  // namespace steerseg

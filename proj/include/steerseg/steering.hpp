#pragma once

// Soft prompt training: BCE + Dice grounding loss on min-max normalized
// rollout maps, its exact gradient with respect to the prompt embeddings,
// AdamW with cosine-with-warmup schedule, and the training loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "steerseg/backend.hpp"
#include "steerseg/container.hpp"
#include "steerseg/errors.hpp"
#include "steerseg/numerics.hpp"
#include "steerseg/prompting.hpp"
#include "steerseg/rollout.hpp"

namespace steerseg::steering {

using numerics::DenseGrid;
using prompting::Branch;
using prompting::SoftPromptBank;

inline constexpr double kBceClamp = 1e-7;
inline constexpr double kDiceSmoothing = 1.0;

struct LossValue {
  double loss = 0;
  double bce = 0;
  double dice = 0;
};

/// BCE (probabilities clamped to [1e-7, 1 - 1e-7], mean over cells) plus
/// Dice with smoothing 1.
inline LossValue grounding_loss(const DenseGrid& s, const DenseGrid& g) {
  require(s.shape() == g.shape(), "grounding_loss: shape mismatch " +
                                      numerics::shape_string(s.shape()) + " vs " +
                                      numerics::shape_string(g.shape()));
  const std::size_t n = s.size();
  double bce = 0, inter = 0, ssum = 0, gsum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(s[i], kBceClamp, 1.0 - kBceClamp);
    bce -= g[i] * std::log(p) + (1.0 - g[i]) * std::log(1.0 - p);
    inter += s[i] * g[i];
    ssum += s[i];
    gsum += g[i];
  }
  LossValue v;
  v.bce = bce / double(n);
  v.dice = 1.0 - (2.0 * inter + kDiceSmoothing) / (ssum + gsum + kDiceSmoothing);
  v.loss = v.bce + v.dice;
  return v;
}

/// d loss / d s for grounding_loss (zero where the BCE clamp is active).
inline std::vector<double> grounding_loss_grad(const DenseGrid& s, const DenseGrid& g) {
  require(s.shape() == g.shape(), "grounding_loss_grad: shape mismatch");
  const std::size_t n = s.size();
  double inter = 0, ssum = 0, gsum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    inter += s[i] * g[i];
    ssum += s[i];
    gsum += g[i];
  }
  const double num = 2.0 * inter + kDiceSmoothing;
  const double den = ssum + gsum + kDiceSmoothing;
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    double db = 0;
    if (s[i] > kBceClamp && s[i] < 1.0 - kBceClamp) {
      db = (-g[i] / s[i] + (1.0 - g[i]) / (1.0 - s[i])) / double(n);
    }
    const double dd = -(2.0 * g[i] * den - num) / (den * den);
    d[i] = db + dd;
  }
  return d;
}

/// Backward of min-max normalization: cotangent of the raw values given the
/// cotangent of the normalized ones. Constant input has zero gradient.
inline std::vector<double> minmax_normalize_grad(const DenseGrid& raw,
                                                 const std::vector<double>& d_norm) {
  const auto v = raw.values();
  const std::size_t lo = std::size_t(std::min_element(v.begin(), v.end()) - v.begin());
  const std::size_t hi = numerics::argmax_index(v);
  const double range = v[hi] - v[lo];
  std::vector<double> d(v.size(), 0.0);
  if (!(range > 0)) return d;
  double acc = 0;  // sum_j d_norm_j * (x_j - min) / range^2
  double sum = 0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    d[j] = d_norm[j] / range;
    acc += d_norm[j] * (v[j] - v[lo]) / (range * range);
    sum += d_norm[j];
  }
  d[lo] += -sum / range + acc;
  d[hi] -= acc;
  return d;
}

/// One supervised example: a video, its query prompt and per-frame ground
/// truth in [0, 1] at native resolution.
struct TrainSample {
  std::string id;
  const rollout::Video* video = nullptr;
  std::string query_prompt;
  std::vector<DenseGrid> gt;
};

struct BranchTerm {
  LossValue value;
  double corr = 0;  // Pearson between raw map and resized GT
  Matrix grad;      // N_p x d, empty when not requested
};

inline std::size_t grid_factor(std::size_t native, std::size_t cells) {
  require(cells > 0 && native % cells == 0,
          "ground truth extent " + std::to_string(native) + " is not a multiple of the map extent " +
              std::to_string(cells));
  return native / cells;
}

/// Ground truth of the given frames resized by area pooling to the map grid.
inline DenseGrid resized_gt(const TrainSample& s, const std::vector<std::size_t>& frames,
                            std::size_t h, std::size_t w) {
  std::vector<DenseGrid> slices;
  for (std::size_t t : frames) {
    require(t < s.gt.size(), "sample " + s.id + ": no ground truth for frame " + std::to_string(t));
    const auto& g = s.gt[t];
    const std::size_t f = grid_factor(g.extent(0), h);
    require(grid_factor(g.extent(1), w) == f, "non-uniform resize factor");
    slices.push_back(numerics::area_downsample(g, f));
  }
  return DenseGrid::stack(slices);
}

struct TermRequest {
  const TrainSample* sample = nullptr;
  Branch branch = Branch::frame;
  std::size_t keyframe = 0;  // frame branch: absolute frame index
  const Matrix* prompts = nullptr;
  SoftPromptPosition position = SoftPromptPosition::prepend;
};

inline ForwardRequest make_forward(const TermRequest& t, const rollout::RolloutConfig& cfg,
                                   std::vector<std::size_t>* frames) {
  ForwardRequest fr;
  fr.prompt = t.sample->query_prompt;
  fr.soft_prompts = t.prompts;
  fr.soft_position = t.position;
  const auto& video = *t.sample->video;
  if (t.branch == Branch::frame) {
    require(t.keyframe < video.size(), "training term: keyframe out of range");
    *frames = {t.keyframe};
    fr.token_pool = 1;
  } else {
    *frames = rollout::keyframe_indices(video.size(), cfg.video_keyframes);
    fr.token_pool = cfg.video_downsample;
  }
  for (std::size_t f : *frames) fr.frames.push_back(&video.frames[f]);
  return fr;
}

inline LossValue term_loss_from_map(const DenseGrid& raw, const DenseGrid& g) {
  return grounding_loss(numerics::minmax_normalize(raw), g);
}

/// Loss of one branch term; no gradient.
inline BranchTerm evaluate_term(const TermRequest& t, const LanguageBackend& backend,
                                const rollout::RolloutConfig& cfg) {
  std::vector<std::size_t> frames;
  const auto fr = make_forward(t, cfg, &frames);
  const auto res = backend.forward(fr);
  const DenseGrid raw = rollout::query_map(res, cfg);
  const DenseGrid g = resized_gt(*t.sample, frames, raw.extent(1), raw.extent(2));
  BranchTerm out;
  out.value = term_loss_from_map(raw, g);
  out.corr = numerics::pearson_corr(raw, g);
  return out;
}

/// Loss of one branch term and its exact gradient with respect to the soft
/// prompt rows, through normalization, rollout and the frozen backend.
inline BranchTerm loss_gradient(const TermRequest& t, const LanguageBackend& backend,
                                const rollout::RolloutConfig& cfg) {
  if (!backend.supports_gradient()) {
    throw CapabilityError("backend does not support gradient evaluation");
  }
  require(t.prompts && t.prompts->rows() > 0, "loss_gradient: no soft prompts");
  std::vector<std::size_t> frames;
  const auto fr = make_forward(t, cfg, &frames);
  const auto session = backend.record(fr);
  const auto& res = session->result();
  const DenseGrid raw = rollout::query_map(res, cfg);
  const DenseGrid g = resized_gt(*t.sample, frames, raw.extent(1), raw.extent(2));
  const DenseGrid norm = numerics::minmax_normalize(raw);

  BranchTerm out;
  out.value = grounding_loss(norm, g);
  out.corr = numerics::pearson_corr(raw, g);

  const auto d_norm = grounding_loss_grad(norm, g);
  const auto d_raw = minmax_normalize_grad(raw, d_norm);
  const auto vis = res.tokens.visual_indices();
  RowVector d_row = RowVector::Zero(Eigen::Index(res.tokens.size()));
  for (std::size_t k = 0; k < vis.size(); ++k) d_row(Eigen::Index(vis[k])) = d_raw[k];
  const auto [first, last] = rollout::layer_range(cfg, res);
  const auto d_att = rollout::query_rollout_backward(res.attention, first, last, res.query_index, d_row);
  const Matrix d_x = session->backward(d_att);

  out.grad = Matrix::Zero(t.prompts->rows(), t.prompts->cols());
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < res.tokens.size(); ++i) {
    if (res.tokens.roles[i] == TokenRole::soft_prompt) {
      out.grad.row(row++) = d_x.row(Eigen::Index(i));
    }
  }
  require(row == t.prompts->rows(), "loss_gradient: soft prompt rows not found in sequence");
  return out;
}

struct TrainConfig {
  double learning_rate = 5e-4;
  long long steps = 6500;
  std::size_t effective_batch = 4;
  double warmup_fraction = 0.03;
  std::size_t n_p = 64;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  SoftPromptPosition position = SoftPromptPosition::prepend;

  void check() const {
    require(learning_rate > 0, "train: learning rate must be positive");
    require(steps >= 0, "train: steps must be >= 0");
    require(effective_batch >= 1, "train: effective batch must be >= 1");
    require(n_p >= 1, "train: N_p must be >= 1");
    require(warmup_fraction >= 0 && warmup_fraction < 1, "train: warmup fraction must be in [0, 1)");
  }
};

/// Linear warmup from 0 to the peak, then cosine decay to 0 at `total`.
class CosineWarmupSchedule {
 public:
  CosineWarmupSchedule(double peak, long long total, double warmup_fraction)
      : peak_(peak), total_(total),
        warmup_(total > 0 ? std::max<long long>(1, std::llround(warmup_fraction * double(total))) : 0) {}

  long long warmup_steps() const { return warmup_; }

  double at(long long step) const {
    if (total_ <= 0) return 0.0;
    if (step < warmup_) return peak_ * double(step) / double(warmup_);
    if (step >= total_) return 0.0;
    const double span = double(total_ - warmup_);
    const double progress = span > 0 ? double(step - warmup_) / span : 1.0;
    return peak_ * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  }

 private:
  double peak_;
  long long total_;
  long long warmup_;
};

/// Decoupled-weight-decay Adam over one parameter matrix.
class AdamW {
 public:
  AdamW(Eigen::Index rows, Eigen::Index cols, const TrainConfig& cfg)
      : m_(Matrix::Zero(rows, cols)), v_(Matrix::Zero(rows, cols)), cfg_(cfg) {}

  void step(Matrix& param, const Matrix& grad, double lr) {
    ++t_;
    param *= (1.0 - lr * cfg_.weight_decay);
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    param.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.adam_eps);
  }

  long long steps_taken() const { return t_; }
  const Matrix& first_moment() const { return m_; }
  const Matrix& second_moment() const { return v_; }
  void restore(const Matrix& m, const Matrix& v, long long t) {
    require(m.rows() == m_.rows() && m.cols() == m_.cols() && v.rows() == v_.rows() &&
                v.cols() == v_.cols(),
            "AdamW: state shape mismatch");
    m_ = m;
    v_ = v;
    t_ = t;
  }

 private:
  Matrix m_, v_;
  long long t_ = 0;
  TrainConfig cfg_;
};

struct TrainRecord {
  long long step = 0;
  double lr = 0;
  double loss = 0;
  double bce = 0;
  double dice = 0;
  double mean_corr_frame = 0;
  double mean_corr_video = 0;
};

inline std::string records_csv(const std::vector<TrainRecord>& records) {
  std::string out = "step,lr,loss,bce,dice,mean_corr_frame,mean_corr_video\n";
  for (const auto& r : records) {
    out += std::to_string(r.step) + "," + container::Manifest::format_double(r.lr) + "," +
           container::Manifest::format_double(r.loss) + "," +
           container::Manifest::format_double(r.bce) + "," +
           container::Manifest::format_double(r.dice) + "," +
           container::Manifest::format_double(r.mean_corr_frame) + "," +
           container::Manifest::format_double(r.mean_corr_video) + "\n";
  }
  return out;
}

struct TrainState {
  SoftPromptBank frame;
  SoftPromptBank video;
  AdamW frame_opt;
  AdamW video_opt;
};

inline TrainState make_train_state(SoftPromptBank frame, SoftPromptBank video, const TrainConfig& cfg) {
  require(frame.branch == Branch::frame && video.branch == Branch::video,
          "train: banks must be one frame and one video branch");
  AdamW fo(frame.embeddings.rows(), frame.embeddings.cols(), cfg);
  AdamW vo(video.embeddings.rows(), video.embeddings.cols(), cfg);
  return {std::move(frame), std::move(video), std::move(fo), std::move(vo)};
}

/// Optimizer moments of both branches, for resuming.
inline container::ArrayContainer optimizer_to_container(const TrainState& st) {
  container::ArrayContainer c;
  c.manifest.set("magic", std::string("steerseg-optimizer"));
  c.manifest.set("version", 1);
  c.manifest.set("frame_t", st.frame_opt.steps_taken());
  c.manifest.set("video_t", st.video_opt.steps_taken());
  c.manifest.set("rows", std::size_t(st.frame.embeddings.rows()));
  c.manifest.set("cols", std::size_t(st.frame.embeddings.cols()));
  auto flat = [](const Matrix& m) {
    std::vector<double> v;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index k = 0; k < m.cols(); ++k) v.push_back(m(r, k));
    return v;
  };
  c.put("frame_m", flat(st.frame_opt.first_moment()));
  c.put("frame_v", flat(st.frame_opt.second_moment()));
  c.put("video_m", flat(st.video_opt.first_moment()));
  c.put("video_v", flat(st.video_opt.second_moment()));
  return c;
}

inline void restore_optimizer(TrainState& st, const container::ArrayContainer& c) {
  if (!c.manifest.has("magic") || c.manifest.get("magic") != "steerseg-optimizer") {
    throw FormatError("not an optimizer state file");
  }
  const auto rows = Eigen::Index(c.manifest.get_int("rows"));
  const auto cols = Eigen::Index(c.manifest.get_int("cols"));
  auto unflat = [&](const std::string& name, Eigen::Index r, Eigen::Index k) {
    const auto v = c.get(name);
    if (v.size() != std::size_t(r * k)) throw FormatError("optimizer state: bad size for " + name);
    Matrix m(r, k);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < k; ++j) m(i, j) = v[std::size_t(i * k + j)];
    return m;
  };
  const auto vr = st.video.embeddings.rows();
  st.frame_opt.restore(unflat("frame_m", rows, cols), unflat("frame_v", rows, cols),
                       c.manifest.get_int("frame_t"));
  st.video_opt.restore(unflat("video_m", vr, cols), unflat("video_v", vr, cols),
                       c.manifest.get_int("video_t"));
}

using ProgressFn = std::function<void(const TrainRecord&)>;

/// Runs optimizer steps from the banks' current step up to cfg.steps. Each
/// step accumulates `effective_batch` samples; every sample contributes one
/// frame-branch term (random keyframe) and one video-branch term.
inline std::vector<TrainRecord> train_soft_prompts(const std::vector<TrainSample>& data,
                                                   const TrainConfig& cfg,
                                                   const LanguageBackend& backend,
                                                   const rollout::RolloutConfig& rcfg,
                                                   TrainState& st,
                                                   const ProgressFn& progress = {}) {
  cfg.check();
  require(!data.empty(), "train: dataset is empty");
  require(st.frame.step == st.video.step, "train: branch step counters differ");
  const CosineWarmupSchedule sched(cfg.learning_rate, cfg.steps, cfg.warmup_fraction);
  std::vector<TrainRecord> records;
  for (long long step = st.frame.step; step < cfg.steps; ++step) {
    // Reseeding per step makes a resumed run draw the same samples.
    std::mt19937_64 rng(cfg.seed * 1000003ull + std::uint64_t(step));
    Matrix gf = Matrix::Zero(st.frame.embeddings.rows(), st.frame.embeddings.cols());
    Matrix gv = Matrix::Zero(st.video.embeddings.rows(), st.video.embeddings.cols());
    TrainRecord rec;
    rec.step = step;
    rec.lr = sched.at(step);
    const double inv = 1.0 / double(cfg.effective_batch);
    for (std::size_t b = 0; b < cfg.effective_batch; ++b) {
      const auto& s = data[std::uniform_int_distribution<std::size_t>(0, data.size() - 1)(rng)];
      const auto kfs = rollout::keyframe_indices(s.video->size(), rcfg.frame_keyframes);
      const std::size_t kf = kfs[std::uniform_int_distribution<std::size_t>(0, kfs.size() - 1)(rng)];
      const auto ft = loss_gradient({&s, Branch::frame, kf, &st.frame.embeddings, cfg.position},
                                    backend, rcfg);
      const auto vt = loss_gradient({&s, Branch::video, 0, &st.video.embeddings, cfg.position},
                                    backend, rcfg);
      for (const auto* t : {&ft, &vt}) {
        if (!std::isfinite(t->value.loss) || !t->grad.allFinite()) {
          throw NumericalError("non-finite loss or gradient on sample " + s.id + " at step " +
                               std::to_string(step));
        }
      }
      gf += ft.grad * inv;
      gv += vt.grad * inv;
      rec.bce += 0.5 * (ft.value.bce + vt.value.bce) * inv;
      rec.dice += 0.5 * (ft.value.dice + vt.value.dice) * inv;
      rec.mean_corr_frame += ft.corr * inv;
      rec.mean_corr_video += vt.corr * inv;
    }
    rec.loss = rec.bce + rec.dice;
    st.frame_opt.step(st.frame.embeddings, gf, rec.lr);
    st.video_opt.step(st.video.embeddings, gv, rec.lr);
    st.frame.step = st.video.step = step + 1;
    records.push_back(rec);
    if (progress) progress(rec);
  }
  return records;
}

}  // namespace steerseg::steering

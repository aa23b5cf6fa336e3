#include <cmath>

#include <gtest/gtest.h>

#include "steerseg/scenes.hpp"
#include "steerseg/steering.hpp"
#include "steerseg/toy_backend.hpp"
#include "support.hpp"

using namespace steerseg;
using numerics::DenseGrid;
using steering::Branch;
using testing_support::random_grid;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

struct Fixture {
  toy::ToyLanguageModel model;
  std::vector<scenes::SyntheticScene> scenes = scenes::generate_scenes(5, 3, {});
  std::vector<steering::TrainSample> samples;
  rollout::RolloutConfig rcfg;

  Fixture() {
    for (const auto& s : scenes) {
      samples.push_back({s.id, &s.video, prompting::build_query_prompt(s.expression, {}), s.target_masks()});
    }
  }

  steering::TrainState state(std::size_t n_p, const steering::TrainConfig& cfg) const {
    return steering::make_train_state(
        prompting::init_soft_prompts(Branch::frame, prompting::kFrameSeedText, n_p, model),
        prompting::init_soft_prompts(Branch::video, prompting::kVideoSeedText, n_p, model), cfg);
  }
};

}  // namespace

TEST(GroundingLoss, MatchesDirectFormula) {
  std::mt19937_64 rng(41);
  const auto s = random_grid(rng, {2, 3, 3});
  auto g = random_grid(rng, {2, 3, 3});
  for (auto& v : g.values()) v = v > 0.6;
  double bce = 0, inter = 0, ss = 0, gs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    bce += -(g[i] * std::log(s[i]) + (1 - g[i]) * std::log(1 - s[i]));
    inter += s[i] * g[i];
    ss += s[i];
    gs += g[i];
  }
  const auto v = steering::grounding_loss(s, g);
  EXPECT_NEAR(v.bce, bce / 18, 1e-12);
  EXPECT_NEAR(v.dice, 1 - (2 * inter + 1) / (ss + gs + 1), 1e-12);
  EXPECT_DOUBLE_EQ(v.loss, v.bce + v.dice);
}

TEST(GroundingLoss, ClampKeepsExtremesFinite) {
  DenseGrid s({3}, std::vector<double>{0.0, 1.0, 0.5}), g({3}, std::vector<double>{1, 0, 1});
  const auto v = steering::grounding_loss(s, g);
  EXPECT_TRUE(std::isfinite(v.loss));
  EXPECT_NEAR(v.bce, (-2 * std::log(1e-7) - std::log(0.5)) / 3, 1e-6);
}

TEST(GroundingLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    auto s = random_grid(rng, {12}, 0.05, 0.95);
    auto g = random_grid(rng, {12});
    const auto d = steering::grounding_loss_grad(s, g);
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto p = s, m = s;
      p[i] += 1e-6;
      m[i] -= 1e-6;
      const double fd = (steering::grounding_loss(p, g).loss - steering::grounding_loss(m, g).loss) / 2e-6;
      EXPECT_NEAR(d[i], fd, 1e-7);
    }
  }
}

TEST(MinmaxBackward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const auto raw = random_grid(rng, {15}, -1, 1);
    const auto w = random_grid(rng, {15}, -1, 1);
    auto f = [&](const DenseGrid& x) {
      const auto n = numerics::minmax_normalize(x);
      double s = 0;
      for (std::size_t i = 0; i < n.size(); ++i) s += w[i] * n[i];
      return s;
    };
    const auto d = steering::minmax_normalize_grad(raw, w.storage());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      auto p = raw, m = raw;
      p[i] += 1e-7;
      m[i] -= 1e-7;
      EXPECT_NEAR(d[i], (f(p) - f(m)) / 2e-7, 1e-6);
    }
  }
}

TEST(LossGradient, MatchesCentralDifferencesOnToyBackend) {
  Fixture fx;
  auto st = fx.state(6, {});
  std::mt19937_64 rng(44);
  for (auto branch : {Branch::frame, Branch::video}) {
    Matrix& p = branch == Branch::frame ? st.frame.embeddings : st.video.embeddings;
    const steering::TermRequest req{&fx.samples[0], branch, 5, &p};
    const auto term = steering::loss_gradient(req, fx.model, fx.rcfg);
    EXPECT_NEAR(term.value.loss, steering::evaluate_term(req, fx.model, fx.rcfg).value.loss, 1e-12);
    for (int k = 0; k < 8; ++k) {
      const auto r = Eigen::Index(rng() % p.rows()), c = Eigen::Index(rng() % p.cols());
      const double orig = p(r, c);
      p(r, c) = orig + 1e-4;
      const double lp = steering::evaluate_term(req, fx.model, fx.rcfg).value.loss;
      p(r, c) = orig - 1e-4;
      const double lm = steering::evaluate_term(req, fx.model, fx.rcfg).value.loss;
      p(r, c) = orig;
      EXPECT_LE(rel_err(term.grad(r, c), (lp - lm) / 2e-4), 1e-3)
          << prompting::branch_name(branch) << " entry " << r << "," << c;
    }
  }
}

TEST(LossGradient, AppendedPromptsAlsoDifferentiate) {
  Fixture fx;
  auto st = fx.state(4, {});
  const steering::TermRequest req{&fx.samples[1], Branch::frame, 0, &st.frame.embeddings,
                                  SoftPromptPosition::append};
  const auto term = steering::loss_gradient(req, fx.model, fx.rcfg);
  Matrix& p = st.frame.embeddings;
  const double orig = p(2, 3);
  p(2, 3) = orig + 1e-4;
  const double lp = steering::evaluate_term(req, fx.model, fx.rcfg).value.loss;
  p(2, 3) = orig - 1e-4;
  const double lm = steering::evaluate_term(req, fx.model, fx.rcfg).value.loss;
  p(2, 3) = orig;
  EXPECT_LE(rel_err(term.grad(2, 3), (lp - lm) / 2e-4), 1e-3);
}

TEST(LossGradient, RequiresGradientCapableBackend) {
  class NoGrad final : public LanguageBackend {
   public:
    BackendForwardResult forward(const ForwardRequest&) const override { return {}; }
    std::string generate(const std::string&, const std::vector<const Image*>&) const override { return "x"; }
    std::size_t embedding_dim() const override { return 1; }
    Matrix embed_text(const std::string&) const override { return Matrix::Zero(1, 1); }
  } backend;
  Fixture fx;
  Matrix p = Matrix::Zero(1, 1);
  EXPECT_THROW(steering::loss_gradient({&fx.samples[0], Branch::frame, 0, &p}, backend, fx.rcfg), CapabilityError);
}

TEST(AdamW, FirstStepMatchesClosedForm) {
  steering::TrainConfig cfg;
  cfg.weight_decay = 0.1;
  steering::AdamW opt(1, 2, cfg);
  Matrix p(1, 2);
  p << 1.0, -2.0;
  Matrix g(1, 2);
  g << 0.5, -3.0;
  opt.step(p, g, 0.01);
  // Bias correction makes the first update lr * g / (|g| + eps) after decay.
  EXPECT_NEAR(p(0, 0), 1.0 * (1 - 0.001) - 0.01 * 0.5 / (0.5 + 1e-8), 1e-12);
  EXPECT_NEAR(p(0, 1), -2.0 * (1 - 0.001) + 0.01 * 3.0 / (3.0 + 1e-8), 1e-12);
  EXPECT_EQ(opt.steps_taken(), 1);
}

TEST(Schedule, LinearWarmupThenCosineToZero) {
  const steering::CosineWarmupSchedule s(5e-4, 6500, 0.03);
  EXPECT_EQ(s.warmup_steps(), 195);
  EXPECT_EQ(s.at(0), 0.0);
  EXPECT_NEAR(s.at(97), 5e-4 * 97 / 195, 1e-18);
  EXPECT_DOUBLE_EQ(s.at(195), 5e-4);
  EXPECT_NEAR(s.at(195 + 3152), 2.5e-4, 1e-7);
  EXPECT_EQ(s.at(6500), 0.0);
  for (long long t = 196; t < 6500; t += 37) EXPECT_LE(s.at(t), s.at(t - 1));
}

TEST(Training, ResumeMatchesUninterruptedRun) {
  Fixture fx;
  steering::TrainConfig cfg;
  cfg.steps = 4;
  cfg.n_p = 4;
  cfg.effective_batch = 2;
  cfg.learning_rate = 1e-2;
  cfg.seed = 9;
  auto full = fx.state(4, cfg);
  const auto rec_full = steering::train_soft_prompts(fx.samples, cfg, fx.model, fx.rcfg, full);
  ASSERT_EQ(rec_full.size(), 4u);

  // Interrupt after two steps, then continue from the in-memory state.
  auto part = fx.state(4, cfg);
  EXPECT_THROW(steering::train_soft_prompts(fx.samples, cfg, fx.model, fx.rcfg, part,
                                            [](const steering::TrainRecord& r) {
                                              if (r.step == 1) throw std::runtime_error("interrupt");
                                            }),
               std::runtime_error);
  EXPECT_EQ(part.frame.step, 2);
  const auto rec_rest = steering::train_soft_prompts(fx.samples, cfg, fx.model, fx.rcfg, part);
  ASSERT_EQ(rec_rest.size(), 2u);
  EXPECT_EQ(rec_rest[1].loss, rec_full[3].loss);
  EXPECT_EQ(part.frame.embeddings, full.frame.embeddings);
  EXPECT_EQ(part.video.embeddings, full.video.embeddings);
}

TEST(Training, LossRecordAveragesBranchTerms) {
  Fixture fx;
  steering::TrainConfig cfg;
  cfg.steps = 1;
  cfg.n_p = 4;
  cfg.effective_batch = 1;
  auto st = fx.state(4, cfg);
  const auto init = st;
  const auto rec = steering::train_soft_prompts(fx.samples, cfg, fx.model, fx.rcfg, st);
  ASSERT_EQ(rec.size(), 1u);
  EXPECT_NEAR(rec[0].loss, rec[0].bce + rec[0].dice, 1e-15);
  EXPECT_EQ(rec[0].lr, 0.0);  // first warmup step
  // Zero learning rate still applies no decay and no update.
  EXPECT_EQ(st.frame.embeddings, init.frame.embeddings);
  EXPECT_EQ(st.frame.step, 1);
}

TEST(Training, SameSeedSameTrajectory) {
  Fixture fx;
  steering::TrainConfig cfg;
  cfg.steps = 3;
  cfg.n_p = 4;
  cfg.effective_batch = 2;
  cfg.learning_rate = 5e-3;
  auto a = fx.state(4, cfg), b = fx.state(4, cfg);
  const auto ra = steering::train_soft_prompts(fx.samples, cfg, fx.model, fx.rcfg, a);
  const auto rb = steering::train_soft_prompts(fx.samples, cfg, fx.model, fx.rcfg, b);
  EXPECT_EQ(steering::records_csv(ra), steering::records_csv(rb));
  EXPECT_EQ(a.video.embeddings, b.video.embeddings);
}

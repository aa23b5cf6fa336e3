#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "steerseg/cli.hpp"
#include "support.hpp"
#include "temp_dir.hpp"

using namespace steerseg;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) { return zip::read_file(p); }

int run(const std::function<int()>& fn, std::string* msg = nullptr) {
  std::ostringstream err;
  const int code = cli::guarded(fn, err);
  if (msg) *msg = err.str();
  return code;
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
  const auto c = config::parse(R"({"selection": {"alpha": 0.25}, "train": {"n_p": 8, "position": "append"}})");
  EXPECT_EQ(c.selection.alpha, 0.25);
  EXPECT_EQ(c.train.n_p, 8u);
  EXPECT_EQ(c.train.position, SoftPromptPosition::append);
  EXPECT_EQ(c.rollout.frame_keyframes, 16u);
  EXPECT_EQ(c.selection.nms_iou, 0.7);
  const auto round = config::from_json(config::to_json(c));
  EXPECT_EQ(config::to_json(round), config::to_json(c));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(config::parse(R"({"alhpa": 0.5})"), ConfigError);
  EXPECT_THROW(config::parse(R"({"selection": {"alpah": 0.5}})"), ConfigError);
  EXPECT_THROW(config::parse(R"({"selection": {"alpha": 1.5}})"), ConfigError);
  EXPECT_THROW(config::parse(R"({"selection": {"alpha": "half"}})"), ConfigError);
  EXPECT_THROW(config::parse(R"({"train": {"position": "middle"}})"), ConfigError);
  EXPECT_THROW(config::parse(R"({"backend": "gpu"})"), ConfigError);
  EXPECT_THROW(config::parse("{not json"), ConfigError);
  EXPECT_THROW(config::load("/nonexistent/steerseg.json"), ConfigError);
}

TEST(Config, EnvironmentVariableIsTheFallback) {
  TempDir tmp;
  zip::write_file(tmp.path() / "c.json", R"({"seed": 42})");
  zip::write_file(tmp.path() / "d.json", R"({"seed": 7})");
  ::setenv("STEERSEG_CONFIG", (tmp.path() / "c.json").c_str(), 1);
  EXPECT_EQ(config::resolve("").seed, 42u);
  EXPECT_EQ(config::resolve((tmp.path() / "d.json").string()).seed, 7u);
  ::unsetenv("STEERSEG_CONFIG");
  EXPECT_EQ(config::resolve("").seed, 0u);
}

TEST(Cli, ExitCodesFollowTheErrorClass) {
  EXPECT_EQ(run([] { return cli::kOk; }), 0);
  EXPECT_EQ(run([]() -> int { throw ConfigError("x"); }), 2);
  EXPECT_EQ(run([]() -> int { throw cli::UsageError("x"); }), 2);
  EXPECT_EQ(run([]() -> int { throw LoadError("x"); }), 3);
  EXPECT_EQ(run([]() -> int { throw FormatError("x"); }), 3);
  EXPECT_EQ(run([]() -> int { throw BackendError("x", 2); }), 4);
  EXPECT_EQ(run([]() -> int { throw CapabilityError("x"); }), 4);
  EXPECT_EQ(run([]() -> int { throw std::logic_error("x"); }), 1);
  std::string msg;
  run([]() -> int { throw LoadError("missing frames"); }, &msg);
  EXPECT_EQ(msg, "input error: missing frames\n");
}

class CliData : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new TempDir("cli_data");
    cli::SynthesizeArgs s;
    s.seed = 5;
    s.count = 2;
    s.out = (root_->path() / "vos").string();
    ASSERT_EQ(run([&] { return cli::cmd_synthesize(s); }), 0);
  }
  static void TearDownTestSuite() { delete root_; }
  static fs::path vos() { return root_->path() / "vos"; }

  cli::SegmentArgs segment_args(const fs::path& out) const {
    const auto videos = vos::load_vos_directory(vos());
    cli::SegmentArgs a;
    a.video = (vos() / "JPEGImages" / videos[0].id).string();
    a.annotations = (vos() / "Annotations" / videos[0].id).string();
    a.expression = videos[0].expressions.begin()->second.front();
    a.out = out.string();
    return a;
  }

  static TempDir* root_;
};

TempDir* CliData::root_ = nullptr;

TEST_F(CliData, SynthesizedDirectoryLoads) {
  const auto videos = vos::load_vos_directory(vos());
  ASSERT_EQ(videos.size(), 2u);
  const auto direct = scenes::generate_scenes(5, 2, {});
  for (std::size_t t = 0; t < 16; t += 5) {
    EXPECT_EQ(videos[0].video.frames[t], decode_png_rgb(encode_png_rgb(direct[0].video.frames[t])));
  }
  EXPECT_EQ(videos[0].labels[3].labels, direct[0].label_maps[3].labels);
}

TEST_F(CliData, SegmentWritesMasksAndManifestDeterministically) {
  TempDir tmp;
  auto a = segment_args(tmp.path() / "run1");
  a.export_attention = true;
  std::string msg;
  ASSERT_EQ(run([&] { return cli::cmd_segment(a); }, &msg), 0) << msg;
  const auto masks = vos::read_mask_directory(tmp.path() / "run1");
  EXPECT_EQ(masks.binary.size(), 16u);
  const auto m = nlohmann::json::parse(slurp(tmp.path() / "run1" / "manifest.json"));
  EXPECT_EQ(m["expression"], a.expression);
  EXPECT_EQ(m["frame_keyframes"].size(), 16u);
  EXPECT_EQ(m["tracklets"].size(), m["n_c"].get<std::size_t>());
  EXPECT_TRUE(fs::exists(tmp.path() / "run1" / "attention" / "video.bin"));
  EXPECT_TRUE(fs::exists(tmp.path() / "run1" / "attention" / cli::dump_name(0)));

  a.out = (tmp.path() / "run2").string();
  a.export_attention = false;
  ASSERT_EQ(run([&] { return cli::cmd_segment(a); }), 0);
  EXPECT_EQ(slurp(tmp.path() / "run1" / "manifest.json"), slurp(tmp.path() / "run2" / "manifest.json"));
  EXPECT_EQ(slurp(tmp.path() / "run1" / "probabilities.bin"), slurp(tmp.path() / "run2" / "probabilities.bin"));
  for (std::size_t t = 0; t < 16; ++t) {
    EXPECT_EQ(slurp(tmp.path() / "run1" / "masks" / vos::frame_name(t)),
              slurp(tmp.path() / "run2" / "masks" / vos::frame_name(t)));
  }

  // Replaying the exported forwards reproduces the selection.
  a.out = (tmp.path() / "run3").string();
  a.dumps = (tmp.path() / "run1" / "attention").string();
  ASSERT_EQ(run([&] { return cli::cmd_segment(a); }, &msg), 0) << msg;
  const auto m3 = nlohmann::json::parse(slurp(tmp.path() / "run3" / "manifest.json"));
  EXPECT_EQ(m3["tracklets"], m["tracklets"]);
  EXPECT_EQ(m3["chosen"], m["chosen"]);
}

TEST_F(CliData, SegmentInputErrors) {
  TempDir tmp;
  auto a = segment_args(tmp.path() / "out");
  auto bad = a;
  bad.video = (tmp.path() / "missing").string();
  EXPECT_EQ(run([&] { return cli::cmd_segment(bad); }), 3);
  bad = a;
  bad.expression.clear();
  EXPECT_EQ(run([&] { return cli::cmd_segment(bad); }), 2);
  bad = a;
  bad.alpha = 2.0;
  EXPECT_EQ(run([&] { return cli::cmd_segment(bad); }), 2);
  bad = a;
  bad.prompts = (tmp.path() / "no_prompts").string();
  EXPECT_EQ(run([&] { return cli::cmd_segment(bad); }), 3);
  bad = a;
  bad.dumps = (tmp.path() / "no_dumps").string();
  EXPECT_EQ(run([&] { return cli::cmd_segment(bad); }), 3);
  zip::write_file(tmp.path() / "plugin.json", R"({"backend": "plugin"})");
  bad = a;
  bad.config = (tmp.path() / "plugin.json").string();
  EXPECT_EQ(run([&] { return cli::cmd_segment(bad); }), 4);
  EXPECT_FALSE(fs::exists(tmp.path() / "out" / "manifest.json"));
}

TEST_F(CliData, TrainZeroStepsWritesTheInitialBanks) {
  TempDir tmp;
  zip::write_file(tmp.path() / "c.json", R"({"train": {"n_p": 8}})");
  cli::TrainArgs a;
  a.config = (tmp.path() / "c.json").string();
  a.data = vos().string();
  a.out = (tmp.path() / "p").string();
  a.steps = 0;
  a.quiet = true;
  ASSERT_EQ(run([&] { return cli::cmd_train(a); }), 0);
  toy::ToyLanguageModel model;
  const auto fb = prompting::init_soft_prompts(prompting::Branch::frame, prompting::kFrameSeedText, 8, model);
  const auto expect = tmp.path() / "expect.bin";
  prompting::save_bank(expect, fb);
  EXPECT_EQ(slurp(tmp.path() / "p" / cli::kFramePromptFile), slurp(expect));
}

TEST_F(CliData, TrainResumeContinuesTheStepCount) {
  TempDir tmp;
  zip::write_file(tmp.path() / "c.json", R"({"train": {"n_p": 4, "steps": 4, "effective_batch": 1}})");
  cli::TrainArgs a;
  a.config = (tmp.path() / "c.json").string();
  a.data = "synthetic:3:2";
  a.out = (tmp.path() / "p").string();
  a.steps = 2;
  a.quiet = true;
  ASSERT_EQ(run([&] { return cli::cmd_train(a); }), 0);
  EXPECT_EQ(prompting::load_bank(tmp.path() / "p" / cli::kFramePromptFile).step, 2);
  a.steps.reset();
  a.resume = true;
  ASSERT_EQ(run([&] { return cli::cmd_train(a); }), 0);
  EXPECT_EQ(prompting::load_bank(tmp.path() / "p" / cli::kVideoPromptFile).step, 4);
  const auto log = slurp(tmp.path() / "p" / "train_log.csv");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 5);
  const auto m = nlohmann::json::parse(slurp(tmp.path() / "p" / "manifest.json"));
  EXPECT_EQ(m["start_step"], 2);

  // Trained prompts are accepted by segment.
  auto s = segment_args(tmp.path() / "seg");
  s.prompts = (tmp.path() / "p").string();
  std::string msg;
  EXPECT_EQ(run([&] { return cli::cmd_segment(s); }, &msg), 0) << msg;

  // Resuming without optimizer state is an input error.
  fs::remove(tmp.path() / "p" / cli::kOptimizerFile);
  EXPECT_EQ(run([&] { return cli::cmd_train(a); }), 3);
}

TEST_F(CliData, EvalSelfTestScoresOne) {
  TempDir tmp;
  cli::EvalArgs a;
  a.data = vos().string();
  a.report = (tmp.path() / "r.json").string();
  a.self_test = true;
  ASSERT_EQ(run([&] { return cli::cmd_eval(a); }), 0);
  const auto r = nlohmann::json::parse(slurp(tmp.path() / "r.json"));
  EXPECT_EQ(r["summary"]["J"], 1.0);
  EXPECT_EQ(r["summary"]["F"], 1.0);
  EXPECT_EQ(r["summary"]["JF"], 1.0);
  EXPECT_EQ(r["videos"].size(), 2u);
}

TEST_F(CliData, AblateValidatesItsParameter) {
  TempDir tmp;
  cli::AblateArgs a;
  a.data = "synthetic:9:1";
  a.out = (tmp.path() / "a.csv").string();
  a.param = "beta";
  EXPECT_EQ(run([&] { return cli::cmd_ablate(a); }), 2);
  a.param = "alpha";
  a.values = "0,0.5,1";
  ASSERT_EQ(run([&] { return cli::cmd_ablate(a); }), 0);
  const auto csv = slurp(tmp.path() / "a.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  a.values = "0,x";
  EXPECT_EQ(run([&] { return cli::cmd_ablate(a); }), 2);
  a.param = "components";
  a.values.clear();
  EXPECT_EQ(run([&] { return cli::cmd_ablate(a); }), 2);
}

TEST_F(CliData, MakeSamplesFeedsTheService) {
  TempDir tmp;
  cli::MakeSamplesArgs a;
  a.data = vos().string();
  a.out = tmp.path().string();
  ASSERT_EQ(run([&] { return cli::cmd_make_samples(a); }), 0);
  const auto samples = service::load_samples(tmp.path());
  ASSERT_EQ(samples.size(), 2u);
  EXPECT_FALSE(samples[0].attributes.empty());
  EXPECT_TRUE(fs::exists(tmp.path() / samples[0].media));
}

TEST(Cli, SyntheticSpecErrors) {
  EXPECT_THROW(cli::load_dataset("synthetic:1", {}), cli::UsageError);
  EXPECT_THROW(cli::load_dataset("synthetic:a:2", {}), cli::UsageError);
  EXPECT_EQ(cli::load_dataset("synthetic:1:3:1:1", {})->cases.size(), 3u);
  EXPECT_THROW(cli::load_dataset("/nonexistent/vos", {}), LoadError);
}

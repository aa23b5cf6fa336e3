// Grounds an expression in one synthetic scene with the toy backend and the
// oracle segmenter, optionally using trained prompt checkpoints.
//
//   quickstart [prompt_dir]

#include <cstdio>
#include <filesystem>
#include <optional>

#include "steerseg/cli.hpp"
#include "steerseg/metrics.hpp"
#include "steerseg/pipeline.hpp"
#include "steerseg/scenes.hpp"
#include "steerseg/toy_backend.hpp"

using namespace steerseg;

int main(int argc, char** argv) {
  const config::PipelineConfig cfg;
  const toy::ToyLanguageModel backend(cfg.toy);
  const auto scene = scenes::generate_scene(42, 0, cfg.scenes);

  std::optional<prompting::SoftPromptBank> frame, video;
  if (argc > 1) {
    const std::filesystem::path dir = argv[1];
    frame = prompting::load_bank(dir / cli::kFramePromptFile);
    video = prompting::load_bank(dir / cli::kVideoPromptFile);
  }

  OracleSegmenter segmenter(scene.label_maps);
  const auto r = pipeline::run(scene.video, scene.expression, backend, segmenter,
                               frame ? &frame->embeddings : nullptr, video ? &video->embeddings : nullptr,
                               cli::pipeline_options(cfg));

  std::printf("expression: %s\n", scene.expression.c_str());
  std::printf("attributes:");
  for (const auto& a : r.candidates.plan.attributes) std::printf(" [%s]", a.c_str());
  std::printf("\nanswer word: %s\n", r.candidates.maps.generated_word.c_str());
  for (std::size_t i = 0; i < r.selection.scored.size(); ++i) {
    const auto& t = r.selection.scored[i];
    std::printf("tracklet %zu: s=%.3f (frame %.3f, video %.3f)%s\n", i, t.s, t.s_frm, t.s_vid,
                r.selection.chosen == i ? "  <- chosen" : "");
  }
  const auto score = metrics::score_video(r.selection.masks.binary, scene.target_masks());
  std::printf("J %.3f  F %.3f  J&F %.3f\n", score.j, score.f, score.jf);
}

#include <CLI11.hpp>

#include "steerseg/cli.hpp"

namespace cli = steerseg::cli;

int main(int argc, char** argv) {
  CLI::App app{"Attention-guided referring video segmentation"};
  app.require_subcommand(1);

  cli::SegmentArgs seg;
  auto* s = app.add_subcommand("segment", "Segment the object an expression refers to");
  s->add_option("--config", seg.config, "Pipeline config (JSON)");
  s->add_option("--video", seg.video, "Directory of PNG frames")->required();
  s->add_option("--annotations", seg.annotations, "Label maps for the bundled segmenter")->required();
  s->add_option("--expression,-e", seg.expression, "Referring expression")->required();
  s->add_option("--out,-o", seg.out, "Output directory")->required();
  s->add_option("--prompts", seg.prompts, "Directory with trained prompt checkpoints");
  s->add_option("--dumps", seg.dumps, "Replay recorded attention dumps from this directory");
  s->add_option("--alpha", seg.alpha, "Frame weight of the tracklet score");
  s->add_flag("--export-attention", seg.export_attention, "Write the forwards as attention dumps");

  cli::TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the frame and video soft prompts");
  t->add_option("--config", tr.config, "Pipeline config (JSON)");
  t->add_option("--data", tr.data, "VOS directory or synthetic:SEED:COUNT[:MIN:MAX]")->required();
  t->add_option("--out,-o", tr.out, "Checkpoint directory")->required();
  t->add_option("--steps", tr.steps, "Total optimizer steps");
  t->add_flag("--resume", tr.resume, "Continue from the checkpoint in --out");
  t->add_flag("--quiet,-q", tr.quiet, "No progress lines");

  cli::EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate J, F, J&F and attention correlation");
  e->add_option("--config", ev.config, "Pipeline config (JSON)");
  e->add_option("--data", ev.data, "VOS directory or synthetic:SEED:COUNT[:MIN:MAX]")->required();
  e->add_option("--prompts", ev.prompts, "Directory with trained prompt checkpoints");
  e->add_option("--report", ev.report, "Report path (JSON)")->required();
  e->add_option("--alpha", ev.alpha, "Frame weight of the tracklet score");
  e->add_flag("--no-soft", ev.no_soft, "Ignore soft prompts");
  e->add_flag("--self-test", ev.self_test, "Score the ground truth against itself");

  cli::AblateArgs ab;
  auto* a = app.add_subcommand("ablate", "Sweep alpha, N_p or the component grid");
  a->add_option("--config", ab.config, "Pipeline config (JSON)");
  a->add_option("--data", ab.data, "Evaluation data")->required();
  a->add_option("--train-data", ab.train_data, "Training data for the N_p sweep");
  a->add_option("--prompts", ab.prompts, "Directory with trained prompt checkpoints");
  a->add_option("--param", ab.param, "alpha, n_p or components")->required();
  a->add_option("--values", ab.values, "Comma-separated values");
  a->add_option("--out,-o", ab.out, "CSV path")->required();

  cli::SynthesizeArgs sy;
  auto* y = app.add_subcommand("synthesize", "Write synthetic scenes as a VOS directory");
  y->add_option("--config", sy.config, "Pipeline config (JSON)");
  y->add_option("--seed", sy.seed, "Generator seed");
  y->add_option("--count", sy.count, "Number of scenes")->required();
  y->add_option("--min-instances", sy.min_instances, "Fewest instances per scene");
  y->add_option("--max-instances", sy.max_instances, "Most instances per scene");
  y->add_option("--out,-o", sy.out, "Output directory")->required();

  cli::MakeSamplesArgs ms;
  auto* m = app.add_subcommand("make-samples", "Build a diagnostic samples directory");
  m->add_option("--config", ms.config, "Pipeline config (JSON)");
  m->add_option("--data", ms.data, "VOS directory or synthetic:SEED:COUNT[:MIN:MAX]")->required();
  m->add_option("--out,-o", ms.out, "Samples directory")->required();

  cli::ServeArgs sv;
  auto* d = app.add_subcommand("diagnose-serve", "Serve the reasoning-diagnosis API");
  d->add_option("--samples-dir", sv.samples_dir, "Directory holding samples.json and media")->required();
  d->add_option("--store", sv.store, "Verdict store (JSONL)")->required();
  d->add_option("--ui", sv.ui_dir, "Static UI directory served at /");
  d->add_option("--host", sv.host, "Bind address");
  d->add_option("--port", sv.port, "Port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? cli::kOk : cli::kConfig;
  }

  if (*s) return cli::guarded([&] { return cli::cmd_segment(seg); });
  if (*t) return cli::guarded([&] { return cli::cmd_train(tr); });
  if (*e) return cli::guarded([&] { return cli::cmd_eval(ev); });
  if (*a) return cli::guarded([&] { return cli::cmd_ablate(ab); });
  if (*y) return cli::guarded([&] { return cli::cmd_synthesize(sy); });
  if (*m) return cli::guarded([&] { return cli::cmd_make_samples(ms); });
  return cli::guarded([&] { return cli::cmd_diagnose_serve(sv); });
}

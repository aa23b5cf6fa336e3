#pragma once

// Command implementations behind the steerseg executable. Each returns a
// process exit code: 0 ok, 1 unexpected, 2 configuration or usage, 3 input,
// 4 backend.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "steerseg/attention_dump.hpp"
#include "steerseg/config.hpp"
#include "steerseg/evaluation.hpp"
#include "steerseg/oracle_segmenter.hpp"
#include "steerseg/pipeline.hpp"
#include "steerseg/prompting.hpp"
#include "steerseg/scenes.hpp"
#include "steerseg/service.hpp"
#include "steerseg/steering.hpp"
#include "steerseg/toy_backend.hpp"
#include "steerseg/vos.hpp"

namespace steerseg::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

enum Exit { kOk = 0, kUnexpected = 1, kConfig = 2, kInput = 3, kBackend = 4 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs `fn`, mapping exceptions to exit codes with a one-line diagnostic.
inline int guarded(const std::function<int()>& fn, std::ostream& err = std::cerr) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kConfig;
  } catch (const ContractViolation& e) {
    err << "invalid argument: " << e.what() << "\n";
    return kConfig;
  } catch (const LoadError& e) {
    err << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const FormatError& e) {
    err << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const GenerationError& e) {
    err << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const BackendError& e) {
    err << "backend error: " << e.what() << "\n";
    return kBackend;
  } catch (const CapabilityError& e) {
    err << "backend error: " << e.what() << "\n";
    return kBackend;
  } catch (const NumericalError& e) {
    err << "backend error: " << e.what() << "\n";
    return kBackend;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUnexpected;
  }
}

inline const char* kFramePromptFile = "frame_prompts.bin";
inline const char* kVideoPromptFile = "video_prompts.bin";
inline const char* kOptimizerFile = "optimizer.bin";

// ---- data ----------------------------------------------------------------

/// Videos plus flattened (video, object, expression) cases.
struct Dataset {
  std::vector<vos::VosVideo> videos;
  std::vector<eval::EvalCase> cases;
};

inline void index_cases(Dataset& d) {
  d.cases.clear();
  for (const auto& s : vos::samples(d.videos)) {
    eval::EvalCase c;
    c.id = s.video->id + "/" + std::to_string(s.object_id) + "/" + std::to_string(d.cases.size());
    c.video = &s.video->video;
    c.expression = s.expression;
    c.gt = s.gt();
    c.labels = &s.video->labels;
    d.cases.push_back(std::move(c));
  }
}

inline vos::VosVideo scene_to_video(scenes::SyntheticScene s) {
  vos::VosVideo v;
  v.id = s.id;
  v.video = std::move(s.video);
  v.labels = std::move(s.label_maps);
  v.expressions[s.target] = {s.expression};
  return v;
}

/// `synthetic:SEED:COUNT[:MIN:MAX]` generates scenes; anything else is a VOS
/// directory.
inline std::unique_ptr<Dataset> load_dataset(const std::string& spec, const scenes::SceneSpec& base) {
  auto d = std::make_unique<Dataset>();
  const std::string prefix = "synthetic:";
  if (spec.rfind(prefix, 0) == 0) {
    std::vector<std::string> parts;
    std::stringstream ss(spec.substr(prefix.size()));
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 2 && parts.size() != 4) throw UsageError("synthetic data spec must be synthetic:SEED:COUNT[:MIN:MAX]");
    scenes::SceneSpec sp = base;
    std::uint64_t seed = 0;
    std::size_t count = 0;
    try {
      seed = std::stoull(parts[0]);
      count = std::stoul(parts[1]);
      if (parts.size() == 4) {
        sp.min_instances = std::stoul(parts[2]);
        sp.max_instances = std::stoul(parts[3]);
      }
    } catch (const std::exception&) {
      throw UsageError("synthetic data spec has a non-numeric field: " + spec);
    }
    for (auto& s : scenes::generate_scenes(seed, count, sp)) d->videos.push_back(scene_to_video(std::move(s)));
  } else {
    d->videos = vos::load_vos_directory(spec);
  }
  index_cases(*d);
  return d;
}

// ---- backends and prompts --------------------------------------------------

inline std::unique_ptr<LanguageBackend> make_backend(const config::PipelineConfig& cfg) {
  switch (cfg.backend) {
    case config::BackendKind::toy: return std::make_unique<toy::ToyLanguageModel>(cfg.toy);
    case config::BackendKind::dump:
      throw UsageError("the dump backend replays one video; use 'segment --dumps DIR'");
    case config::BackendKind::plugin: throw CapabilityError("no backend plugin is bundled with this build");
  }
  throw ConfigError("unknown backend");
}

struct PromptPair {
  prompting::SoftPromptBank frame, video;
};

/// Prompts from `dir` if given, else from the config paths; none if neither.
inline std::optional<PromptPair> load_prompts(const std::string& dir, const config::PipelineConfig& cfg,
                                              std::size_t dim) {
  fs::path f, v;
  if (!dir.empty()) {
    f = fs::path(dir) / kFramePromptFile;
    v = fs::path(dir) / kVideoPromptFile;
  } else if (!cfg.frame_prompts.empty() || !cfg.video_prompts.empty()) {
    if (cfg.frame_prompts.empty() || cfg.video_prompts.empty()) {
      throw ConfigError("prompts: set both frame and video checkpoint paths");
    }
    f = cfg.frame_prompts;
    v = cfg.video_prompts;
  } else {
    return std::nullopt;
  }
  PromptPair p{prompting::load_bank(f), prompting::load_bank(v)};
  if (p.frame.branch != prompting::Branch::frame || p.video.branch != prompting::Branch::video) {
    throw LoadError("prompt checkpoints have the wrong branch");
  }
  if (p.frame.dim() != dim || p.video.dim() != dim) {
    throw LoadError("prompt width " + std::to_string(p.frame.dim()) + " does not match the backend width " +
                    std::to_string(dim));
  }
  return p;
}

inline pipeline::Options pipeline_options(const config::PipelineConfig& cfg) {
  pipeline::Options o;
  o.rollout = cfg.rollout;
  o.selection = cfg.selection;
  o.use_cot = cfg.use_cot;
  o.soft_position = cfg.train.position;
  return o;
}

inline std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---- segment ---------------------------------------------------------------

struct SegmentArgs {
  std::string config;
  std::string video;        // directory of PNG frames
  std::string annotations;  // label maps driving the oracle segmenter
  std::string expression;
  std::string out;
  std::string prompts;      // directory with both checkpoints
  std::string dumps;        // dump backend: frame_<t>.bin, video.bin, reasoning.txt
  std::optional<double> alpha;
  bool export_attention = false;
};

inline rollout::Video load_frames(const fs::path& dir) {
  rollout::Video v;
  for (const auto& f : vos::sorted_files(dir)) {
    if (f.extension() != ".png") throw LoadError(f.string() + ": unsupported frame format (PNG only)");
    v.frames.push_back(read_png_rgb(f));
  }
  if (v.frames.empty()) throw LoadError(dir.string() + ": no frames");
  return v;
}

inline std::vector<LabelMap> load_labels(const fs::path& dir) {
  std::vector<LabelMap> out;
  for (const auto& f : vos::sorted_files(dir)) out.push_back(read_png_labels(f));
  return out;
}

inline std::string dump_name(std::size_t t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05zu.bin", t);
  return buf;
}

/// Forwards that produced the grounding maps, re-run for export.
inline void export_attention(const fs::path& dir, const rollout::Video& video, const pipeline::Candidates& c,
                             const LanguageBackend& backend, const Matrix* fp, const Matrix* vp,
                             const pipeline::Options& opt) {
  for (std::size_t t : c.maps.frame_keyframes) {
    ForwardRequest fr;
    fr.prompt = c.plan.query_prompt;
    fr.frames = {&video.frames[t]};
    fr.soft_prompts = fp;
    fr.soft_position = opt.soft_position;
    dump::write_dump(dir / dump_name(t), rollout::forward_or_throw(backend, fr, long(t)));
  }
  ForwardRequest fr;
  fr.prompt = c.plan.query_prompt;
  for (std::size_t t : c.maps.video_keyframes) fr.frames.push_back(&video.frames[t]);
  fr.soft_prompts = vp;
  fr.soft_position = opt.soft_position;
  fr.token_pool = opt.rollout.video_downsample;
  dump::write_dump(dir / "video.bin", rollout::forward_or_throw(backend, fr, long(c.maps.video_keyframes.front())));
  if (!c.plan.reasoning.empty()) {
    zip::write_file(dir / "reasoning.txt",
                    prompting::render_cot_response({c.plan.reasoning, c.plan.attributes}) + "\n");
  }
}

inline ordered_json selection_manifest(const pipeline::Candidates& c, const pipeline::Selection& sel,
                                       const config::PipelineConfig& cfg) {
  ordered_json m;
  m["expression"] = c.plan.expression;
  m["generated_word"] = c.maps.generated_word;
  m["reasoning"] = c.plan.reasoning;
  m["attributes"] = c.plan.attributes;
  m["query_prompt"] = c.plan.query_prompt;
  if (!c.plan.warning.empty()) m["warning"] = c.plan.warning;
  m["frames"] = c.frames;
  m["height"] = c.height;
  m["width"] = c.width;
  m["frame_keyframes"] = c.maps.frame_keyframes;
  m["video_keyframes"] = c.maps.video_keyframes;
  m["alpha"] = sel.alpha;
  m["candidates_before_nms"] = c.built.candidates_before_nms;
  m["dropped"] = c.built.dropped;
  m["n_c"] = sel.scored.size();
  auto ts = ordered_json::array();
  for (const auto& t : sel.scored) {
    ts.push_back({{"seed_frame", t.seed.frame_index}, {"x", t.seed.x}, {"y", t.seed.y},
                  {"attention", t.seed.attention}, {"s", t.s}, {"s_frm", t.s_frm}, {"s_vid", t.s_vid},
                  {"hash", hex(tracklets::tracklet_hash(t))}});
  }
  m["tracklets"] = ts;
  m["chosen"] = sel.chosen ? ordered_json(*sel.chosen) : ordered_json(nullptr);
  m["seed"] = cfg.seed;
  m["config"] = config::to_json(cfg);
  return m;
}

inline int cmd_segment(const SegmentArgs& a, std::ostream& log = std::cerr) {
  auto cfg = config::resolve(a.config);
  if (a.alpha) cfg.selection.alpha = *a.alpha;
  cfg.selection.check();
  if (a.out.empty()) throw UsageError("--out is required");
  if (a.expression.empty()) throw UsageError("--expression is required");
  if (!fs::is_directory(a.video)) throw LoadError("video directory not found: " + a.video);
  if (a.annotations.empty()) throw UsageError("--annotations is required (the bundled segmenter reads label maps)");

  const auto video = load_frames(a.video);
  const auto labels = load_labels(a.annotations);
  if (labels.size() != video.size()) throw LoadError("annotation count does not match the frame count");
  OracleSegmenter seg(labels);

  auto opt = pipeline_options(cfg);
  std::unique_ptr<LanguageBackend> backend;
  std::optional<PromptPair> prompts;
  if (!a.dumps.empty()) {
    std::map<std::size_t, BackendForwardResult> frames;
    for (std::size_t t : rollout::keyframe_indices(video.size(), cfg.rollout.frame_keyframes)) {
      frames.emplace(t, dump::load_attention_dump(fs::path(a.dumps) / dump_name(t)));
    }
    auto vid = dump::load_attention_dump(fs::path(a.dumps) / "video.bin");
    std::string reasoning;
    if (fs::exists(fs::path(a.dumps) / "reasoning.txt")) reasoning = zip::read_file(fs::path(a.dumps) / "reasoning.txt");
    opt.use_cot = opt.use_cot && !reasoning.empty();
    backend = std::make_unique<dump::DumpBackend>(video.frames, std::move(frames), std::move(vid), reasoning);
  } else {
    backend = make_backend(cfg);
    prompts = load_prompts(a.prompts, cfg, backend->embedding_dim());
  }
  const Matrix* fp = prompts ? &prompts->frame.embeddings : nullptr;
  const Matrix* vp = prompts ? &prompts->video.embeddings : nullptr;

  const auto cand = pipeline::build_candidates(video, a.expression, *backend, seg, fp, vp, opt);
  const auto sel = pipeline::select(cand, cfg.selection.alpha, cfg.rollout, cfg.selection.binarize_threshold);
  if (!cand.plan.warning.empty()) log << "warning: " << cand.plan.warning << "\n";
  for (const auto& d : cand.built.dropped) log << "dropped candidate: " << d << "\n";

  const fs::path out(a.out);
  vos::write_mask_directory(out, sel.masks);
  if (a.export_attention) export_attention(out / "attention", video, cand, *backend, fp, vp, opt);
  zip::write_file(out / "manifest.json", selection_manifest(cand, sel, cfg).dump(2) + "\n");
  return kOk;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::optional<long long> steps;
  bool resume = false;
  bool quiet = false;
};

inline std::vector<steering::TrainSample> training_samples(const Dataset& d, const LanguageBackend& backend,
                                                           const config::PipelineConfig& cfg) {
  std::vector<steering::TrainSample> out;
  for (const auto& c : d.cases) {
    const auto plan = pipeline::plan_query(c.expression, *c.video, backend, cfg.rollout, cfg.use_cot);
    out.push_back({c.id, c.video, plan.query_prompt, c.gt});
  }
  return out;
}

inline steering::TrainState initial_state(const LanguageBackend& backend, const steering::TrainConfig& tc) {
  auto fb = prompting::init_soft_prompts(prompting::Branch::frame, prompting::kFrameSeedText, tc.n_p, backend);
  auto vb = prompting::init_soft_prompts(prompting::Branch::video, prompting::kVideoSeedText, tc.n_p, backend);
  return steering::make_train_state(std::move(fb), std::move(vb), tc);
}

inline int cmd_train(const TrainArgs& a, std::ostream& log = std::cerr) {
  auto cfg = config::resolve(a.config);
  if (a.steps) cfg.train.steps = *a.steps;
  cfg.train.seed = cfg.seed;
  cfg.train.check();
  if (a.out.empty()) throw UsageError("--out is required");
  if (a.data.empty()) throw UsageError("--data is required");
  const auto data = load_dataset(a.data, cfg.scenes);
  if (data->cases.empty()) throw LoadError("training data has no expressions");
  auto backend = make_backend(cfg);
  const auto samples = training_samples(*data, *backend, cfg);

  const fs::path out(a.out);
  auto st = initial_state(*backend, cfg.train);
  std::string previous_log;
  if (a.resume) {
    st.frame = prompting::load_bank(out / kFramePromptFile);
    st.video = prompting::load_bank(out / kVideoPromptFile);
    st.frame_opt = steering::AdamW(st.frame.embeddings.rows(), st.frame.embeddings.cols(), cfg.train);
    st.video_opt = steering::AdamW(st.video.embeddings.rows(), st.video.embeddings.cols(), cfg.train);
    try {
      steering::restore_optimizer(st, container::ArrayContainer::load(out / kOptimizerFile));
    } catch (const FormatError& e) {
      throw LoadError((out / kOptimizerFile).string() + ": " + e.what());
    }
    if (fs::exists(out / "train_log.csv")) previous_log = zip::read_file(out / "train_log.csv");
  }
  const long long start = st.frame.step;
  const auto records = steering::train_soft_prompts(samples, cfg.train, *backend, cfg.rollout, st,
                                                    [&](const steering::TrainRecord& r) {
                                                      if (!a.quiet && (r.step % 100 == 0 || r.step + 1 == cfg.train.steps)) {
                                                        log << "step " << r.step << " loss " << r.loss << " corr_frame "
                                                            << r.mean_corr_frame << "\n";
                                                      }
                                                    });
  prompting::save_bank(out / kFramePromptFile, st.frame);
  prompting::save_bank(out / kVideoPromptFile, st.video);
  steering::optimizer_to_container(st).save(out / kOptimizerFile);
  std::string csv = steering::records_csv(records);
  if (!previous_log.empty()) csv = previous_log + csv.substr(csv.find('\n') + 1);
  zip::write_file(out / "train_log.csv", csv);
  ordered_json m;
  m["data"] = a.data;
  m["samples"] = samples.size();
  m["start_step"] = start;
  m["step"] = st.frame.step;
  m["seed"] = cfg.seed;
  m["config"] = config::to_json(cfg);
  zip::write_file(out / "manifest.json", m.dump(2) + "\n");
  return kOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string config;
  std::string data;
  std::string prompts;
  std::string report;
  bool self_test = false;
  bool no_soft = false;
  std::optional<double> alpha;
};

inline int cmd_eval(const EvalArgs& a, std::ostream& = std::cerr) {
  auto cfg = config::resolve(a.config);
  if (a.alpha) cfg.selection.alpha = *a.alpha;
  cfg.selection.check();
  if (a.report.empty()) throw UsageError("--report is required");
  if (a.data.empty()) throw UsageError("--data is required");
  const auto data = load_dataset(a.data, cfg.scenes);
  eval::EvalReport report;
  if (a.self_test) {
    report = eval::self_test(data->cases, cfg.boundary_tolerance);
  } else {
    auto backend = make_backend(cfg);
    std::optional<PromptPair> prompts;
    if (!a.no_soft) prompts = load_prompts(a.prompts, cfg, backend->embedding_dim());
    eval::Prompts p;
    if (prompts) p = {&prompts->frame.embeddings, &prompts->video.embeddings};
    report = eval::evaluate(data->cases, *backend, p, {pipeline_options(cfg), cfg.boundary_tolerance});
  }
  report.config = config::to_json(cfg);
  zip::write_file(a.report, report.to_json());
  return kOk;
}

// ---- ablate ----------------------------------------------------------------

struct AblateArgs {
  std::string config;
  std::string data;
  std::string train_data;  // n_p sweep
  std::string prompts;
  std::string param;
  std::string values;      // comma separated
  std::string out;         // CSV
};

inline std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, ',');) {
    if (!p.empty()) out.push_back(p);
  }
  return out;
}

inline int cmd_ablate(const AblateArgs& a, std::ostream& log = std::cerr) {
  auto cfg = config::resolve(a.config);
  if (a.param != "alpha" && a.param != "n_p" && a.param != "components") {
    throw UsageError("unknown ablation parameter '" + a.param + "' (alpha, n_p, components)");
  }
  if (a.out.empty() || a.data.empty()) throw UsageError("--data and --out are required");
  const auto data = load_dataset(a.data, cfg.scenes);
  auto backend = make_backend(cfg);
  const eval::EvalOptions opt{pipeline_options(cfg), cfg.boundary_tolerance};
  std::vector<eval::AblationRow> rows;
  if (a.param == "alpha") {
    std::vector<double> alphas;
    for (const auto& v : split_commas(a.values.empty() ? "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1" : a.values)) {
      try {
        alphas.push_back(std::stod(v));
      } catch (const std::exception&) {
        throw UsageError("bad alpha value '" + v + "'");
      }
    }
    auto prompts = load_prompts(a.prompts, cfg, backend->embedding_dim());
    eval::Prompts p;
    if (prompts) p = {&prompts->frame.embeddings, &prompts->video.embeddings};
    rows = eval::alpha_sweep(data->cases, *backend, p, opt, alphas);
  } else if (a.param == "components") {
    auto prompts = load_prompts(a.prompts, cfg, backend->embedding_dim());
    if (!prompts) throw UsageError("components ablation needs trained prompts (--prompts)");
    rows = eval::component_grid(data->cases, *backend, {&prompts->frame.embeddings, &prompts->video.embeddings}, opt);
  } else {
    if (a.train_data.empty()) throw UsageError("n_p ablation needs --train-data");
    std::vector<std::size_t> values;
    for (const auto& v : split_commas(a.values.empty() ? "4,64" : a.values)) {
      try {
        values.push_back(std::stoul(v));
      } catch (const std::exception&) {
        throw UsageError("bad n_p value '" + v + "'");
      }
    }
    const auto train = load_dataset(a.train_data, cfg.scenes);
    const auto samples = training_samples(*train, *backend, cfg);
    rows = eval::n_p_sweep(data->cases, *backend, opt, values, [&](std::size_t n) {
      auto tc = cfg.train;
      tc.n_p = n;
      tc.seed = cfg.seed;
      auto st = initial_state(*backend, tc);
      log << "training N_p = " << n << "\n";
      steering::train_soft_prompts(samples, tc, *backend, cfg.rollout, st);
      return std::make_pair(st.frame, st.video);
    });
  }
  zip::write_file(a.out, eval::ablation_csv(rows));
  return kOk;
}

// ---- synthetic data and diagnostic samples ---------------------------------

struct SynthesizeArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  std::size_t min_instances = 0, max_instances = 0;  // 0: config value
  std::string out;
};

inline int cmd_synthesize(const SynthesizeArgs& a, std::ostream& = std::cerr) {
  auto cfg = config::resolve(a.config);
  auto spec = cfg.scenes;
  if (a.min_instances) spec.min_instances = a.min_instances;
  if (a.max_instances) spec.max_instances = a.max_instances;
  if (a.out.empty() || a.count == 0) throw UsageError("--out and a positive --count are required");
  std::vector<vos::VosVideo> videos;
  for (auto& s : scenes::generate_scenes(a.seed, a.count, spec)) videos.push_back(scene_to_video(std::move(s)));
  vos::write_vos_directory(a.out, videos);
  return kOk;
}

/// Horizontal strip of the given frames.
inline Image frame_strip(const rollout::Video& v, const std::vector<std::size_t>& frames) {
  const auto& f0 = v.frames.front();
  Image out(f0.height, f0.width * frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto& f = v.frames[frames[k]];
    for (std::size_t r = 0; r < f.height; ++r)
      for (std::size_t c = 0; c < f.width; ++c)
        for (int ch = 0; ch < 3; ++ch) out.at(r, k * f0.width + c, ch) = f.at(r, c, ch);
  }
  return out;
}

struct MakeSamplesArgs {
  std::string config;
  std::string data;
  std::string out;
};

/// Runs the reasoning round per case and writes a diagnostic samples directory.
inline int cmd_make_samples(const MakeSamplesArgs& a, std::ostream& = std::cerr) {
  auto cfg = config::resolve(a.config);
  if (a.out.empty() || a.data.empty()) throw UsageError("--data and --out are required");
  const auto data = load_dataset(a.data, cfg.scenes);
  auto backend = make_backend(cfg);
  std::vector<service::DiagnosticSample> samples;
  for (std::size_t i = 0; i < data->cases.size(); ++i) {
    const auto& c = data->cases[i];
    const auto plan = pipeline::plan_query(c.expression, *c.video, *backend, cfg.rollout, true);
    char id[32];
    std::snprintf(id, sizeof id, "sample_%04zu", i);
    const std::string media = std::string("media/") + id + ".png";
    write_png_rgb(fs::path(a.out) / media,
                  frame_strip(*c.video, rollout::keyframe_indices(c.video->size(), 4)));
    samples.push_back({id, media, c.expression, plan.reasoning, plan.attributes});
  }
  service::write_samples(a.out, samples);
  return kOk;
}

// ---- diagnose-serve ----------------------------------------------------------

struct ServeArgs {
  std::string samples_dir;
  std::string store;
  std::string ui_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
};

inline int cmd_diagnose_serve(const ServeArgs& a, std::ostream& log = std::cerr) {
  if (a.samples_dir.empty() || a.store.empty()) throw UsageError("--samples-dir and --store are required");
  service::VerdictStore store(service::load_samples(a.samples_dir), a.store);
  httplib::Server srv;
  service::install(srv, store, a.samples_dir, a.ui_dir);
  log << "serving " << store.samples().size() << " samples on http://" << a.host << ":" << a.port << "\n";
  if (!srv.listen(a.host, a.port)) throw LoadError("cannot listen on " + a.host + ":" + std::to_string(a.port));
  return kOk;
}

}  // namespace steerseg::cli

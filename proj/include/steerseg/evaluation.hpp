#pragma once

// Suite evaluation (J / F / J&F and attention-mask correlation) and the
// alpha / N_p / component ablations.

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "steerseg/container.hpp"
#include "steerseg/metrics.hpp"
#include "steerseg/oracle_segmenter.hpp"
#include "steerseg/pipeline.hpp"
#include "steerseg/steering.hpp"

namespace steerseg::eval {

using numerics::DenseGrid;

struct CorrelationPair {
  double frame = 0, video = 0;
};

/// Pearson between stacked attention and the stacked GT of the same frames,
/// pooled to each modality's grid.
inline CorrelationPair correlation_metric(const rollout::GroundingMaps& maps, const std::vector<DenseGrid>& gt) {
  auto stacked = [&](const std::vector<std::size_t>& frames, const DenseGrid& att) {
    std::vector<DenseGrid> slices;
    for (std::size_t t : frames) {
      require(t < gt.size(), "correlation_metric: no ground truth for frame " + std::to_string(t));
      const std::size_t f = steering::grid_factor(gt[t].extent(0), att.extent(1));
      require(steering::grid_factor(gt[t].extent(1), att.extent(2)) == f, "correlation_metric: non-uniform factor");
      slices.push_back(numerics::area_downsample(gt[t], f));
    }
    return DenseGrid::stack(slices);
  };
  return {numerics::pearson_corr(maps.frame_maps, stacked(maps.frame_keyframes, maps.frame_maps)),
          numerics::pearson_corr(maps.video_map, stacked(maps.video_keyframes, maps.video_map))};
}

/// One evaluation item: a video, the referred object's expression, its GT
/// and the label maps that drive the oracle segmenter.
struct EvalCase {
  std::string id;
  const rollout::Video* video = nullptr;
  std::string expression;
  std::vector<DenseGrid> gt;
  const std::vector<LabelMap>* labels = nullptr;
};

struct EvalItem {
  std::string id;
  std::string expression;
  metrics::VideoScore score;
  CorrelationPair corr;
  std::size_t candidates = 0;
  long chosen = -1;
  double chosen_j = 0;     // frame-mean J of the chosen tracklet
  double best_j = 0;       // best frame-mean J among all tracklets
  bool correct = false;    // chosen tracklet attains best_j (and best_j > 0)
};

struct EvalReport {
  std::vector<EvalItem> items;
  double j = 0, f = 0, jf = 0;
  double mean_corr_frame = 0, mean_corr_video = 0;
  double selection_accuracy = 0;
  nlohmann::ordered_json config;

  void aggregate() {
    j = f = jf = mean_corr_frame = mean_corr_video = selection_accuracy = 0;
    if (items.empty()) return;
    for (const auto& i : items) {
      j += i.score.j;
      f += i.score.f;
      mean_corr_frame += i.corr.frame;
      mean_corr_video += i.corr.video;
      selection_accuracy += i.correct ? 1.0 : 0.0;
    }
    const double n = double(items.size());
    j /= n;
    f /= n;
    jf = (j + f) / 2.0;
    mean_corr_frame /= n;
    mean_corr_video /= n;
    selection_accuracy /= n;
  }

  std::string to_json() const {
    nlohmann::ordered_json out;
    out["config"] = config;
    out["summary"] = {{"videos", items.size()}, {"J", j}, {"F", f}, {"JF", jf},
                      {"mean_corr_frame", mean_corr_frame}, {"mean_corr_video", mean_corr_video},
                      {"selection_accuracy", selection_accuracy}};
    auto arr = nlohmann::ordered_json::array();
    for (const auto& i : items) {
      arr.push_back({{"id", i.id}, {"expression", i.expression}, {"J", i.score.j}, {"F", i.score.f},
                     {"JF", i.score.jf}, {"corr_frame", i.corr.frame}, {"corr_video", i.corr.video},
                     {"candidates", i.candidates}, {"chosen", i.chosen}, {"correct", i.correct}});
    }
    out["videos"] = arr;
    return out.dump(2) + "\n";
  }
};

inline double mean_j(const std::vector<DenseGrid>& masks, const std::vector<DenseGrid>& gt, double thr) {
  double s = 0;
  for (std::size_t t = 0; t < gt.size(); ++t) s += metrics::j_metric(numerics::binarize(masks[t], thr), gt[t]);
  return s / double(gt.size());
}

/// Scores one selection against the case's ground truth.
inline EvalItem score_selection(const EvalCase& c, const pipeline::Candidates& cand, const pipeline::Selection& sel,
                                double threshold, int tolerance) {
  EvalItem item;
  item.id = c.id;
  item.expression = c.expression;
  item.score = metrics::score_video(sel.masks.binary, c.gt, tolerance);
  item.corr = correlation_metric(cand.maps, c.gt);
  item.candidates = sel.scored.size();
  if (sel.chosen) {
    item.chosen = long(*sel.chosen);
    for (std::size_t i = 0; i < sel.scored.size(); ++i) {
      const double j = mean_j(sel.scored[i].masks, c.gt, threshold);
      item.best_j = std::max(item.best_j, j);
      if (i == *sel.chosen) item.chosen_j = j;
    }
    item.correct = item.best_j > 0 && item.chosen_j >= item.best_j;
  }
  return item;
}

struct Prompts {
  const Matrix* frame = nullptr;
  const Matrix* video = nullptr;
};

struct EvalOptions {
  pipeline::Options pipeline;
  int boundary_tolerance = -1;
};

inline pipeline::Candidates candidates_for(const EvalCase& c, const LanguageBackend& backend, Prompts p,
                                           const pipeline::Options& opt) {
  require(c.video && c.labels, "evaluate: case " + c.id + " lacks video or labels");
  OracleSegmenter seg(*c.labels);
  return pipeline::build_candidates(*c.video, c.expression, backend, seg, p.frame, p.video, opt);
}

inline EvalReport evaluate(const std::vector<EvalCase>& cases, const LanguageBackend& backend, Prompts p,
                           const EvalOptions& opt) {
  EvalReport r;
  for (const auto& c : cases) {
    const auto cand = candidates_for(c, backend, p, opt.pipeline);
    const auto sel = pipeline::select(cand, opt.pipeline.selection.alpha, opt.pipeline.rollout,
                                      opt.pipeline.selection.binarize_threshold);
    r.items.push_back(score_selection(c, cand, sel, opt.pipeline.selection.binarize_threshold, opt.boundary_tolerance));
  }
  r.aggregate();
  return r;
}

/// GT used as the prediction: J = F = J&F = 1 by construction.
inline EvalReport self_test(const std::vector<EvalCase>& cases, int tolerance = -1) {
  EvalReport r;
  for (const auto& c : cases) {
    EvalItem item;
    item.id = c.id;
    item.expression = c.expression;
    item.score = metrics::score_video(c.gt, c.gt, tolerance);
    item.corr = {1.0, 1.0};
    item.correct = true;
    r.items.push_back(item);
  }
  r.aggregate();
  return r;
}

struct AblationRow {
  std::string param;
  std::string value;
  double j = 0, f = 0, jf = 0;
  double mean_corr_frame = 0, mean_corr_video = 0;
  double selection_accuracy = 0;
  std::vector<std::uint64_t> tracklet_hashes;  // alpha sweep: per case, all tracklets folded
};

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  using container::Manifest;
  std::string out = "param,value,J,F,JF,mean_corr_frame,mean_corr_video,selection_accuracy\n";
  for (const auto& r : rows) {
    out += r.param + "," + r.value + "," + Manifest::format_double(r.j) + "," + Manifest::format_double(r.f) +
           "," + Manifest::format_double(r.jf) + "," + Manifest::format_double(r.mean_corr_frame) + "," +
           Manifest::format_double(r.mean_corr_video) + "," + Manifest::format_double(r.selection_accuracy) + "\n";
  }
  return out;
}

inline AblationRow row_from(const std::string& param, const std::string& value, const EvalReport& r) {
  return {param, value, r.j, r.f, r.jf, r.mean_corr_frame, r.mean_corr_video, r.selection_accuracy, {}};
}

inline std::uint64_t fold_hashes(const std::vector<tracklets::Tracklet>& ts) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& t : ts) h = (h ^ tracklets::tracklet_hash(t)) * 1099511628211ull;
  return h;
}

/// Alpha sweep: candidates are built once per case and only rescored.
inline std::vector<AblationRow> alpha_sweep(const std::vector<EvalCase>& cases, const LanguageBackend& backend,
                                            Prompts p, const EvalOptions& opt, const std::vector<double>& alphas) {
  std::vector<pipeline::Candidates> cands;
  for (const auto& c : cases) cands.push_back(candidates_for(c, backend, p, opt.pipeline));
  std::vector<AblationRow> rows;
  for (double a : alphas) {
    EvalReport r;
    std::vector<std::uint64_t> hashes;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto sel = pipeline::select(cands[i], a, opt.pipeline.rollout, opt.pipeline.selection.binarize_threshold);
      r.items.push_back(score_selection(cases[i], cands[i], sel, opt.pipeline.selection.binarize_threshold,
                                        opt.boundary_tolerance));
      hashes.push_back(fold_hashes(sel.scored));
    }
    r.aggregate();
    auto row = row_from("alpha", container::Manifest::format_double(a), r);
    row.tracklet_hashes = std::move(hashes);
    rows.push_back(std::move(row));
  }
  return rows;
}

/// The four (soft prompts, reasoning round) combinations.
inline std::vector<AblationRow> component_grid(const std::vector<EvalCase>& cases, const LanguageBackend& backend,
                                               Prompts trained, const EvalOptions& opt) {
  std::vector<AblationRow> rows;
  for (bool soft : {false, true}) {
    for (bool cot : {false, true}) {
      EvalOptions o = opt;
      o.pipeline.use_cot = cot;
      const auto r = evaluate(cases, backend, soft ? trained : Prompts{}, o);
      rows.push_back(row_from("components", std::string(soft ? "soft" : "nosoft") + "+" + (cot ? "cot" : "nocot"), r));
    }
  }
  return rows;
}

using TrainFn = std::function<std::pair<prompting::SoftPromptBank, prompting::SoftPromptBank>(std::size_t n_p)>;

/// Retrains per N_p value through `train`, then evaluates.
inline std::vector<AblationRow> n_p_sweep(const std::vector<EvalCase>& cases, const LanguageBackend& backend,
                                          const EvalOptions& opt, const std::vector<std::size_t>& values,
                                          const TrainFn& train) {
  std::vector<AblationRow> rows;
  for (std::size_t n : values) {
    const auto [fb, vb] = train(n);
    const auto r = evaluate(cases, backend, {&fb.embeddings, &vb.embeddings}, opt);
    rows.push_back(row_from("n_p", std::to_string(n), r));
  }
  return rows;
}

}  // namespace steerseg::eval

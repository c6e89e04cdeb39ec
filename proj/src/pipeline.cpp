#include "crossview/pipeline.hpp"

#include <spdlog/spdlog.h>

namespace crossview {

PipelineResult run_pipeline(const SceneConfig& cfg, const FeatureVolume& ground_volume,
                            const Tensor& conf_logits, const BevFeatureMap& aerial,
                            const PipelineOptions& opts) {
  PipelineResult r;
  const auto conf = normalize_confidence(conf_logits);
  r.surface = surface_from_accumulation(conf, cfg.layers, opts.surface_threshold);
  r.ground_bev = fuse_height_features(ground_volume, conf, r.surface, opts.fusion);
  r.s_orig = initial_similarity(r.ground_bev, aerial, opts.tau);

  const int cells = cfg.grid.num_cells();
  SimilarityMatrix refined = r.s_orig;
  RefinerParams fallback;
  const RefinerParams* params = opts.refiner;
  if (params) {
    refined = refine(r.s_orig, *params);
  } else {
    fallback = RefinerParams::passthrough(cells);
    params = &fallback;
  }
  const auto probs = normalize_doubly_stochastic(dustbin_extend(refined, *params));
  r.matches = extract_matches(probs, opts.top_k, opts.mutual_first);
  spdlog::debug("extracted {} matches, best weight {:.4f}", r.matches.size(),
                r.matches.empty() ? 0.0 : r.matches.front().weight);

  const auto corr = matches_to_correspondences(r.matches, cfg);
  PoseSolution sol = opts.known_yaw_rad ? solve_translation_only(corr, *opts.known_yaw_rad)
                                        : solve_weighted_procrustes(corr);
  r.pose = metric_solution_to_pixels(sol.pose, cfg.aerial);
  r.degenerate = sol.degenerate;
  return r;
}

}  // namespace crossview

#pragma once

#include <optional>
#include <vector>

#include "crossview/bev_geometry.hpp"
#include "crossview/pose_solver.hpp"
#include "crossview/sim_refiner.hpp"
#include "crossview/surface_model.hpp"

namespace crossview {

struct PipelineOptions {
  double surface_threshold = 0.5;
  int top_k = 30;
  double tau = 0.1;
  bool mutual_first = true;
  // Known-orientation setting: solve translation only with this yaw.
  std::optional<double> known_yaw_rad;
  FusionOptions fusion;
  // Without parameters the refinement stage is skipped and the dustbin scores are zero.
  const RefinerParams* refiner = nullptr;
};

struct PipelineResult {
  Pose3DoF pose;  // aerial pixels
  bool degenerate = false;
  SurfaceMap surface;
  BevFeatureMap ground_bev;
  SimilarityMatrix s_orig;
  std::vector<PatchMatch> matches;
};

/// surface model -> similarity -> refine -> dustbin normalisation -> matches
/// -> weighted Procrustes.
PipelineResult run_pipeline(const SceneConfig& cfg, const FeatureVolume& ground_volume,
                            const Tensor& conf_logits, const BevFeatureMap& aerial,
                            const PipelineOptions& opts = {});

}  // namespace crossview

#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossview/bev_geometry.hpp"
#include "crossview/sim_refiner.hpp"
#include "crossview/surface_model.hpp"

namespace crossview {

struct LossConfig {
  double beta1 = 1.0;
  double beta2 = 1.0;
  int n_v = 100;         // virtual points for the pose loss
  double l_v_m = 5.0;    // side of the square they are drawn from
  int n_s = 1024;        // sampled patch pairs for matching / height losses
  double k_norm = 100.0;
  std::uint64_t rng_seed = 0;
  // Height differences in metres instead of layer-index units.
  bool height_in_meters = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);

/// Seeded uniform points over the l_v x l_v square centred on the camera.
std::vector<Vec2> sample_virtual_points(const LossConfig& cfg);

/// Mean distance between virtual points mapped by the predicted and the true
/// pose, in metres (translations are converted with the aerial GSD).
double vce_loss(const Pose3DoF& pred, const Pose3DoF& gt, const AerialMeta& meta,
                const LossConfig& cfg);

struct PatchPair {
  int ground = 0;  // flattened ground cell
  int aerial = 0;  // flattened aerial cell
};

/// Ground patches whose ground-truth projection lands on the aerial grid,
/// subsampled without replacement to at most n_s pairs. Throws
/// std::domain_error when the grids do not overlap under `gt`.
std::vector<PatchPair> sample_patch_pairs(const SceneConfig& scene, const Pose3DoF& gt,
                                          const LossConfig& cfg);

/// Average of the ground->aerial (row) and aerial->ground (column) InfoNCE terms.
double matching_loss(const SimilarityMatrix& s_orig, const std::vector<PatchPair>& pairs);
double matching_loss(const SimilarityMatrix& s_orig, const Pose3DoF& gt, const SceneConfig& scene,
                     const LossConfig& cfg);

/// Mean L1 surface disagreement over corresponding patches, divided by k_norm.
double height_loss(const SurfaceMap& surf_grd, const SurfaceMap& surf_sat,
                   const std::vector<PatchPair>& pairs, const HeightLayerSpec& layers,
                   const LossConfig& cfg);
double height_loss(const SurfaceMap& surf_grd, const SurfaceMap& surf_sat, const Pose3DoF& gt,
                   const SceneConfig& scene, const LossConfig& cfg);

double total_loss(double vce, double matching, double height, const LossConfig& cfg);

struct LossReport {
  double vce = 0.0;
  double matching = 0.0;
  double height = 0.0;
  double total = 0.0;
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const LossReport& r);

}  // namespace crossview

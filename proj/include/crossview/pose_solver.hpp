#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "crossview/bev_geometry.hpp"
#include "crossview/sim_refiner.hpp"

namespace crossview {

struct Correspondence {
  Vec2 ground;  // camera BEV frame
  Vec2 aerial;  // aerial frame, any consistent planar units
  double weight = 1.0;
};

using CorrespondenceSet = std::vector<Correspondence>;

/// Rigid planar transform mapping ground points into the aerial frame:
/// aerial = R(yaw) * ground + t. The translation uses the aerial units.
struct PoseSolution {
  Pose3DoF pose;
  bool degenerate = false;
};

/// Closed-form minimiser of sum_i w_i |R g_i + t - a_i|^2 over proper rotations.
/// Falls back to a translation-only estimate with yaw 0 and sets `degenerate`
/// when the weighted cross-covariance vanishes.
PoseSolution solve_weighted_procrustes(const CorrespondenceSet& c);

/// Weighted mean of a_i - R(yaw_fixed) g_i.
PoseSolution solve_translation_only(const CorrespondenceSet& c, double yaw_fixed);

struct PoseError {
  double translation_m = 0.0;
  double orientation_deg = 0.0;
};

PoseError pose_error(const Pose3DoF& pred, const Pose3DoF& gt, const AerialMeta& meta);

/// Patch matches to metric correspondences: ground cells in the camera BEV
/// frame, aerial cells in aerial metres (pixel * gsd).
CorrespondenceSet matches_to_correspondences(const std::vector<PatchMatch>& matches,
                                             const SceneConfig& cfg);

/// Converts a solution whose translation is in aerial metres to aerial pixels.
Pose3DoF metric_solution_to_pixels(const Pose3DoF& metric, const AerialMeta& meta);

/// Reads "gx,gy,ax,ay,w" rows (an optional header line is skipped).
CorrespondenceSet read_correspondences_csv(const std::filesystem::path& path);
void write_correspondences_csv(const std::filesystem::path& path, const CorrespondenceSet& c);

}  // namespace crossview

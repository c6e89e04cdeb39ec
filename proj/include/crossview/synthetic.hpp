#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "crossview/bev_geometry.hpp"
#include "crossview/surface_model.hpp"
#include "crossview/tensor.hpp"

namespace crossview {

struct SyntheticOptions {
  int channels = 32;
  // Poses on the aerial grid lattice: translation a multiple of the cell
  // spacing, yaw a multiple of 90 deg.
  bool grid_snapped = true;
  int max_offset_cells = 8;
  double peak_logit = 20.0;
  double ground_anchor_m = -3.0;
};

/// A synthetic world with known geometry, appearance and pose.
struct SyntheticScene {
  SceneConfig config;
  Tensor height_field_m;   // N x N, ground level is ground_anchor_m
  Tensor feature_texture;  // N x N x c, unit-norm rows
  Pose3DoF gt_pose;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  SyntheticOptions options;
};

SyntheticScene generate_scene(const SceneConfig& config, std::uint64_t seed, double noise_sigma,
                              const SyntheticOptions& options = {});

/// Pipeline inputs rendered from a scene.
struct RenderedInputs {
  FeatureVolume ground_volume;  // M x N x N x c
  Tensor conf_logits;           // M x N x N
  BevFeatureMap aerial;         // aerial BEV features around the image centre
  SurfaceMap gt_surface;        // ground-grid surface indices
  Tensor depth_sat;             // N x N aerial relative depth (metres of height)
  double depth_scale = 1.0;     // metres per depth unit
  Tensor depth_grd;             // H x W panorama range, 0 where the ray sees sky
};

RenderedInputs render_inputs(const SyntheticScene& scene);

/// Writes every scene tensor plus config.json and manifest.json into `dir`.
void export_scene(const std::filesystem::path& dir, const SyntheticScene& scene,
                  const RenderedInputs& inputs);

/// Scene directory contents needed by the pipeline and the loss/eval commands.
struct SceneBundle {
  SceneConfig config;
  Pose3DoF gt_pose;
  std::uint64_t seed = 0;
  double depth_scale = 1.0;
  double ground_anchor_m = -3.0;
  FeatureVolume ground_volume;
  Tensor conf_logits;
  BevFeatureMap aerial;
  Tensor depth_sat;
};

SceneBundle load_scene(const std::filesystem::path& dir);

}  // namespace crossview

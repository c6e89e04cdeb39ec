#pragma once

#include <optional>
#include <vector>

#include "crossview/bev_geometry.hpp"
#include "crossview/matrix.hpp"
#include "crossview/tensor.hpp"

namespace crossview {

/// Ground-view volumetric BEV features, dims M x N x N x C.
struct FeatureVolume {
  Tensor data;
  HeightLayerSpec layers;
  BevGridSpec grid;

  int channels() const { return static_cast<int>(data.dim(3)); }
  void validate() const;
};

/// Per-voxel surface confidence, normalised along height. Stored [k][ix][iy].
struct ConfidenceVolume {
  int num_layers = 0;
  int n = 0;
  std::vector<double> conf;

  double at(int layer, int cell) const {
    return conf[static_cast<std::size_t>(layer) * n * n + cell];
  }
};

/// Chosen height layer per BEV cell (flattened ix * N + iy).
struct SurfaceMap {
  int n = 0;
  std::vector<int> index;
  std::vector<double> height_m;
  // Set when the map was produced by a fallback path (e.g. a flat depth map).
  bool degenerate = false;
};

/// Per-view 2D BEV features: one row per cell (flattened ix * N + iy).
struct BevFeatureMap {
  BevGridSpec grid;
  RowMatrix data;

  int channels() const { return static_cast<int>(data.cols()); }
};

/// Affine C -> c map applied after height fusion.
struct ProjectionHead {
  RowMatrix weight;  // c x C
  Vector bias;       // c

  static ProjectionHead from_tensors(const Tensor& weight, const Tensor& bias);
};

struct FusionOptions {
  // Layers on each side of the surface index that take part in the fusion.
  // Anything >= M covers the whole column.
  int window = 1 << 20;
  // Requested output width; 0 keeps the input width.
  int out_channels = 0;
  std::optional<ProjectionHead> head;
};

/// Softmax of raw logits (dims M x N x N) along the height axis.
ConfidenceVolume normalize_confidence(const Tensor& raw_logits);

/// Per cell, the first layer whose bottom-up cumulative confidence strictly
/// exceeds `threshold`; M - 1 if it never does.
SurfaceMap surface_from_accumulation(const ConfidenceVolume& conf, const HeightLayerSpec& layers,
                                     double threshold = 0.5);

/// Confidence-weighted fusion over a window around the surface, followed by
/// the projection head.
BevFeatureMap fuse_height_features(const FeatureVolume& vol, const ConfidenceVolume& conf,
                                   const SurfaceMap& surf, const FusionOptions& opts = {});

/// Nearest layer index to a height in metres; ties go to the lower layer.
int nearest_layer_index(const HeightLayerSpec& layers, double height_m);

struct DepthAnchorOptions {
  double ground_anchor_m = -3.0;
  // Metres per depth unit. Unset: the depth map's maximum maps to the top layer.
  std::optional<double> scale;
};

/// Pseudo-height supervision from an aerial relative depth map (dims N x N).
/// The minimum is pinned to the ground anchor; a flat map yields an all-ground
/// surface with `degenerate` set.
SurfaceMap aerial_depth_to_height_index(const Tensor& depth, const HeightLayerSpec& layers,
                                        const DepthAnchorOptions& opts = {});

Tensor surface_to_tensor(const SurfaceMap& surf);

}  // namespace crossview

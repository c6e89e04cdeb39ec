#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossview/bev_geometry.hpp"
#include "crossview/pose_solver.hpp"
#include "crossview/tensor.hpp"

namespace crossview {

enum class RangeMode {
  kRay,     // 3D distance along the viewing ray
  kPlanar,  // horizontal distance from the camera
};

struct GtProjectionOptions {
  double max_range_m = 30.0;
  RangeMode range_mode = RangeMode::kRay;
};

/// Ground-truth aerial pixel for every panorama pixel, plus its validity.
struct GroundTruthProjection {
  int width = 0;
  int height = 0;
  std::vector<Vec2> aerial_px;  // row-major, v * width + u
  std::vector<std::uint8_t> valid;

  bool is_valid(int u, int v) const {
    return u >= 0 && v >= 0 && u < width && v < height && valid[v * width + u];
  }
  const Vec2& at(int u, int v) const { return aerial_px[v * width + u]; }

  /// H x W x 3 tensor of (x_sat, y_sat, valid).
  Tensor to_tensor() const;
  static GroundTruthProjection from_tensor(const Tensor& t);
};

/// Back-projects every panorama pixel with its depth (metres along the ray),
/// maps it through `gt` and keeps it when within range and inside the image.
/// Non-finite or non-positive depths are treated as missing.
GroundTruthProjection build_gt_projection(const Tensor& depth_grd, const CameraIntrinsics& intr,
                                          const Pose3DoF& gt, const AerialMeta& meta,
                                          const GtProjectionOptions& opts = {});

struct PixelMatch {
  Vec2 ground_px;
  Vec2 aerial_px;
};
using MatchPrediction = std::vector<PixelMatch>;

struct MatchingReport {
  int n_mch = 0;
  int n_valid = 0;
  std::vector<double> thresholds_px;
  std::vector<int> correct;
  std::vector<double> ratios;
  double valid_ratio = 0.0;
};

/// Fraction of the predicted pairs whose aerial pixel lies within each
/// threshold (Euclidean) of the ground-truth projection. Pairs whose ground
/// pixel is outside the valid region count in the denominator only.
MatchingReport matching_success_ratio(const MatchPrediction& pred, const GroundTruthProjection& gt,
                                      const std::vector<double>& thresholds_px = {5, 10, 15});

struct LocalizationStats {
  int count = 0;
  double mean_translation_m = 0.0;
  double median_translation_m = 0.0;
  double mean_orientation_deg = 0.0;
  double median_orientation_deg = 0.0;
};

/// Mean and median of the errors; even counts use the lower-middle element.
LocalizationStats localization_stats(const std::vector<PoseError>& errors);

/// Reads "xg,yg,xs,ys" rows.
MatchPrediction read_match_prediction_csv(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const MatchingReport& r);
void to_json(nlohmann::json& j, const LocalizationStats& s);
std::string matching_report_csv(const MatchingReport& r);
std::string localization_stats_csv(const LocalizationStats& s);

}  // namespace crossview

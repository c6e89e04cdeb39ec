#pragma once

#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

// Frames used throughout the library:
//  * Camera BEV frame: metric (x, y) centred on the ground camera, x forward
//    (north when yaw = 0), y to the right. z is height above ground level.
//  * Aerial pixel frame: (x_sat, y_sat) pixel coordinates sharing the camera
//    BEV frame's axis orientation at yaw = 0, so x_sat points north.
//  * BEV cells are addressed by (ix, iy) and flattened as ix * N + iy.

namespace crossview {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;

/// Wraps an angle to (-pi, pi].
double wrap_angle(double rad);

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Counterclockwise rotation of the plane by `yaw_rad`.
Mat2 rotation(double yaw_rad);

struct BevGridSpec {
  int n_points_per_side = 41;
  double extent_m = 71.0;

  double spacing_m() const { return extent_m / (n_points_per_side - 1); }
  int center_index() const { return (n_points_per_side - 1) / 2; }
  int num_cells() const { return n_points_per_side * n_points_per_side; }
  int flat(int ix, int iy) const { return ix * n_points_per_side + iy; }
  bool contains(int ix, int iy) const {
    return ix >= 0 && iy >= 0 && ix < n_points_per_side && iy < n_points_per_side;
  }
  void validate() const;
};

struct HeightLayerSpec {
  int num_layers = 11;
  double z_min_m = -10.0;
  double z_max_m = 10.0;

  double spacing_m() const { return (z_max_m - z_min_m) / (num_layers - 1); }
  double layer_height(int i) const { return z_min_m + i * spacing_m(); }
  void validate() const;
};

struct CameraIntrinsics {
  int panorama_width = 1024;
  int panorama_height = 512;
  double camera_height_m = 2.5;
  // Azimuth that lands at the horizontal image centre. The default puts the
  // camera's forward axis at u = W/2 and azimuth -pi at u = 0.
  double azimuth_offset_rad = 0.0;

  void validate() const;
};

struct AerialMeta {
  double gsd_m_per_px = 0.12;
  int image_size_px = 640;

  /// Pixel the aerial BEV grid is centred on.
  Vec2 center_px() const { return Vec2(image_size_px / 2.0, image_size_px / 2.0); }
  bool contains(const Vec2& px) const {
    return px.x() >= 0 && px.y() >= 0 && px.x() < image_size_px && px.y() < image_size_px;
  }
  void validate() const;
};

/// Planar camera pose: position of the camera in aerial pixels and its yaw.
struct Pose3DoF {
  Vec2 t_px = Vec2::Zero();
  double yaw_rad = 0.0;

  Pose3DoF() = default;
  Pose3DoF(Vec2 t, double yaw) : t_px(std::move(t)), yaw_rad(wrap_angle(yaw)) {}
};

/// All geometric configuration shared by the pipeline stages.
struct SceneConfig {
  BevGridSpec grid;
  HeightLayerSpec layers;
  CameraIntrinsics camera;
  AerialMeta aerial;

  void validate() const;
};

void to_json(nlohmann::json& j, const SceneConfig& c);
void from_json(const nlohmann::json& j, SceneConfig& c);
void to_json(nlohmann::json& j, const Pose3DoF& p);
void from_json(const nlohmann::json& j, Pose3DoF& p);

/// Camera-relative planar position of a BEV grid point.
Vec2 bev_cell_to_metric(const BevGridSpec& spec, int ix, int iy);

struct CellIndex {
  int ix = 0;
  int iy = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Nearest grid point to a camera-relative position, or nullopt outside the grid.
std::optional<CellIndex> metric_to_nearest_cell(const BevGridSpec& spec, const Vec2& xy_m);

/// Equirectangular projection of a camera-relative 3D point (z above ground).
/// Returns nullopt when the row falls outside [0, H); throws std::domain_error
/// for the optical centre itself.
std::optional<Vec2> project_point_to_panorama(const CameraIntrinsics& intr, double x_m, double y_m,
                                              double z_m);

/// Unit ray direction (camera frame, z up) through panorama pixel (u, v).
Vec3 panorama_ray(const CameraIntrinsics& intr, double u_px, double v_px);

Vec2 metric_to_aerial_px(const AerialMeta& meta, const Pose3DoF& pose, const Vec2& xy_m);
Vec2 aerial_px_to_metric(const AerialMeta& meta, const Pose3DoF& pose, const Vec2& px);

struct AerialSampleGrid {
  int n = 0;
  std::vector<Vec2> px;      // flattened ix * n + iy
  std::vector<bool> inside;  // per-cell in-image flag
};

/// Pixel positions of the north-up aerial BEV grid centred on `center_px`.
AerialSampleGrid aerial_bev_sample_coords(const BevGridSpec& spec, const AerialMeta& meta,
                                          const Vec2& center_px);

/// Pixel position of aerial BEV cell (ix, iy) for a grid centred on meta.center_px().
Vec2 aerial_cell_px(const BevGridSpec& spec, const AerialMeta& meta, int ix, int iy);

/// Ground BEV cell -> aerial BEV cell under `pose`, nearest-cell rounding.
std::optional<CellIndex> ground_to_aerial_cell(const SceneConfig& cfg, const Pose3DoF& pose,
                                               CellIndex ground);
/// Aerial BEV cell -> ground BEV cell under `pose`, nearest-cell rounding.
std::optional<CellIndex> aerial_to_ground_cell(const SceneConfig& cfg, const Pose3DoF& pose,
                                               CellIndex aerial);

}  // namespace crossview

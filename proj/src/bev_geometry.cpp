#include "crossview/bev_geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace crossview {

using std::numbers::pi;

double wrap_angle(double rad) {
  double r = std::remainder(rad, 2.0 * pi);  // [-pi, pi]
  if (r <= -pi) r += 2.0 * pi;
  return r;
}

Mat2 rotation(double yaw_rad) {
  const double c = std::cos(yaw_rad);
  const double s = std::sin(yaw_rad);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

void BevGridSpec::validate() const {
  if (n_points_per_side < 2 || n_points_per_side % 2 == 0) {
    throw std::invalid_argument("BEV grid needs an odd point count >= 3, got " +
                                std::to_string(n_points_per_side));
  }
  if (!(extent_m > 0.0)) throw std::invalid_argument("BEV grid extent must be positive");
}

void HeightLayerSpec::validate() const {
  if (num_layers < 2) throw std::invalid_argument("need at least two height layers");
  if (!(z_min_m < z_max_m)) throw std::invalid_argument("height range must satisfy z_min < z_max");
}

void CameraIntrinsics::validate() const {
  if (panorama_height <= 0 || panorama_width != 2 * panorama_height) {
    throw std::invalid_argument("equirectangular panorama must be 2H x H, got " +
                                std::to_string(panorama_width) + "x" +
                                std::to_string(panorama_height));
  }
  if (camera_height_m < 2.0 || camera_height_m > 3.0) {
    throw std::invalid_argument("camera height outside the 2-3 m prior");
  }
}

void AerialMeta::validate() const {
  if (!(gsd_m_per_px > 0.0)) throw std::invalid_argument("GSD must be positive");
  if (image_size_px <= 0) throw std::invalid_argument("aerial image size must be positive");
}

void SceneConfig::validate() const {
  grid.validate();
  layers.validate();
  camera.validate();
  aerial.validate();
}

void to_json(nlohmann::json& j, const SceneConfig& c) {
  j = nlohmann::json{{"n", c.grid.n_points_per_side},
                     {"extent_m", c.grid.extent_m},
                     {"m_layers", c.layers.num_layers},
                     {"z_min", c.layers.z_min_m},
                     {"z_max", c.layers.z_max_m},
                     {"gsd", c.aerial.gsd_m_per_px},
                     {"aerial_size", c.aerial.image_size_px},
                     {"pano_w", c.camera.panorama_width},
                     {"pano_h", c.camera.panorama_height},
                     {"camera_height", c.camera.camera_height_m},
                     {"pano_azimuth_offset", c.camera.azimuth_offset_rad}};
}

void from_json(const nlohmann::json& j, SceneConfig& c) {
  SceneConfig d;
  c.grid.n_points_per_side = j.value("n", d.grid.n_points_per_side);
  c.grid.extent_m = j.value("extent_m", d.grid.extent_m);
  c.layers.num_layers = j.value("m_layers", d.layers.num_layers);
  c.layers.z_min_m = j.value("z_min", d.layers.z_min_m);
  c.layers.z_max_m = j.value("z_max", d.layers.z_max_m);
  c.aerial.gsd_m_per_px = j.value("gsd", d.aerial.gsd_m_per_px);
  c.aerial.image_size_px = j.value("aerial_size", d.aerial.image_size_px);
  c.camera.panorama_width = j.value("pano_w", d.camera.panorama_width);
  c.camera.panorama_height = j.value("pano_h", d.camera.panorama_height);
  c.camera.camera_height_m = j.value("camera_height", d.camera.camera_height_m);
  c.camera.azimuth_offset_rad = j.value("pano_azimuth_offset", d.camera.azimuth_offset_rad);
  c.validate();
}

void to_json(nlohmann::json& j, const Pose3DoF& p) {
  j = nlohmann::json{{"tx_px", p.t_px.x()}, {"ty_px", p.t_px.y()}, {"yaw_rad", p.yaw_rad}};
}

void from_json(const nlohmann::json& j, Pose3DoF& p) {
  double yaw = j.contains("yaw_rad") ? j.at("yaw_rad").get<double>()
                                     : deg_to_rad(j.at("yaw_deg").get<double>());
  p = Pose3DoF(Vec2(j.at("tx_px").get<double>(), j.at("ty_px").get<double>()), yaw);
}

Vec2 bev_cell_to_metric(const BevGridSpec& spec, int ix, int iy) {
  if (!spec.contains(ix, iy)) {
    throw std::out_of_range("BEV cell (" + std::to_string(ix) + ", " + std::to_string(iy) +
                            ") outside " + std::to_string(spec.n_points_per_side) + "-point grid");
  }
  const int c = spec.center_index();
  const double s = spec.spacing_m();
  return Vec2((ix - c) * s, (iy - c) * s);
}

std::optional<CellIndex> metric_to_nearest_cell(const BevGridSpec& spec, const Vec2& xy_m) {
  const double s = spec.spacing_m();
  const double fx = std::round(xy_m.x() / s);
  const double fy = std::round(xy_m.y() / s);
  if (!std::isfinite(fx) || !std::isfinite(fy)) return std::nullopt;
  const int c = spec.center_index();
  if (std::abs(fx) > c || std::abs(fy) > c) return std::nullopt;
  return CellIndex{static_cast<int>(fx) + c, static_cast<int>(fy) + c};
}

std::optional<Vec2> project_point_to_panorama(const CameraIntrinsics& intr, double x_m,
                                              double y_m, double z_m) {
  const double planar = std::hypot(x_m, y_m);
  const double dz = z_m - intr.camera_height_m;
  if (planar == 0.0 && dz == 0.0) {
    throw std::domain_error("point coincides with the optical centre");
  }
  const double w = intr.panorama_width;
  const double h = intr.panorama_height;
  const double azimuth = std::atan2(y_m, x_m) - intr.azimuth_offset_rad;
  const double elevation = std::atan2(dz, planar);
  double u = std::fmod((azimuth / (2.0 * pi) + 0.5) * w, w);
  if (u < 0.0) u += w;
  const double v = (0.5 - elevation / pi) * h;
  if (v < 0.0 || v >= h) return std::nullopt;
  return Vec2(u, v);
}

Vec3 panorama_ray(const CameraIntrinsics& intr, double u_px, double v_px) {
  const double azimuth = (u_px / intr.panorama_width - 0.5) * 2.0 * pi + intr.azimuth_offset_rad;
  const double elevation = (0.5 - v_px / intr.panorama_height) * pi;
  const double ce = std::cos(elevation);
  return Vec3(ce * std::cos(azimuth), ce * std::sin(azimuth), std::sin(elevation));
}

Vec2 metric_to_aerial_px(const AerialMeta& meta, const Pose3DoF& pose, const Vec2& xy_m) {
  return pose.t_px + rotation(pose.yaw_rad) * xy_m / meta.gsd_m_per_px;
}

Vec2 aerial_px_to_metric(const AerialMeta& meta, const Pose3DoF& pose, const Vec2& px) {
  return rotation(pose.yaw_rad).transpose() * (px - pose.t_px) * meta.gsd_m_per_px;
}

AerialSampleGrid aerial_bev_sample_coords(const BevGridSpec& spec, const AerialMeta& meta,
                                          const Vec2& center_px) {
  if (!meta.contains(center_px)) {
    throw std::invalid_argument("aerial grid centre lies outside the image");
  }
  AerialSampleGrid g;
  g.n = spec.n_points_per_side;
  g.px.reserve(spec.num_cells());
  g.inside.reserve(spec.num_cells());
  for (int ix = 0; ix < g.n; ++ix) {
    for (int iy = 0; iy < g.n; ++iy) {
      Vec2 p = center_px + bev_cell_to_metric(spec, ix, iy) / meta.gsd_m_per_px;
      g.inside.push_back(meta.contains(p));
      g.px.push_back(p);
    }
  }
  return g;
}

Vec2 aerial_cell_px(const BevGridSpec& spec, const AerialMeta& meta, int ix, int iy) {
  return meta.center_px() + bev_cell_to_metric(spec, ix, iy) / meta.gsd_m_per_px;
}

std::optional<CellIndex> ground_to_aerial_cell(const SceneConfig& cfg, const Pose3DoF& pose,
                                               CellIndex ground) {
  Vec2 px = metric_to_aerial_px(cfg.aerial, pose, bev_cell_to_metric(cfg.grid, ground.ix, ground.iy));
  // The aerial grid is axis aligned around the image centre.
  return metric_to_nearest_cell(cfg.grid, (px - cfg.aerial.center_px()) * cfg.aerial.gsd_m_per_px);
}

std::optional<CellIndex> aerial_to_ground_cell(const SceneConfig& cfg, const Pose3DoF& pose,
                                               CellIndex aerial) {
  Vec2 px = aerial_cell_px(cfg.grid, cfg.aerial, aerial.ix, aerial.iy);
  return metric_to_nearest_cell(cfg.grid, aerial_px_to_metric(cfg.aerial, pose, px));
}

}  // namespace crossview

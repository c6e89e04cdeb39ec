#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "crossview/bev_geometry.hpp"

namespace crossview {
namespace {

using std::numbers::pi;

TEST(BevGeometry, CellToMetricIsCentred) {
  BevGridSpec g;
  EXPECT_DOUBLE_EQ(g.spacing_m(), 1.775);
  EXPECT_TRUE(bev_cell_to_metric(g, 20, 20).isZero());
  EXPECT_DOUBLE_EQ(bev_cell_to_metric(g, 0, 40).x(), -35.5);
  EXPECT_DOUBLE_EQ(bev_cell_to_metric(g, 0, 40).y(), 35.5);
  EXPECT_THROW(bev_cell_to_metric(g, 41, 0), std::out_of_range);
}

TEST(BevGeometry, NearestCellInvertsCellToMetric) {
  BevGridSpec g;
  for (int ix = 0; ix < g.n_points_per_side; ++ix) {
    for (int iy = 0; iy < g.n_points_per_side; ++iy) {
      auto c = metric_to_nearest_cell(g, bev_cell_to_metric(g, ix, iy));
      ASSERT_TRUE(c.has_value());
      EXPECT_EQ(*c, (CellIndex{ix, iy}));
    }
  }
  EXPECT_FALSE(metric_to_nearest_cell(g, Vec2(40.0, 0.0)).has_value());
}

TEST(BevGeometry, GroundPointProjectsBelowHorizon) {
  CameraIntrinsics intr;
  auto uv = project_point_to_panorama(intr, 10.0, 0.0, 0.0);
  ASSERT_TRUE(uv.has_value());
  EXPECT_DOUBLE_EQ(uv->x(), intr.panorama_width / 2.0);
  EXPECT_GT(uv->y(), intr.panorama_height / 2.0);
  const double expected_v = (0.5 + std::atan2(2.5, 10.0) / pi) * intr.panorama_height;
  EXPECT_NEAR(uv->y(), expected_v, 1e-9);
  EXPECT_THROW(project_point_to_panorama(intr, 0.0, 0.0, intr.camera_height_m), std::domain_error);
}

TEST(BevGeometry, PanoramaRayInvertsProjection) {
  CameraIntrinsics intr;
  intr.azimuth_offset_rad = 0.3;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-30.0, 30.0);
  for (int i = 0; i < 500; ++i) {
    const Vec3 p(d(rng), d(rng), d(rng) / 5.0);
    auto uv = project_point_to_panorama(intr, p.x(), p.y(), p.z());
    ASSERT_TRUE(uv.has_value());
    const Vec3 rel = p - Vec3(0, 0, intr.camera_height_m);
    const Vec3 ray = panorama_ray(intr, uv->x(), uv->y());
    EXPECT_NEAR((ray - rel.normalized()).norm(), 0.0, 1e-9);
  }
}

TEST(BevGeometry, AerialMappingExamples) {
  AerialMeta meta;
  Pose3DoF origin;
  Vec2 a = metric_to_aerial_px(meta, origin, Vec2(1.2, 0.0));
  EXPECT_NEAR(a.x(), 10.0, 1e-12);
  EXPECT_NEAR(a.y(), 0.0, 1e-12);
  Pose3DoF turned(Vec2(100.0, 50.0), pi / 2);
  Vec2 b = metric_to_aerial_px(meta, turned, Vec2(12.0, 0.0));
  EXPECT_NEAR(b.x(), 100.0, 1e-9);
  EXPECT_NEAR(b.y(), 150.0, 1e-9);
}

TEST(BevGeometry, AerialRoundTripProperty) {
  AerialMeta meta;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> d(-300.0, 300.0);
  std::uniform_real_distribution<double> yaw(-pi, pi);
  for (int i = 0; i < 1000; ++i) {
    Pose3DoF pose(Vec2(d(rng), d(rng)), yaw(rng));
    Vec2 g(d(rng) / 10.0, d(rng) / 10.0);
    Vec2 back = aerial_px_to_metric(meta, pose, metric_to_aerial_px(meta, pose, g));
    EXPECT_NEAR((back - g).norm(), 0.0, 1e-9);
  }
}

TEST(BevGeometry, WrapAngle) {
  EXPECT_DOUBLE_EQ(wrap_angle(pi), pi);
  EXPECT_NEAR(wrap_angle(-pi), pi, 1e-15);
  EXPECT_NEAR(wrap_angle(3 * pi / 2), -pi / 2, 1e-15);
  EXPECT_NEAR(Pose3DoF(Vec2::Zero(), 7.0).yaw_rad, 7.0 - 2 * pi, 1e-15);
}

TEST(BevGeometry, SampleGridCentredOnImage) {
  BevGridSpec g;
  AerialMeta meta;
  auto s = aerial_bev_sample_coords(g, meta, meta.center_px());
  ASSERT_EQ(s.px.size(), 41u * 41u);
  EXPECT_EQ(s.px[g.flat(20, 20)], meta.center_px());
  EXPECT_TRUE(s.inside[g.flat(20, 20)]);
  // 35.5 m at 0.12 m/px stays within the 320 px half-width.
  EXPECT_TRUE(s.inside[g.flat(0, 0)]);
  auto shifted = aerial_bev_sample_coords(g, meta, Vec2(100.0, 320.0));
  EXPECT_FALSE(shifted.inside[g.flat(0, 20)]);
  EXPECT_TRUE(shifted.inside[g.flat(40, 20)]);
  EXPECT_THROW(aerial_bev_sample_coords(g, meta, Vec2(-1.0, 0.0)), std::invalid_argument);
}

TEST(BevGeometry, CellCorrespondenceUnderSnappedPose) {
  SceneConfig cfg;
  const double cell_px = cfg.grid.spacing_m() / cfg.aerial.gsd_m_per_px;
  Pose3DoF pose(cfg.aerial.center_px() + Vec2(3 * cell_px, -2 * cell_px), pi / 2);
  for (int ix = 5; ix < 30; ++ix) {
    for (int iy = 5; iy < 30; ++iy) {
      auto a = ground_to_aerial_cell(cfg, pose, {ix, iy});
      ASSERT_TRUE(a.has_value());
      const int c = cfg.grid.center_index();
      // 90 deg counterclockwise: (dx, dy) -> (-dy, dx).
      EXPECT_EQ(a->ix, c + 3 - (iy - c));
      EXPECT_EQ(a->iy, c - 2 + (ix - c));
      auto g = aerial_to_ground_cell(cfg, pose, *a);
      ASSERT_TRUE(g.has_value());
      EXPECT_EQ(*g, (CellIndex{ix, iy}));
    }
  }
}

TEST(BevGeometry, ConfigJsonRoundTrip) {
  SceneConfig cfg;
  cfg.grid.n_points_per_side = 9;
  cfg.camera.azimuth_offset_rad = 0.25;
  nlohmann::json j = cfg;
  auto back = j.get<SceneConfig>();
  EXPECT_EQ(back.grid.n_points_per_side, 9);
  EXPECT_DOUBLE_EQ(back.camera.azimuth_offset_rad, 0.25);
  nlohmann::json bad = j;
  bad["n"] = 8;
  EXPECT_THROW(bad.get<SceneConfig>(), std::invalid_argument);
}

}  // namespace
}  // namespace crossview

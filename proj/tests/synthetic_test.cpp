#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "crossview/pipeline.hpp"
#include "crossview/synthetic.hpp"

namespace crossview {
namespace {

TEST(Synthetic, SameSeedSameScene) {
  SceneConfig cfg;
  auto a = generate_scene(cfg, 17, 0.1);
  auto b = generate_scene(cfg, 17, 0.1);
  EXPECT_EQ(a.height_field_m, b.height_field_m);
  EXPECT_EQ(a.feature_texture, b.feature_texture);
  EXPECT_EQ(a.gt_pose.t_px, b.gt_pose.t_px);
  auto ra = render_inputs(a);
  auto rb = render_inputs(b);
  EXPECT_EQ(ra.ground_volume.data, rb.ground_volume.data);
  EXPECT_EQ(ra.conf_logits, rb.conf_logits);
  EXPECT_EQ(ra.aerial.data, rb.aerial.data);
  auto c = generate_scene(cfg, 18, 0.1);
  EXPECT_NE(a.height_field_m, c.height_field_m);
}

TEST(Synthetic, SceneInvariants) {
  SceneConfig cfg;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto s = generate_scene(cfg, seed, 0.0);
    float lo = INFINITY;
    for (float h : s.height_field_m.values()) {
      lo = std::min(lo, h);
      EXPECT_LE(h, cfg.layers.z_max_m);
    }
    EXPECT_EQ(lo, -3.0f);
    for (int cell = 0; cell < cfg.grid.num_cells(); ++cell) {
      double norm = 0.0;
      for (int ch = 0; ch < 32; ++ch) norm += std::pow(s.feature_texture[cell * 32 + ch], 2);
      EXPECT_NEAR(norm, 1.0, 1e-6);
    }
    // Grid-snapped: translation is a whole number of cells, yaw a quarter turn.
    const double cell_px = cfg.grid.spacing_m() / cfg.aerial.gsd_m_per_px;
    const Vec2 off = (s.gt_pose.t_px - cfg.aerial.center_px()) / cell_px;
    EXPECT_NEAR(off.x(), std::round(off.x()), 1e-9);
    EXPECT_NEAR(off.y(), std::round(off.y()), 1e-9);
    EXPECT_LE(off.cwiseAbs().maxCoeff(), 8.0 + 1e-9);
    const double q = s.gt_pose.yaw_rad / (std::numbers::pi / 2);
    EXPECT_NEAR(q, std::round(q), 1e-12);
  }
}

TEST(Synthetic, NoiseFreeLogitsRecoverTrueSurface) {
  SceneConfig cfg;
  auto s = generate_scene(cfg, 4, 0.0);
  auto r = render_inputs(s);
  auto surf = surface_from_accumulation(normalize_confidence(r.conf_logits), cfg.layers);
  EXPECT_EQ(surf.index, r.gt_surface.index);
}

TEST(Synthetic, AerialDepthAgreesWithGroundSurface) {
  SceneConfig cfg;
  auto s = generate_scene(cfg, 5, 0.0);
  auto r = render_inputs(s);
  DepthAnchorOptions anchor;
  anchor.scale = r.depth_scale;
  auto sat = aerial_depth_to_height_index(r.depth_sat, cfg.layers, anchor);
  int checked = 0;
  for (int ix = 0; ix < 41; ++ix) {
    for (int iy = 0; iy < 41; ++iy) {
      if (auto a = ground_to_aerial_cell(cfg, s.gt_pose, {ix, iy})) {
        EXPECT_EQ(sat.index[cfg.grid.flat(a->ix, a->iy)], r.gt_surface.index[cfg.grid.flat(ix, iy)]);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 41 * 41 / 3);
}

TEST(Synthetic, PipelineRecoversNoiseFreePose) {
  SceneConfig cfg;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto s = generate_scene(cfg, seed, 0.0);
    auto r = render_inputs(s);
    auto res = run_pipeline(cfg, r.ground_volume, r.conf_logits, r.aerial);
    EXPECT_FALSE(res.degenerate);
    EXPECT_LT((res.pose.t_px - s.gt_pose.t_px).norm() * cfg.aerial.gsd_m_per_px, 1e-6);
    EXPECT_EQ(wrap_angle(res.pose.yaw_rad - s.gt_pose.yaw_rad), 0.0);
  }
}

TEST(Synthetic, KnownYawTakesTranslationOnlyPath) {
  SceneConfig cfg;
  auto s = generate_scene(cfg, 6, 0.0);
  auto r = render_inputs(s);
  PipelineOptions opts;
  opts.known_yaw_rad = s.gt_pose.yaw_rad;
  auto res = run_pipeline(cfg, r.ground_volume, r.conf_logits, r.aerial, opts);
  EXPECT_EQ(res.pose.yaw_rad, s.gt_pose.yaw_rad);
  EXPECT_LT((res.pose.t_px - s.gt_pose.t_px).norm(), 1e-6);
}

TEST(Synthetic, ExportLoadRoundTrip) {
  auto dir = std::filesystem::temp_directory_path() / "crossview_scene_rt";
  std::filesystem::remove_all(dir);
  SceneConfig cfg;
  cfg.grid.n_points_per_side = 11;
  cfg.grid.extent_m = 17.75;
  cfg.camera.panorama_width = 64;
  cfg.camera.panorama_height = 32;
  auto s = generate_scene(cfg, 9, 0.05);
  auto r = render_inputs(s);
  export_scene(dir, s, r);
  auto b = load_scene(dir);
  EXPECT_EQ(b.seed, 9u);
  EXPECT_EQ(b.gt_pose.t_px, s.gt_pose.t_px);
  EXPECT_EQ(b.ground_volume.data, r.ground_volume.data);
  EXPECT_EQ(b.conf_logits, r.conf_logits);
  EXPECT_EQ(b.depth_sat, r.depth_sat);
  EXPECT_LT((b.aerial.data - r.aerial.data).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(std::filesystem::exists(dir / "gt_projection.cvt"));
}

TEST(Synthetic, ContinuousPosesAreOffLattice) {
  SceneConfig cfg;
  SyntheticOptions opts;
  opts.grid_snapped = false;
  auto s = generate_scene(cfg, 3, 0.0, opts);
  const double q = s.gt_pose.yaw_rad / (std::numbers::pi / 2);
  EXPECT_GT(std::abs(q - std::round(q)), 1e-6);
}

}  // namespace
}  // namespace crossview

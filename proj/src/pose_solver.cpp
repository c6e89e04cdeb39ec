#include "crossview/pose_solver.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "crossview/csv.hpp"
#include "crossview/tensor.hpp"

namespace crossview {
namespace {

constexpr double kDegenerateCovariance = 1e-12;

double total_weight(const CorrespondenceSet& c) {
  double total = 0.0;
  for (const auto& p : c) {
    if (!(p.weight >= 0.0) || !std::isfinite(p.weight)) {
      throw std::invalid_argument("correspondence weights must be finite and non-negative");
    }
    if (!p.ground.allFinite() || !p.aerial.allFinite()) {
      throw std::invalid_argument("correspondence coordinates must be finite");
    }
    total += p.weight;
  }
  if (!(total > 0.0)) throw std::invalid_argument("no correspondence has positive weight");
  return total;
}

}  // namespace

PoseSolution solve_weighted_procrustes(const CorrespondenceSet& c) {
  const double total = total_weight(c);
  Vec2 g_mean = Vec2::Zero();
  Vec2 a_mean = Vec2::Zero();
  for (const auto& p : c) {
    const double w = p.weight / total;
    g_mean += w * p.ground;
    a_mean += w * p.aerial;
  }
  // Weighted cross-covariance sum_i w_i (g_i - g)(a_i - a)^T.
  Mat2 cov = Mat2::Zero();
  for (const auto& p : c) {
    const double w = p.weight / total;
    cov += w * (p.ground - g_mean) * (p.aerial - a_mean).transpose();
  }
  if (cov.norm() < kDegenerateCovariance) {
    PoseSolution out = solve_translation_only(c, 0.0);
    out.degenerate = true;
    return out;
  }
  // The objective is cos(t) * (sxx + syy) + sin(t) * (sxy - syx); its maximiser
  // is the rotation of the polar factor of cov with det = +1.
  const double yaw = std::atan2(cov(0, 1) - cov(1, 0), cov(0, 0) + cov(1, 1));
  return {Pose3DoF(a_mean - rotation(yaw) * g_mean, yaw), false};
}

PoseSolution solve_translation_only(const CorrespondenceSet& c, double yaw_fixed) {
  const double total = total_weight(c);
  const Mat2 r = rotation(yaw_fixed);
  Vec2 t = Vec2::Zero();
  for (const auto& p : c) t += (p.weight / total) * (p.aerial - r * p.ground);
  return {Pose3DoF(t, yaw_fixed), false};
}

PoseError pose_error(const Pose3DoF& pred, const Pose3DoF& gt, const AerialMeta& meta) {
  return {(pred.t_px - gt.t_px).norm() * meta.gsd_m_per_px,
          std::abs(rad_to_deg(wrap_angle(pred.yaw_rad - gt.yaw_rad)))};
}

CorrespondenceSet matches_to_correspondences(const std::vector<PatchMatch>& matches,
                                             const SceneConfig& cfg) {
  const int n = cfg.grid.n_points_per_side;
  CorrespondenceSet out;
  out.reserve(matches.size());
  for (const auto& m : matches) {
    out.push_back({bev_cell_to_metric(cfg.grid, m.ground / n, m.ground % n),
                   aerial_cell_px(cfg.grid, cfg.aerial, m.aerial / n, m.aerial % n) *
                       cfg.aerial.gsd_m_per_px,
                   m.weight});
  }
  return out;
}

Pose3DoF metric_solution_to_pixels(const Pose3DoF& metric, const AerialMeta& meta) {
  return Pose3DoF(metric.t_px / meta.gsd_m_per_px, metric.yaw_rad);
}

CorrespondenceSet read_correspondences_csv(const std::filesystem::path& path) {
  CorrespondenceSet out;
  for (const auto& row : read_numeric_csv(path, 5)) {
    const auto& v = row.values;
    out.push_back({Vec2(v[0], v[1]), Vec2(v[2], v[3]), v[4]});
  }
  return out;
}

void write_correspondences_csv(const std::filesystem::path& path, const CorrespondenceSet& c) {
  std::ostringstream os;
  os << "gx,gy,ax,ay,w\n";
  for (const auto& p : c) {
    os << format_number(p.ground.x()) << ',' << format_number(p.ground.y()) << ','
       << format_number(p.aerial.x()) << ',' << format_number(p.aerial.y()) << ','
       << format_number(p.weight) << '\n';
  }
  write_text_file(path, os.str());
}

}  // namespace crossview

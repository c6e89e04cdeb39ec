#include "crossview/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "crossview/csv.hpp"

namespace crossview {
namespace {

double lower_median(std::vector<double> v) {
  auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

Tensor GroundTruthProjection::to_tensor() const {
  Tensor t({height, width, 3});
  for (std::size_t i = 0; i < aerial_px.size(); ++i) {
    t[3 * i] = static_cast<float>(aerial_px[i].x());
    t[3 * i + 1] = static_cast<float>(aerial_px[i].y());
    t[3 * i + 2] = valid[i] ? 1.0f : 0.0f;
  }
  return t;
}

GroundTruthProjection GroundTruthProjection::from_tensor(const Tensor& t) {
  if (t.rank() != 3 || t.dim(2) != 3) {
    throw ShapeError("ground-truth projection must be H x W x 3, got " + format_dims(t.dims()));
  }
  GroundTruthProjection g;
  g.height = static_cast<int>(t.dim(0));
  g.width = static_cast<int>(t.dim(1));
  const std::size_t n = static_cast<std::size_t>(g.width) * g.height;
  g.aerial_px.resize(n);
  g.valid.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.aerial_px[i] = Vec2(t[3 * i], t[3 * i + 1]);
    g.valid[i] = t[3 * i + 2] > 0.5f;
  }
  return g;
}

GroundTruthProjection build_gt_projection(const Tensor& depth_grd, const CameraIntrinsics& intr,
                                          const Pose3DoF& gt, const AerialMeta& meta,
                                          const GtProjectionOptions& opts) {
  depth_grd.expect_dims({intr.panorama_height, intr.panorama_width}, "ground depth map");
  GroundTruthProjection g;
  g.width = intr.panorama_width;
  g.height = intr.panorama_height;
  g.aerial_px.assign(depth_grd.size(), Vec2::Zero());
  g.valid.assign(depth_grd.size(), 0);
  for (int v = 0; v < g.height; ++v) {
    for (int u = 0; u < g.width; ++u) {
      const std::size_t i = static_cast<std::size_t>(v) * g.width + u;
      const double depth = depth_grd[i];
      if (!std::isfinite(depth) || depth <= 0.0) continue;
      const Vec3 p = depth * panorama_ray(intr, u, v);
      const Vec2 planar = p.head<2>();
      const double range = opts.range_mode == RangeMode::kRay ? depth : planar.norm();
      const Vec2 px = metric_to_aerial_px(meta, gt, planar);
      g.aerial_px[i] = px;
      g.valid[i] = range <= opts.max_range_m && meta.contains(px);
    }
  }
  return g;
}

MatchingReport matching_success_ratio(const MatchPrediction& pred, const GroundTruthProjection& gt,
                                      const std::vector<double>& thresholds_px) {
  if (pred.empty()) throw std::invalid_argument("empty match prediction");
  for (double t : thresholds_px) {
    if (!(t > 0.0)) throw std::invalid_argument("pixel thresholds must be positive");
  }
  MatchingReport r;
  r.n_mch = static_cast<int>(pred.size());
  r.thresholds_px = thresholds_px;
  r.correct.assign(thresholds_px.size(), 0);
  for (const auto& m : pred) {
    const double fu = std::round(m.ground_px.x());
    const double fv = std::round(m.ground_px.y());
    if (!std::isfinite(fu) || !std::isfinite(fv) || std::abs(fu) > 1e9 || std::abs(fv) > 1e9) continue;
    const int u = static_cast<int>(fu);
    const int v = static_cast<int>(fv);
    if (!gt.is_valid(u, v)) continue;
    ++r.n_valid;
    const double err = (m.aerial_px - gt.at(u, v)).norm();
    for (std::size_t k = 0; k < thresholds_px.size(); ++k) {
      if (err <= thresholds_px[k]) ++r.correct[k];
    }
  }
  for (int c : r.correct) r.ratios.push_back(static_cast<double>(c) / r.n_mch);
  r.valid_ratio = static_cast<double>(r.n_valid) / r.n_mch;
  return r;
}

LocalizationStats localization_stats(const std::vector<PoseError>& errors) {
  if (errors.empty()) throw std::invalid_argument("no localization errors to summarise");
  std::vector<double> t;
  std::vector<double> o;
  for (const auto& e : errors) {
    t.push_back(e.translation_m);
    o.push_back(e.orientation_deg);
  }
  return {static_cast<int>(errors.size()), mean(t), lower_median(t), mean(o), lower_median(o)};
}

MatchPrediction read_match_prediction_csv(const std::filesystem::path& path) {
  MatchPrediction out;
  for (const auto& row : read_numeric_csv(path, 4)) {
    const auto& v = row.values;
    out.push_back({Vec2(v[0], v[1]), Vec2(v[2], v[3])});
  }
  return out;
}

void to_json(nlohmann::json& j, const MatchingReport& r) {
  j = nlohmann::json{{"n_mch", r.n_mch}, {"n_valid", r.n_valid}, {"valid_ratio", r.valid_ratio}};
  auto& rows = j["success"] = nlohmann::json::array();
  for (std::size_t k = 0; k < r.thresholds_px.size(); ++k) {
    rows.push_back({{"threshold_px", r.thresholds_px[k]},
                    {"correct", r.correct[k]},
                    {"ratio", r.ratios[k]}});
  }
}

void to_json(nlohmann::json& j, const LocalizationStats& s) {
  j = nlohmann::json{{"count", s.count},
                     {"mean_translation_m", s.mean_translation_m},
                     {"median_translation_m", s.median_translation_m},
                     {"mean_orientation_deg", s.mean_orientation_deg},
                     {"median_orientation_deg", s.median_orientation_deg}};
}

std::string matching_report_csv(const MatchingReport& r) {
  std::ostringstream os;
  os << "metric,value\n";
  for (std::size_t k = 0; k < r.thresholds_px.size(); ++k) {
    os << "success@" << format_number(r.thresholds_px[k]) << "px," << format_number(r.ratios[k])
       << '\n';
  }
  os << "valid_ratio," << format_number(r.valid_ratio) << '\n';
  os << "n_mch," << r.n_mch << '\n';
  return os.str();
}

std::string localization_stats_csv(const LocalizationStats& s) {
  std::ostringstream os;
  os << "metric,value\n"
     << "count," << s.count << '\n'
     << "mean_translation_m," << format_number(s.mean_translation_m) << '\n'
     << "median_translation_m," << format_number(s.median_translation_m) << '\n'
     << "mean_orientation_deg," << format_number(s.mean_orientation_deg) << '\n'
     << "median_orientation_deg," << format_number(s.median_orientation_deg) << '\n';
  return os.str();
}

}  // namespace crossview

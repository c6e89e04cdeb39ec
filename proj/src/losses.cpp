#include "crossview/losses.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace crossview {
namespace {

enum class Stream : std::uint32_t { kVirtualPoints = 1, kPatchPairs = 2 };

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

double log_sum_exp(const auto& values) {
  const double peak = values.maxCoeff();
  return peak + std::log((values.array() - peak).exp().sum());
}

}  // namespace

void LossConfig::validate() const {
  if (!(beta1 >= 0.0 && beta2 >= 0.0)) throw std::invalid_argument("loss weights must be non-negative");
  if (n_v <= 0 || n_s <= 0) throw std::invalid_argument("sample counts must be positive");
  if (!(l_v_m > 0.0 && k_norm > 0.0)) throw std::invalid_argument("l_v and K must be positive");
}

void to_json(nlohmann::json& j, const LossConfig& c) {
  j = nlohmann::json{{"beta1", c.beta1}, {"beta2", c.beta2},   {"n_v", c.n_v},
                     {"l_v_m", c.l_v_m}, {"n_s", c.n_s},       {"k_norm", c.k_norm},
                     {"seed", c.rng_seed}, {"height_in_meters", c.height_in_meters}};
}

void from_json(const nlohmann::json& j, LossConfig& c) {
  LossConfig d;
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.n_v = j.value("n_v", d.n_v);
  c.l_v_m = j.value("l_v_m", d.l_v_m);
  c.n_s = j.value("n_s", d.n_s);
  c.k_norm = j.value("k_norm", d.k_norm);
  c.rng_seed = j.value("seed", d.rng_seed);
  c.height_in_meters = j.value("height_in_meters", d.height_in_meters);
  c.validate();
}

std::vector<Vec2> sample_virtual_points(const LossConfig& cfg) {
  auto rng = make_rng(cfg.rng_seed, Stream::kVirtualPoints);
  std::uniform_real_distribution<double> dist(-cfg.l_v_m / 2.0, cfg.l_v_m / 2.0);
  std::vector<Vec2> pts(cfg.n_v);
  for (auto& p : pts) {
    const double x = dist(rng);
    p = Vec2(x, dist(rng));
  }
  return pts;
}

double vce_loss(const Pose3DoF& pred, const Pose3DoF& gt, const AerialMeta& meta,
                const LossConfig& cfg) {
  cfg.validate();
  // Each point's displacement is (R_pred - R_gt) p + dt.
  const Mat2 dr = rotation(pred.yaw_rad) - rotation(gt.yaw_rad);
  const Vec2 dt = (pred.t_px - gt.t_px) * meta.gsd_m_per_px;
  double sum = 0.0;
  const auto pts = sample_virtual_points(cfg);
  for (const auto& p : pts) sum += (dr * p + dt).norm();
  return sum / static_cast<double>(pts.size());
}

std::vector<PatchPair> sample_patch_pairs(const SceneConfig& scene, const Pose3DoF& gt,
                                          const LossConfig& cfg) {
  const auto& grid = scene.grid;
  std::vector<PatchPair> valid;
  for (int ix = 0; ix < grid.n_points_per_side; ++ix) {
    for (int iy = 0; iy < grid.n_points_per_side; ++iy) {
      if (auto a = ground_to_aerial_cell(scene, gt, {ix, iy})) {
        valid.push_back({grid.flat(ix, iy), grid.flat(a->ix, a->iy)});
      }
    }
  }
  if (valid.empty()) throw std::domain_error("ground and aerial grids do not overlap under the pose");
  if (valid.size() > static_cast<std::size_t>(cfg.n_s)) {
    auto rng = make_rng(cfg.rng_seed, Stream::kPatchPairs);
    std::shuffle(valid.begin(), valid.end(), rng);
    valid.resize(cfg.n_s);
  }
  return valid;
}

double matching_loss(const SimilarityMatrix& s_orig, const std::vector<PatchPair>& pairs) {
  if (pairs.empty()) throw std::domain_error("no valid patch pairs");
  const RowMatrix& s = s_orig.s;
  std::unordered_map<int, double> row_lse;
  std::unordered_map<int, double> col_lse;
  double g2s = 0.0;
  double s2g = 0.0;
  for (const auto& p : pairs) {
    if (p.ground < 0 || p.ground >= s.rows() || p.aerial < 0 || p.aerial >= s.cols()) {
      throw ShapeError("patch pair outside similarity matrix");
    }
    auto r = row_lse.find(p.ground);
    if (r == row_lse.end()) r = row_lse.emplace(p.ground, log_sum_exp(s.row(p.ground))).first;
    auto c = col_lse.find(p.aerial);
    if (c == col_lse.end()) c = col_lse.emplace(p.aerial, log_sum_exp(s.col(p.aerial))).first;
    const double logit = s(p.ground, p.aerial);
    g2s += r->second - logit;
    s2g += c->second - logit;
  }
  const double n = static_cast<double>(pairs.size());
  return 0.5 * (g2s / n + s2g / n);
}

double matching_loss(const SimilarityMatrix& s_orig, const Pose3DoF& gt, const SceneConfig& scene,
                     const LossConfig& cfg) {
  return matching_loss(s_orig, sample_patch_pairs(scene, gt, cfg));
}

double height_loss(const SurfaceMap& surf_grd, const SurfaceMap& surf_sat,
                   const std::vector<PatchPair>& pairs, const HeightLayerSpec& layers,
                   const LossConfig& cfg) {
  if (pairs.empty()) throw std::domain_error("no valid patch pairs");
  if (surf_grd.n != surf_sat.n) throw ShapeError("surface maps are on different grids");
  const double unit = cfg.height_in_meters ? layers.spacing_m() : 1.0;
  long long sum = 0;
  for (const auto& p : pairs) sum += std::abs(surf_grd.index.at(p.ground) - surf_sat.index.at(p.aerial));
  return static_cast<double>(sum) * unit / (static_cast<double>(pairs.size()) * cfg.k_norm);
}

double height_loss(const SurfaceMap& surf_grd, const SurfaceMap& surf_sat, const Pose3DoF& gt,
                   const SceneConfig& scene, const LossConfig& cfg) {
  return height_loss(surf_grd, surf_sat, sample_patch_pairs(scene, gt, cfg), scene.layers, cfg);
}

double total_loss(double vce, double matching, double height, const LossConfig& cfg) {
  return vce + cfg.beta1 * matching + cfg.beta2 * height;
}

void to_json(nlohmann::json& j, const LossReport& r) {
  j = nlohmann::json{{"vce", r.vce},
                     {"matching", r.matching},
                     {"height", r.height},
                     {"total", r.total},
                     {"seed", r.seed}};
}

}  // namespace crossview

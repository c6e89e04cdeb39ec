#include "crossview/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "crossview/evaluation.hpp"

namespace crossview {
namespace {

enum class Stream : std::uint32_t {
  kHeights = 11,
  kTexture = 12,
  kPose = 13,
  kGroundNoise = 21,
  kLogitNoise = 22,
  kAerialNoise = 23,
  kUnseen = 24,
};

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

void random_unit(std::mt19937_64& rng, float* out, int c) {
  std::normal_distribution<double> normal;
  std::vector<double> v(c);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (int k = 0; k < c; ++k) out[k] = static_cast<float>(v[k] / norm);
}

Tensor render_ground_depth(const CameraIntrinsics& intr) {
  // Flat ground plane at z = 0; rays at or above the horizon see sky.
  Tensor depth({intr.panorama_height, intr.panorama_width});
  for (int v = 0; v < intr.panorama_height; ++v) {
    for (int u = 0; u < intr.panorama_width; ++u) {
      const double down = -panorama_ray(intr, u, v).z();
      depth.at({v, u}) = down > 1e-9 ? static_cast<float>(intr.camera_height_m / down) : 0.0f;
    }
  }
  return depth;
}

void write_named(const std::filesystem::path& dir, nlohmann::json& list, const std::string& name,
                 const Tensor& t) {
  const std::string file = name + ".cvt";
  write_tensor(dir / file, t);
  list.push_back({{"name", name}, {"file", file}, {"dims", t.dims()}});
}

}  // namespace

SyntheticScene generate_scene(const SceneConfig& config, std::uint64_t seed, double noise_sigma,
                              const SyntheticOptions& options) {
  config.validate();
  if (options.channels <= 0) throw std::invalid_argument("feature width must be positive");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise sigma must be non-negative");
  const auto& grid = config.grid;
  const int n = grid.n_points_per_side;

  SyntheticScene scene;
  scene.config = config;
  scene.seed = seed;
  scene.noise_sigma = noise_sigma;
  scene.options = options;

  {
    auto rng = make_rng(seed, Stream::kHeights);
    const double half = grid.extent_m / 2.0;
    std::uniform_int_distribution<int> count(3, 8);
    std::uniform_real_distribution<double> pos(-half, half);
    std::uniform_real_distribution<double> amp(1.0, 12.0);
    std::uniform_real_distribution<double> width(2.0, 10.0);
    struct Bump {
      Vec2 c;
      double a;
      double s;
    };
    std::vector<Bump> bumps(count(rng));
    for (auto& b : bumps) {
      const double x = pos(rng);
      const double y = pos(rng);
      const double a = amp(rng);
      b = {Vec2(x, y), a, width(rng)};
    }
    std::vector<double> raw(grid.num_cells(), 0.0);
    for (int ix = 0; ix < n; ++ix) {
      for (int iy = 0; iy < n; ++iy) {
        const Vec2 p = bev_cell_to_metric(grid, ix, iy);
        double h = 0.0;
        for (const auto& b : bumps) h += b.a * std::exp(-(p - b.c).squaredNorm() / (2 * b.s * b.s));
        raw[grid.flat(ix, iy)] = h;
      }
    }
    const double lowest = *std::min_element(raw.begin(), raw.end());
    scene.height_field_m = Tensor({n, n});
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const double h = options.ground_anchor_m + (raw[i] - lowest);
      scene.height_field_m[i] =
          static_cast<float>(std::clamp(h, config.layers.z_min_m, config.layers.z_max_m));
    }
  }

  {
    auto rng = make_rng(seed, Stream::kTexture);
    scene.feature_texture = Tensor({n, n, options.channels});
    for (int cell = 0; cell < grid.num_cells(); ++cell) {
      random_unit(rng, scene.feature_texture.data() + cell * options.channels, options.channels);
    }
  }

  {
    auto rng = make_rng(seed, Stream::kPose);
    const Vec2 center = config.aerial.center_px();
    const double cell_px = grid.spacing_m() / config.aerial.gsd_m_per_px;
    if (options.grid_snapped) {
      std::uniform_int_distribution<int> offset(-options.max_offset_cells, options.max_offset_cells);
      std::uniform_int_distribution<int> quarter(0, 3);
      const int ox = offset(rng);
      const int oy = offset(rng);
      const int q = quarter(rng);
      scene.gt_pose = Pose3DoF(center + Vec2(ox, oy) * cell_px, q * std::numbers::pi / 2.0);
    } else {
      const double span = options.max_offset_cells * cell_px;
      std::uniform_real_distribution<double> offset(-span, span);
      std::uniform_real_distribution<double> yaw(-std::numbers::pi, std::numbers::pi);
      const double ox = offset(rng);
      const double oy = offset(rng);
      scene.gt_pose = Pose3DoF(center + Vec2(ox, oy), yaw(rng));
    }
  }
  return scene;
}

RenderedInputs render_inputs(const SyntheticScene& scene) {
  const auto& cfg = scene.config;
  const auto& grid = cfg.grid;
  const int n = grid.n_points_per_side;
  const int m = cfg.layers.num_layers;
  const int c = scene.options.channels;
  const int cells = grid.num_cells();
  const double sigma = scene.noise_sigma;

  RenderedInputs out;

  out.gt_surface.n = n;
  out.gt_surface.index.resize(cells);
  out.gt_surface.height_m.resize(cells);
  for (int cell = 0; cell < cells; ++cell) {
    const int k = nearest_layer_index(cfg.layers, scene.height_field_m[cell]);
    out.gt_surface.index[cell] = k;
    out.gt_surface.height_m[cell] = cfg.layers.layer_height(k);
  }

  out.ground_volume.layers = cfg.layers;
  out.ground_volume.grid = grid;
  out.ground_volume.data = Tensor({m, n, n, c});
  {
    auto rng = make_rng(scene.seed, Stream::kGroundNoise);
    std::normal_distribution<double> normal;
    float* vol = out.ground_volume.data.data();
    for (int k = 0; k < m; ++k) {
      for (int cell = 0; cell < cells; ++cell) {
        float* dst = vol + (static_cast<std::size_t>(k) * cells + cell) * c;
        if (out.gt_surface.index[cell] == k) {
          std::copy_n(scene.feature_texture.data() + cell * c, c, dst);
        } else {
          for (int ch = 0; ch < c; ++ch) dst[ch] = static_cast<float>(sigma * normal(rng));
        }
      }
    }
  }

  out.conf_logits = Tensor({m, n, n});
  {
    auto rng = make_rng(scene.seed, Stream::kLogitNoise);
    std::normal_distribution<double> normal;
    for (int k = 0; k < m; ++k) {
      for (int cell = 0; cell < cells; ++cell) {
        const double peak = out.gt_surface.index[cell] == k ? scene.options.peak_logit : 0.0;
        out.conf_logits[static_cast<std::size_t>(k) * cells + cell] =
            static_cast<float>(peak + sigma * normal(rng));
      }
    }
  }

  // Aerial BEV: every aerial cell looks up the world at its position; cells
  // the ground grid never observed get an independent random appearance.
  out.aerial.grid = grid;
  out.aerial.data = RowMatrix::Zero(cells, c);
  out.depth_sat = Tensor({n, n});
  out.depth_scale = 1.0;
  {
    auto noise_rng = make_rng(scene.seed, Stream::kAerialNoise);
    auto unseen_rng = make_rng(scene.seed, Stream::kUnseen);
    std::normal_distribution<double> normal;
    std::vector<float> feature(c);
    for (int ix = 0; ix < n; ++ix) {
      for (int iy = 0; iy < n; ++iy) {
        const int j = grid.flat(ix, iy);
        if (auto g = aerial_to_ground_cell(cfg, scene.gt_pose, {ix, iy})) {
          const int src = grid.flat(g->ix, g->iy);
          std::copy_n(scene.feature_texture.data() + src * c, c, feature.begin());
          out.depth_sat[j] = scene.height_field_m[src];
        } else {
          random_unit(unseen_rng, feature.data(), c);
          out.depth_sat[j] = static_cast<float>(scene.options.ground_anchor_m);
        }
        for (int ch = 0; ch < c; ++ch) {
          const double noisy = feature[ch] + sigma * normal(noise_rng);
          out.aerial.data(j, ch) = static_cast<float>(noisy);
        }
      }
    }
  }

  out.depth_grd = render_ground_depth(cfg.camera);
  return out;
}

void export_scene(const std::filesystem::path& dir, const SyntheticScene& scene,
                  const RenderedInputs& inputs) {
  std::filesystem::create_directories(dir);
  const auto& cfg = scene.config;
  const int n = cfg.grid.n_points_per_side;
  const int c = scene.options.channels;

  nlohmann::json manifest;
  manifest["format"] = "crossview-scene";
  manifest["version"] = 1;
  manifest["seed"] = scene.seed;
  manifest["noise_sigma"] = scene.noise_sigma;
  manifest["gt_pose"] = scene.gt_pose;
  manifest["depth_scale"] = inputs.depth_scale;
  manifest["ground_anchor_m"] = scene.options.ground_anchor_m;
  manifest["config"] = cfg;
  auto& list = manifest["tensors"] = nlohmann::json::array();

  write_named(dir, list, "height_field", scene.height_field_m);
  write_named(dir, list, "feature_texture", scene.feature_texture);
  write_named(dir, list, "ground_volume", inputs.ground_volume.data);
  write_named(dir, list, "conf_logits", inputs.conf_logits);
  write_named(dir, list, "aerial_features", matrix_to_tensor(inputs.aerial.data, {n, n, c}));
  write_named(dir, list, "surface_gt", surface_to_tensor(inputs.gt_surface));
  write_named(dir, list, "depth_sat", inputs.depth_sat);
  write_named(dir, list, "depth_grd", inputs.depth_grd);
  write_named(dir, list, "gt_projection",
              build_gt_projection(inputs.depth_grd, cfg.camera, scene.gt_pose, cfg.aerial).to_tensor());

  write_text_file(dir / "config.json", nlohmann::json(cfg).dump(2));
  write_text_file(dir / "manifest.json", manifest.dump(2));
}

SceneBundle load_scene(const std::filesystem::path& dir) {
  auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  if (manifest.value("format", "") != "crossview-scene") {
    throw TensorIoError(dir.string() + ": not a scene directory");
  }
  SceneBundle b;
  b.config = manifest.at("config").get<SceneConfig>();
  if (std::filesystem::exists(dir / "config.json")) {
    b.config = nlohmann::json::parse(read_text_file(dir / "config.json")).get<SceneConfig>();
  }
  b.gt_pose = manifest.at("gt_pose").get<Pose3DoF>();
  b.seed = manifest.value("seed", std::uint64_t{0});
  b.depth_scale = manifest.value("depth_scale", 1.0);
  b.ground_anchor_m = manifest.value("ground_anchor_m", -3.0);

  auto load = [&](const std::string& name) {
    for (const auto& e : manifest.at("tensors")) {
      if (e.at("name") == name) {
        Tensor t = read_tensor(dir / e.at("file").get<std::string>());
        t.expect_dims(e.at("dims").get<std::vector<std::int64_t>>(), name + " (manifest)");
        return t;
      }
    }
    throw TensorIoError(dir.string() + ": manifest has no tensor '" + name + "'");
  };

  const int n = b.config.grid.n_points_per_side;
  const int m = b.config.layers.num_layers;
  b.ground_volume = {load("ground_volume"), b.config.layers, b.config.grid};
  b.ground_volume.validate();
  b.conf_logits = load("conf_logits");
  b.conf_logits.expect_dims({m, n, n}, "conf_logits");
  Tensor aerial = load("aerial_features");
  if (aerial.rank() != 3 || aerial.dim(0) != n || aerial.dim(1) != n) {
    throw ShapeError("aerial_features dims " + format_dims(aerial.dims()) + " do not match grid");
  }
  b.aerial = {b.config.grid, tensor_to_matrix(aerial, n * n, aerial.dim(2))};
  b.depth_sat = load("depth_sat");
  b.depth_sat.expect_dims({n, n}, "depth_sat");
  return b;
}

}  // namespace crossview

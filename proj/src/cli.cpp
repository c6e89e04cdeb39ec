#include "crossview/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "crossview/csv.hpp"
#include "crossview/evaluation.hpp"
#include "crossview/losses.hpp"
#include "crossview/pipeline.hpp"
#include "crossview/synthetic.hpp"

namespace crossview::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Error carrying the exit code it should map to.
struct CommandError : std::runtime_error {
  CommandError(int code, const std::string& msg) : std::runtime_error(msg), code(code) {}
  int code;
};

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
    if (text.empty() || text.back() != '\n') out << '\n';
  } else {
    write_text_file(out_path, text);
  }
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::uint64_t seed = 0;
  int n = 41;
  double extent_m = 71.0;
  double noise = 0.0;
  int channels = 32;
  int count = 1;
  bool continuous = false;
  int max_offset = 8;
  int pano_h = 64;
  double gsd = 0.12;
  int aerial_size = 640;
  std::string out_dir;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  if (a.count < 1) throw CommandError(kInputError, "--count must be at least 1");
  SceneConfig cfg;
  cfg.grid.n_points_per_side = a.n;
  cfg.grid.extent_m = a.extent_m;
  cfg.camera.panorama_height = a.pano_h;
  cfg.camera.panorama_width = 2 * a.pano_h;
  cfg.aerial.gsd_m_per_px = a.gsd;
  cfg.aerial.image_size_px = a.aerial_size;
  cfg.validate();

  SyntheticOptions opts;
  opts.channels = a.channels;
  opts.grid_snapped = !a.continuous;
  opts.max_offset_cells = a.max_offset;

  json written = json::array();
  for (int i = 0; i < a.count; ++i) {
    fs::path dir = a.out_dir;
    if (a.count > 1) {
      std::ostringstream name;
      name << "scene_" << std::setw(4) << std::setfill('0') << i;
      dir /= name.str();
    }
    const std::uint64_t seed = a.seed + static_cast<std::uint64_t>(i);
    auto scene = generate_scene(cfg, seed, a.noise, opts);
    auto inputs = render_inputs(scene);
    export_scene(dir, scene, inputs);
    // Scene ids tie batch predictions to their ground truth.
    auto manifest = json::parse(read_text_file(dir / "manifest.json"));
    manifest["id"] = i;
    write_text_file(dir / "manifest.json", manifest.dump(2));
    written.push_back({{"id", i}, {"dir", dir.string()}, {"seed", seed}});
  }
  out << written.dump(2) << '\n';
  return kOk;
}

// ---------------------------------------------------------------- solve

struct SolveArgs {
  std::string scene_dir;
  std::string config;
  std::string ground_volume;
  std::string conf_logits;
  std::string aerial_features;
  std::string refiner_params;
  double threshold = 0.5;
  int topk = 30;
  double tau = 0.1;
  std::optional<double> known_yaw_deg;
  int window = -1;
  std::string correspondences_out;
  std::string pixel_matches_out;
  std::string out;
};

struct LoadedInputs {
  SceneConfig config;
  FeatureVolume volume;
  Tensor logits;
  BevFeatureMap aerial;
};

LoadedInputs load_solve_inputs(const SolveArgs& a) {
  LoadedInputs in;
  if (!a.scene_dir.empty()) {
    auto b = load_scene(a.scene_dir);
    in.config = b.config;
    in.volume = std::move(b.ground_volume);
    in.logits = std::move(b.conf_logits);
    in.aerial = std::move(b.aerial);
    return in;
  }
  if (a.config.empty() || a.ground_volume.empty() || a.conf_logits.empty() ||
      a.aerial_features.empty()) {
    throw CommandError(kInputError,
                       "either --scene-dir or all of --config, --ground-volume, --conf-logits, "
                       "--aerial-features are required");
  }
  in.config = json::parse(read_text_file(a.config)).get<SceneConfig>();
  const int n = in.config.grid.n_points_per_side;
  in.volume = {read_tensor(a.ground_volume), in.config.layers, in.config.grid};
  in.volume.validate();
  in.logits = read_tensor(a.conf_logits);
  in.logits.expect_dims({in.config.layers.num_layers, n, n}, "confidence logits");
  Tensor aerial = read_tensor(a.aerial_features);
  if (aerial.rank() != 3 || aerial.dim(0) != n || aerial.dim(1) != n) {
    throw ShapeError("aerial features dims " + format_dims(aerial.dims()) + " do not match grid");
  }
  in.aerial = {in.config.grid, tensor_to_matrix(aerial, n * n, aerial.dim(2))};
  return in;
}

// Ground BEV cells are projected at ground level into the panorama, aerial
// cells to their image pixel.
std::string pixel_matches_csv(const std::vector<PatchMatch>& matches, const SceneConfig& cfg) {
  std::ostringstream os;
  os << "xg,yg,xs,ys\n";
  const int n = cfg.grid.n_points_per_side;
  for (const auto& m : matches) {
    const Vec2 g = bev_cell_to_metric(cfg.grid, m.ground / n, m.ground % n);
    if (g.isZero()) continue;
    auto uv = project_point_to_panorama(cfg.camera, g.x(), g.y(), 0.0);
    if (!uv) continue;
    const Vec2 a = aerial_cell_px(cfg.grid, cfg.aerial, m.aerial / n, m.aerial % n);
    os << format_number(uv->x()) << ',' << format_number(uv->y()) << ',' << format_number(a.x())
       << ',' << format_number(a.y()) << '\n';
  }
  return os.str();
}

int cmd_solve(const SolveArgs& a, std::ostream& out) {
  LoadedInputs in = load_solve_inputs(a);

  PipelineOptions opts;
  opts.surface_threshold = a.threshold;
  opts.top_k = a.topk;
  opts.tau = a.tau;
  if (a.window >= 0) opts.fusion.window = a.window;
  if (a.known_yaw_deg) opts.known_yaw_rad = deg_to_rad(*a.known_yaw_deg);

  std::optional<RefinerParams> params;
  if (!a.refiner_params.empty()) {
    params = load_refiner_params(a.refiner_params);
    params->validate(in.config.grid.num_cells());
    opts.refiner = &*params;
  } else {
    spdlog::warn("no refiner parameters given; refinement skipped (identity) with zero dustbin");
  }

  auto r = run_pipeline(in.config, in.volume, in.logits, in.aerial, opts);
  if (!a.correspondences_out.empty()) {
    write_correspondences_csv(a.correspondences_out, matches_to_correspondences(r.matches, in.config));
  }
  if (!a.pixel_matches_out.empty()) {
    write_text_file(a.pixel_matches_out, pixel_matches_csv(r.matches, in.config));
  }

  json report{{"tx_px", r.pose.t_px.x()},
              {"ty_px", r.pose.t_px.y()},
              {"yaw_deg", rad_to_deg(r.pose.yaw_rad)},
              {"num_matches", r.matches.size()},
              {"degenerate_flag", r.degenerate},
              {"refined", opts.refiner != nullptr},
              {"known_yaw", a.known_yaw_deg.has_value()}};
  emit(report.dump(2), a.out, out);
  if (r.degenerate) {
    spdlog::error("degenerate correspondence set; rotation undefined");
    return kDegenerate;
  }
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string pred_csv;
  std::string gt_dir;
  std::string mode = "matching";
  std::vector<double> thresholds{5, 10, 15};
  std::string out;
};

std::map<int, std::pair<Pose3DoF, AerialMeta>> load_gt_poses(const fs::path& dir) {
  std::map<int, std::pair<Pose3DoF, AerialMeta>> poses;
  auto add = [&](const fs::path& scene) {
    auto manifest = json::parse(read_text_file(scene / "manifest.json"));
    const int id = manifest.value("id", 0);
    auto cfg = manifest.at("config").get<SceneConfig>();
    if (!poses.emplace(id, std::make_pair(manifest.at("gt_pose").get<Pose3DoF>(), cfg.aerial)).second) {
      throw CommandError(kInputError, "duplicate scene id " + std::to_string(id) + " under " + dir.string());
    }
  };
  if (fs::exists(dir / "manifest.json")) {
    add(dir);
  } else {
    std::vector<fs::path> scenes;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_directory() && fs::exists(e.path() / "manifest.json")) scenes.push_back(e.path());
    }
    std::sort(scenes.begin(), scenes.end());
    for (const auto& s : scenes) add(s);
  }
  if (poses.empty()) throw CommandError(kInputError, "no scene manifests under " + dir.string());
  return poses;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  std::string json_text;
  std::string csv_text;
  if (a.mode == "matching") {
    auto pred = read_match_prediction_csv(a.pred_csv);
    if (pred.empty()) throw CommandError(kInputError, a.pred_csv + ": no predictions");
    auto gt = GroundTruthProjection::from_tensor(read_tensor(fs::path(a.gt_dir) / "gt_projection.cvt"));
    auto report = matching_success_ratio(pred, gt, a.thresholds);
    json_text = json{{"mode", "matching"}, {"report", report}}.dump(2);
    csv_text = matching_report_csv(report);
  } else if (a.mode == "localization") {
    auto rows = read_numeric_csv(a.pred_csv, 4);
    if (rows.empty()) throw CommandError(kInputError, a.pred_csv + ": no predictions");
    auto gt = load_gt_poses(a.gt_dir);
    std::map<int, PoseError> errors;  // sorted by id
    for (const auto& row : rows) {
      const int id = static_cast<int>(row.values[0]);
      auto it = gt.find(id);
      if (it == gt.end() || row.values[0] != id) {
        throw CommandError(kInputError, a.pred_csv + ":" + std::to_string(row.line) +
                                            ": no ground truth for id " + format_number(row.values[0]));
      }
      Pose3DoF pred(Vec2(row.values[1], row.values[2]), deg_to_rad(row.values[3]));
      if (!errors.emplace(id, pose_error(pred, it->second.first, it->second.second)).second) {
        throw CommandError(kInputError, a.pred_csv + ":" + std::to_string(row.line) +
                                            ": duplicate id " + std::to_string(id));
      }
    }
    std::vector<PoseError> list;
    json per_scene = json::array();
    for (const auto& [id, e] : errors) {
      list.push_back(e);
      per_scene.push_back({{"id", id}, {"translation_m", e.translation_m}, {"orientation_deg", e.orientation_deg}});
    }
    auto stats = localization_stats(list);
    json_text = json{{"mode", "localization"}, {"stats", stats}, {"per_scene", per_scene}}.dump(2);
    csv_text = localization_stats_csv(stats);
  } else {
    throw CommandError(kInputError, "unknown --mode '" + a.mode + "'");
  }

  if (a.out.empty()) {
    out << json_text << '\n';
  } else {
    fs::path json_path = a.out;
    fs::path csv_path = a.out;
    csv_path.replace_extension(".csv");
    if (csv_path == json_path) csv_path += ".csv";
    write_text_file(json_path, json_text);
    write_text_file(csv_path, csv_text);
  }
  return kOk;
}

// ---------------------------------------------------------------- loss

struct LossArgs {
  std::string scene_dir;
  std::string pred_pose;
  std::string config;
  std::optional<std::uint64_t> seed;
  double threshold = 0.5;
  std::string out;
};

int cmd_loss(const LossArgs& a, std::ostream& out) {
  auto b = load_scene(a.scene_dir);
  LossConfig lc;
  if (!a.config.empty()) lc = json::parse(read_text_file(a.config)).get<LossConfig>();
  if (a.seed) lc.rng_seed = *a.seed;
  lc.validate();
  Pose3DoF pred = json::parse(read_text_file(a.pred_pose)).get<Pose3DoF>();

  const auto conf = normalize_confidence(b.conf_logits);
  const auto surf_grd = surface_from_accumulation(conf, b.config.layers, a.threshold);
  const auto f_grd = fuse_height_features(b.ground_volume, conf, surf_grd);
  const auto s_orig = initial_similarity(f_grd, b.aerial);
  DepthAnchorOptions anchor;
  anchor.ground_anchor_m = b.ground_anchor_m;
  anchor.scale = b.depth_scale;
  const auto surf_sat = aerial_depth_to_height_index(b.depth_sat, b.config.layers, anchor);

  const auto pairs = sample_patch_pairs(b.config, b.gt_pose, lc);
  LossReport r;
  r.seed = lc.rng_seed;
  r.vce = vce_loss(pred, b.gt_pose, b.config.aerial, lc);
  r.matching = matching_loss(s_orig, pairs);
  r.height = height_loss(surf_grd, surf_sat, pairs, b.config.layers, lc);
  r.total = total_loss(r.vce, r.matching, r.height, lc);
  emit(json(r).dump(2), a.out, out);
  return kOk;
}

}  // namespace

void configure_logging() {
  static bool configured = false;
  if (!configured) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("crossview"));
    configured = true;
  }
  spdlog::level::level_enum level = spdlog::level::warn;
  if (const char* env = std::getenv("CROSSVIEW_LOG")) level = spdlog::level::from_str(env);
  spdlog::set_level(level);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-view BEV localization pipeline", "crossview"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic scene (or a batch of scenes)");
  g->add_option("--seed", gen.seed, "Scene seed (batch scenes use seed + index)");
  g->add_option("--n", gen.n, "BEV points per side (odd)");
  g->add_option("--extent", gen.extent_m, "BEV extent in metres");
  g->add_option("--noise", gen.noise, "Feature noise sigma");
  g->add_option("--channels", gen.channels, "Feature width");
  g->add_option("--count", gen.count, "Number of scenes");
  g->add_flag("--continuous", gen.continuous, "Draw off-lattice poses");
  g->add_option("--max-offset", gen.max_offset, "Largest camera offset in cells");
  g->add_option("--pano-h", gen.pano_h, "Panorama height (width is twice this)");
  g->add_option("--gsd", gen.gsd, "Aerial metres per pixel");
  g->add_option("--aerial-size", gen.aerial_size, "Aerial image side in pixels");
  g->add_option("--out-dir", gen.out_dir, "Output directory")->required();

  SolveArgs sol;
  double known_yaw = 0.0;
  auto* s = app.add_subcommand("solve", "Estimate the camera pose of a scene");
  s->add_option("--scene-dir", sol.scene_dir, "Scene directory written by generate");
  s->add_option("--config", sol.config, "Scene config JSON (with explicit tensors)");
  s->add_option("--ground-volume", sol.ground_volume, "M x N x N x C ground features");
  s->add_option("--conf-logits", sol.conf_logits, "M x N x N surface confidence logits");
  s->add_option("--aerial-features", sol.aerial_features, "N x N x c aerial BEV features");
  s->add_option("--refiner-params", sol.refiner_params, "Refiner parameter directory");
  s->add_option("--threshold", sol.threshold, "Surface accumulation threshold");
  s->add_option("--topk", sol.topk, "Number of matches fed to the solver");
  s->add_option("--tau", sol.tau, "Similarity temperature");
  auto* known = s->add_option("--known-yaw", known_yaw, "Known yaw in degrees (translation-only solve)");
  s->add_option("--window", sol.window, "Height fusion half-window in layers (default: all)");
  s->add_option("--correspondences", sol.correspondences_out, "Write gx,gy,ax,ay,w CSV");
  s->add_option("--pixel-matches", sol.pixel_matches_out, "Write xg,yg,xs,ys CSV");
  s->add_option("--out", sol.out, "Write the pose JSON here instead of stdout");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score predictions against ground truth");
  e->add_option("--pred-csv", ev.pred_csv, "Predictions CSV")->required();
  e->add_option("--gt-dir", ev.gt_dir, "Scene directory or directory of scenes")->required();
  e->add_option("--mode", ev.mode, "matching | localization")
      ->check(CLI::IsMember({"matching", "localization"}));
  e->add_option("--thresholds", ev.thresholds, "Pixel thresholds for matching mode")->delimiter(',');
  e->add_option("--out", ev.out, "JSON report path; a .csv is written alongside");

  LossArgs lo;
  std::uint64_t loss_seed = 0;
  auto* l = app.add_subcommand("loss", "Evaluate the training losses for a predicted pose");
  l->add_option("--scene-dir", lo.scene_dir, "Scene directory")->required();
  l->add_option("--pred-pose", lo.pred_pose, "Pose JSON (as written by solve)")->required();
  l->add_option("--config", lo.config, "Loss config JSON");
  auto* seed_opt = l->add_option("--seed", loss_seed, "Sampling seed (overrides config)");
  l->add_option("--threshold", lo.threshold, "Surface accumulation threshold");
  l->add_option("--out", lo.out, "Write the loss JSON here instead of stdout");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*g) return cmd_generate(gen, out);
    if (*s) {
      if (*known) sol.known_yaw_deg = known_yaw;
      return cmd_solve(sol, out);
    }
    if (*e) return cmd_eval(ev, out);
    if (*l) {
      if (*seed_opt) lo.seed = loss_seed;
      return cmd_loss(lo, out);
    }
  } catch (const CommandError& ex) {
    err << "error: " << ex.what() << '\n';
    return ex.code;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

}  // namespace crossview::cli

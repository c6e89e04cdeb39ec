#include "crossview/sim_refiner.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace crossview {
namespace {

int grid_side(Eigen::Index cells) {
  int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(cells))));
  if (static_cast<Eigen::Index>(n) * n != cells) {
    throw ShapeError("similarity matrix side " + std::to_string(cells) + " is not a square grid");
  }
  return n;
}

void check_dense_stack(const std::vector<DenseLayer>& stack, int in, int out,
                       const std::string& name) {
  int width = in;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const auto& l = stack[i];
    const std::string what = name + "." + std::to_string(i);
    if (l.weight.rank() != 2 || l.weight.dim(1) != width) {
      throw ShapeError(what + ".weight has dims " + format_dims(l.weight.dims()) +
                       ", expected input width " + std::to_string(width));
    }
    l.bias.expect_dims({l.weight.dim(0)}, what + ".bias");
    width = l.out_features();
  }
  if (!stack.empty() && width != out) {
    throw ShapeError(name + " ends at width " + std::to_string(width) + ", expected " +
                     std::to_string(out));
  }
}

// Row-wise affine stack with rectification between layers.
RowMatrix apply_dense_stack(const RowMatrix& x, const std::vector<DenseLayer>& stack) {
  RowMatrix h = x;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const auto& l = stack[i];
    RowMatrix w = tensor_to_matrix(l.weight, l.weight.dim(0), l.weight.dim(1));
    Vector b = tensor_to_vector(l.bias);
    RowMatrix next = (h * w.transpose()).rowwise() + b.transpose();
    if (i + 1 < stack.size()) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h;
}

// Zero-padded 3x3x3 cross-correlation over a (d0, d1, d2) volume per channel.
// Accumulates shifted copies along the contiguous d2 axis.
std::vector<double> conv3d(const std::vector<double>& in, int in_ch, int d0, int d1, int d2,
                           const Conv3dLayer& layer) {
  const int out_ch = layer.out_channels();
  const std::size_t vox = static_cast<std::size_t>(d0) * d1 * d2;
  std::vector<double> out(vox * out_ch);
  for (int o = 0; o < out_ch; ++o) {
    std::fill_n(out.begin() + o * vox, vox, static_cast<double>(layer.bias[o]));
  }
  for (int o = 0; o < out_ch; ++o) {
    double* dst = out.data() + o * vox;
    for (int i = 0; i < in_ch; ++i) {
      const double* src = in.data() + i * vox;
      for (int a = -1; a <= 1; ++a) {
        for (int b = -1; b <= 1; ++b) {
          for (int c = -1; c <= 1; ++c) {
            const double w = layer.weight.at({o, i, a + 1, b + 1, c + 1});
            if (w == 0.0) continue;
            const int z0 = std::max(0, -c);
            const int z1 = std::min(d2, d2 - c);
            for (int x = std::max(0, -a); x < std::min(d0, d0 - a); ++x) {
              for (int y = std::max(0, -b); y < std::min(d1, d1 - b); ++y) {
                double* drow = dst + (static_cast<std::size_t>(x) * d1 + y) * d2;
                const double* srow = src + (static_cast<std::size_t>(x + a) * d1 + (y + b)) * d2 + c;
                for (int z = z0; z < z1; ++z) drow[z] += w * srow[z];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor random_tensor(std::vector<std::int64_t> dims, std::mt19937_64& rng, double scale) {
  Tensor t(std::move(dims));
  std::uniform_real_distribution<float> dist(static_cast<float>(-scale), static_cast<float>(scale));
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

RefinerParams build_params(int num_cells, const RefinerConfig& cfg,
                           const std::function<Tensor(std::vector<std::int64_t>)>& make) {
  RefinerParams p;
  for (std::size_t i = 0; i + 1 < cfg.conv_channels.size(); ++i) {
    const int in = cfg.conv_channels[i];
    const int out = cfg.conv_channels[i + 1];
    p.local_conv.push_back({make({out, in, 3, 3, 3}), make({out})});
  }
  p.global_mlp.push_back({make({cfg.global_hidden, num_cells}), make({cfg.global_hidden})});
  p.global_mlp.push_back({make({num_cells, cfg.global_hidden}), make({num_cells})});
  p.gate_mlp.push_back({make({cfg.gate_hidden, num_cells}), make({cfg.gate_hidden})});
  p.gate_mlp.push_back({make({1, cfg.gate_hidden}), make({1})});
  p.dustbin_row = make({num_cells});
  p.dustbin_col = make({num_cells});
  p.dustbin_theta = make({1});
  return p;
}

struct NamedTensor {
  std::string name;
  const Tensor* tensor;
};

std::vector<NamedTensor> named_tensors(const RefinerParams& p) {
  std::vector<NamedTensor> out;
  auto add_stack = [&](const std::string& prefix, const auto& stack) {
    for (std::size_t i = 0; i < stack.size(); ++i) {
      out.push_back({prefix + "." + std::to_string(i) + ".weight", &stack[i].weight});
      out.push_back({prefix + "." + std::to_string(i) + ".bias", &stack[i].bias});
    }
  };
  add_stack("local_conv", p.local_conv);
  add_stack("global_mlp", p.global_mlp);
  add_stack("gate_mlp", p.gate_mlp);
  out.push_back({"dustbin.row", &p.dustbin_row});
  out.push_back({"dustbin.col", &p.dustbin_col});
  out.push_back({"dustbin.theta", &p.dustbin_theta});
  return out;
}

}  // namespace

void RefinerParams::validate(int num_cells) const {
  grid_side(num_cells);
  int ch = 1;
  for (std::size_t i = 0; i < local_conv.size(); ++i) {
    const auto& l = local_conv[i];
    const std::string what = "local_conv." + std::to_string(i);
    if (l.weight.rank() != 5 || l.weight.dim(1) != ch || l.weight.dim(2) != 3 ||
        l.weight.dim(3) != 3 || l.weight.dim(4) != 3) {
      throw ShapeError(what + ".weight has dims " + format_dims(l.weight.dims()) +
                       ", expected [out x " + std::to_string(ch) + " x 3x3x3]");
    }
    l.bias.expect_dims({l.weight.dim(0)}, what + ".bias");
    ch = l.out_channels();
  }
  if (!local_conv.empty() && ch != 1) throw ShapeError("local_conv must end with one channel");
  check_dense_stack(global_mlp, num_cells, num_cells, "global_mlp");
  if (gate_mlp.empty()) throw ShapeError("gate_mlp must have at least one layer");
  check_dense_stack(gate_mlp, num_cells, 1, "gate_mlp");
  dustbin_row.expect_dims({num_cells}, "dustbin.row");
  dustbin_col.expect_dims({num_cells}, "dustbin.col");
  dustbin_theta.expect_dims({1}, "dustbin.theta");
}

RefinerParams RefinerParams::zeros(int num_cells, const RefinerConfig& cfg) {
  return build_params(num_cells, cfg, [](std::vector<std::int64_t> d) { return Tensor(std::move(d)); });
}

RefinerParams RefinerParams::random(int num_cells, std::uint64_t seed, double scale,
                                    const RefinerConfig& cfg) {
  std::mt19937_64 rng(seed);
  return build_params(num_cells, cfg, [&](std::vector<std::int64_t> d) {
    return random_tensor(std::move(d), rng, scale);
  });
}

RefinerParams RefinerParams::passthrough(int num_cells, const RefinerConfig& cfg) {
  RefinerParams p = zeros(num_cells, cfg);
  p.local_conv.clear();
  p.global_mlp.clear();
  p.gate_mlp.back().bias[0] = -100.0f;
  return p;
}

bool operator==(const RefinerParams& a, const RefinerParams& b) {
  auto na = named_tensors(a);
  auto nb = named_tensors(b);
  if (na.size() != nb.size()) return false;
  for (std::size_t i = 0; i < na.size(); ++i) {
    if (na[i].name != nb[i].name || !(*na[i].tensor == *nb[i].tensor)) return false;
  }
  return true;
}

void save_refiner_params(const std::filesystem::path& dir, const RefinerParams& params) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "crossview-refiner";
  manifest["version"] = 1;
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& [name, tensor] : named_tensors(params)) {
    const std::string file = name + ".cvt";
    write_tensor(dir / file, *tensor);
    manifest["tensors"].push_back({{"name", name}, {"file", file}, {"dims", tensor->dims()}});
  }
  write_text_file(dir / "manifest.json", manifest.dump(2));
}

RefinerParams load_refiner_params(const std::filesystem::path& dir) {
  auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  if (manifest.value("format", "") != "crossview-refiner") {
    throw TensorIoError(dir.string() + ": not a refiner parameter directory");
  }
  RefinerParams p;
  auto slot = [](auto& stack, std::size_t idx) -> auto& {
    if (stack.size() <= idx) stack.resize(idx + 1);
    return stack[idx];
  };
  for (const auto& entry : manifest.at("tensors")) {
    const std::string name = entry.at("name");
    Tensor t = read_tensor(dir / entry.at("file").get<std::string>());
    t.expect_dims(entry.at("dims").get<std::vector<std::int64_t>>(), name + " (manifest)");

    if (name == "dustbin.row") {
      p.dustbin_row = std::move(t);
    } else if (name == "dustbin.col") {
      p.dustbin_col = std::move(t);
    } else if (name == "dustbin.theta") {
      p.dustbin_theta = std::move(t);
    } else {
      auto first = name.find('.');
      auto second = name.find('.', first + 1);
      if (first == std::string::npos || second == std::string::npos) {
        throw TensorIoError("unknown refiner tensor '" + name + "'");
      }
      const std::string stack = name.substr(0, first);
      const auto idx = std::stoul(name.substr(first + 1, second - first - 1));
      const std::string field = name.substr(second + 1);
      auto assign = [&](auto& layer) {
        if (field == "weight") {
          layer.weight = std::move(t);
        } else if (field == "bias") {
          layer.bias = std::move(t);
        } else {
          throw TensorIoError("unknown refiner tensor '" + name + "'");
        }
      };
      if (stack == "local_conv") {
        assign(slot(p.local_conv, idx));
      } else if (stack == "global_mlp") {
        assign(slot(p.global_mlp, idx));
      } else if (stack == "gate_mlp") {
        assign(slot(p.gate_mlp, idx));
      } else {
        throw TensorIoError("unknown refiner tensor '" + name + "'");
      }
    }
  }
  p.validate(static_cast<int>(p.dustbin_row.size()));
  return p;
}

SimilarityMatrix initial_similarity(const BevFeatureMap& f_grd, const BevFeatureMap& f_sat,
                                    double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (f_grd.grid.n_points_per_side != f_sat.grid.n_points_per_side ||
      f_grd.data.rows() != f_sat.data.rows()) {
    throw ShapeError("ground and aerial BEV grids differ in size");
  }
  if (f_grd.channels() != f_sat.channels()) {
    throw ShapeError("ground and aerial BEV features differ in channel width");
  }
  auto normalized = [](const RowMatrix& f, const char* view) {
    Vector norms = f.rowwise().norm();
    for (Eigen::Index i = 0; i < norms.size(); ++i) {
      if (!(norms[i] > 0.0) || !std::isfinite(norms[i])) {
        throw std::invalid_argument(std::string(view) + " feature row " + std::to_string(i) +
                                    " has zero or non-finite norm");
      }
    }
    return RowMatrix(norms.cwiseInverse().asDiagonal() * f);
  };
  SimilarityMatrix out;
  out.tau = tau;
  const RowMatrix g = normalized(f_grd.data, "ground") / tau;
  out.s.noalias() = g * normalized(f_sat.data, "aerial").transpose();
  return out;
}

RowMatrix local_residual(const SimilarityMatrix& s, const RefinerParams& params) {
  const auto cells = s.s.rows();
  if (s.s.cols() != cells) throw ShapeError("similarity matrix must be square");
  if (params.local_conv.empty()) return RowMatrix::Zero(cells, cells);
  params.validate(static_cast<int>(cells));
  const int n = grid_side(cells);
  const int d2 = static_cast<int>(cells);

  // Cube[ix][iy][k] = S[ix * N + iy][k], which is exactly the row-major layout of S.
  std::vector<double> act(s.s.data(), s.s.data() + s.s.size());
  int ch = 1;
  for (std::size_t i = 0; i < params.local_conv.size(); ++i) {
    act = conv3d(act, ch, n, n, d2, params.local_conv[i]);
    ch = params.local_conv[i].out_channels();
    if (i + 1 < params.local_conv.size()) {
      for (auto& v : act) v = std::max(v, 0.0);
    }
  }
  return Eigen::Map<RowMatrix>(act.data(), cells, cells);
}

RowMatrix global_residual(const SimilarityMatrix& s, const RefinerParams& params) {
  const auto cells = s.s.rows();
  if (s.s.cols() != cells) throw ShapeError("similarity matrix must be square");
  if (params.global_mlp.empty()) return RowMatrix::Zero(cells, cells);
  check_dense_stack(params.global_mlp, static_cast<int>(cells), static_cast<int>(cells),
                    "global_mlp");
  return apply_dense_stack(s.s, params.global_mlp);
}

Vector gate_ratios(const SimilarityMatrix& s, const RefinerParams& params) {
  const auto cells = s.s.rows();
  if (params.gate_mlp.empty()) throw ShapeError("gate_mlp must have at least one layer");
  check_dense_stack(params.gate_mlp, static_cast<int>(cells), 1, "gate_mlp");
  RowMatrix logits = apply_dense_stack(s.s, params.gate_mlp);
  return logits.col(0).unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
}

SimilarityMatrix refine(const SimilarityMatrix& s, const RefinerParams& params) {
  params.validate(static_cast<int>(s.s.rows()));
  Vector alpha = gate_ratios(s, params);
  RowMatrix delta = local_residual(s, params) + global_residual(s, params);
  return {s.s + alpha.asDiagonal() * delta, s.tau};
}

RowMatrix dustbin_extend(const SimilarityMatrix& s, const RefinerParams& params) {
  const auto cells = s.s.rows();
  if (s.s.cols() != cells) throw ShapeError("similarity matrix must be square");
  params.dustbin_row.expect_dims({cells}, "dustbin.row");
  params.dustbin_col.expect_dims({cells}, "dustbin.col");
  params.dustbin_theta.expect_dims({1}, "dustbin.theta");
  RowMatrix out(cells + 1, cells + 1);
  out.topLeftCorner(cells, cells) = s.s;
  out.col(cells).head(cells) = tensor_to_vector(params.dustbin_col);
  out.row(cells).head(cells) = tensor_to_vector(params.dustbin_row).transpose();
  out(cells, cells) = params.dustbin_theta[0];
  return out;
}

SoftmaxParts dual_softmax(const RowMatrix& sd) {
  if (!sd.allFinite()) throw std::invalid_argument("dustbin matrix has non-finite entries");
  SoftmaxParts parts;
  const double hi = sd.maxCoeff();
  if (hi - sd.minCoeff() < 600.0) {
    // Shared exponential for both directions.
    const RowMatrix e = (sd.array() - hi).exp().matrix();
    parts.row = e.array().colwise() / e.rowwise().sum().array();
    parts.col = e.array().rowwise() / e.colwise().sum().array();
    return parts;
  }
  parts.row = (sd.colwise() - sd.rowwise().maxCoeff()).array().exp().matrix();
  parts.row = parts.row.array().colwise() / parts.row.rowwise().sum().array();
  parts.col = (sd.rowwise() - sd.colwise().maxCoeff()).array().exp().matrix();
  parts.col = parts.col.array().rowwise() / parts.col.colwise().sum().array();
  return parts;
}

MatchProbabilities normalize_doubly_stochastic(const RowMatrix& s_dustbin) {
  if (s_dustbin.rows() != s_dustbin.cols() || s_dustbin.rows() < 2) {
    throw ShapeError("dustbin matrix must be square with at least one patch");
  }
  if (!s_dustbin.allFinite()) throw std::invalid_argument("dustbin matrix has non-finite entries");
  const auto cells = s_dustbin.rows() - 1;
  MatchProbabilities out;
  const double hi = s_dustbin.maxCoeff();
  if (hi - s_dustbin.minCoeff() < 600.0) {
    // row(i, j) * col(i, j) = e(i, j)^2 / (rowsum(i) * colsum(j)).
    out.p = (s_dustbin.array() - hi).exp().matrix();
    const Vector row_sum = out.p.rowwise().sum();
    const Vector col_sum = out.p.colwise().sum().transpose();
    out.p.conservativeResize(cells, cells);
    out.p.array() = out.p.array().square().colwise() / row_sum.head(cells).array();
    out.p.array().rowwise() /= col_sum.head(cells).transpose().array();
    return out;
  }
  auto parts = dual_softmax(s_dustbin);
  out.p = parts.row.topLeftCorner(cells, cells).cwiseProduct(parts.col.topLeftCorner(cells, cells));
  return out;
}

std::vector<PatchMatch> extract_matches(const MatchProbabilities& probs, int k, bool mutual_first) {
  if (k <= 0) throw std::invalid_argument("number of matches must be positive");
  const RowMatrix& p = probs.p;
  const auto rows = p.rows();
  const auto cols = p.cols();
  if (static_cast<double>(k) > static_cast<double>(rows) * cols) {
    throw std::invalid_argument("more matches requested than matrix entries");
  }
  // Descending value, then ascending (row, col).
  auto before = [&](std::int64_t a, std::int64_t b) {
    const double va = p.data()[a];
    const double vb = p.data()[b];
    if (va != vb) return va > vb;
    return a < b;
  };

  std::vector<std::int64_t> chosen;
  if (mutual_first) {
    std::vector<Eigen::Index> row_best(rows, 0);
    std::vector<Eigen::Index> col_best(cols, 0);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (p(r, c) > p(r, row_best[r])) row_best[r] = c;
        if (p(r, c) > p(col_best[c], c)) col_best[c] = r;
      }
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (col_best[row_best[r]] == r) chosen.push_back(r * cols + row_best[r]);
    }
    std::sort(chosen.begin(), chosen.end(), before);
    if (chosen.size() > static_cast<std::size_t>(k)) chosen.resize(k);
  }

  if (chosen.size() < static_cast<std::size_t>(k)) {
    const std::size_t need = k + chosen.size();
    std::vector<std::int64_t> order(static_cast<std::size_t>(rows * cols));
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + std::min(need, order.size()), order.end(),
                      before);
    std::vector<std::int64_t> taken = chosen;
    std::sort(taken.begin(), taken.end());
    for (std::size_t i = 0; i < order.size() && chosen.size() < static_cast<std::size_t>(k); ++i) {
      if (!std::binary_search(taken.begin(), taken.end(), order[i])) chosen.push_back(order[i]);
    }
  }

  std::vector<PatchMatch> out;
  out.reserve(chosen.size());
  for (auto idx : chosen) {
    out.push_back({static_cast<int>(idx / cols), static_cast<int>(idx % cols), p.data()[idx]});
  }
  return out;
}

}  // namespace crossview

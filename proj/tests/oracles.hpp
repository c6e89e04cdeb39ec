#pragma once

// Straightforward reference implementations used as test oracles. They favour
// obviousness over speed and share no code with the library kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "crossview/bev_geometry.hpp"
#include "crossview/evaluation.hpp"
#include "crossview/losses.hpp"
#include "crossview/matrix.hpp"
#include "crossview/sim_refiner.hpp"
#include "crossview/surface_model.hpp"

namespace crossview::oracle {

/// First layer whose running sum strictly exceeds the threshold, else the top layer.
inline int surface_scan(const std::vector<double>& column, double threshold) {
  double acc = 0.0;
  for (std::size_t k = 0; k < column.size(); ++k) {
    acc += column[k];
    if (acc > threshold) return static_cast<int>(k);
  }
  return static_cast<int>(column.size()) - 1;
}

/// Zero-padded 3x3x3 cross-correlation, one output voxel at a time.
/// `in` is indexed [channel][x][y][z].
inline std::vector<double> conv3d(const std::vector<double>& in, int in_ch, int d0, int d1, int d2,
                                  const Conv3dLayer& layer) {
  const int out_ch = layer.out_channels();
  auto idx = [&](int c, int x, int y, int z) {
    return ((static_cast<std::size_t>(c) * d0 + x) * d1 + y) * d2 + z;
  };
  std::vector<double> out(static_cast<std::size_t>(out_ch) * d0 * d1 * d2);
  for (int o = 0; o < out_ch; ++o) {
    for (int x = 0; x < d0; ++x) {
      for (int y = 0; y < d1; ++y) {
        for (int z = 0; z < d2; ++z) {
          double acc = layer.bias[o];
          for (int i = 0; i < in_ch; ++i) {
            for (int a = 0; a < 3; ++a) {
              for (int b = 0; b < 3; ++b) {
                for (int c = 0; c < 3; ++c) {
                  const int xx = x + a - 1;
                  const int yy = y + b - 1;
                  const int zz = z + c - 1;
                  if (xx < 0 || yy < 0 || zz < 0 || xx >= d0 || yy >= d1 || zz >= d2) continue;
                  acc += layer.weight.at({o, i, a, b, c}) * in[idx(i, xx, yy, zz)];
                }
              }
            }
          }
          out[idx(o, x, y, z)] = acc;
        }
      }
    }
  }
  return out;
}

/// Convolution stack over the N x N x N^2 similarity cube with ReLU between layers.
inline RowMatrix local_residual(const RowMatrix& s, const RefinerParams& p) {
  const int cells = static_cast<int>(s.rows());
  const int n = static_cast<int>(std::lround(std::sqrt(cells)));
  std::vector<double> act(static_cast<std::size_t>(cells) * cells);
  for (int ix = 0; ix < n; ++ix) {
    for (int iy = 0; iy < n; ++iy) {
      for (int k = 0; k < cells; ++k) {
        act[(static_cast<std::size_t>(ix) * n + iy) * cells + k] = s(ix * n + iy, k);
      }
    }
  }
  int ch = 1;
  for (std::size_t l = 0; l < p.local_conv.size(); ++l) {
    act = conv3d(act, ch, n, n, cells, p.local_conv[l]);
    ch = p.local_conv[l].out_channels();
    if (l + 1 < p.local_conv.size()) {
      for (auto& v : act) v = v > 0.0 ? v : 0.0;
    }
  }
  RowMatrix out(cells, cells);
  for (int ix = 0; ix < n; ++ix) {
    for (int iy = 0; iy < n; ++iy) {
      for (int k = 0; k < cells; ++k) {
        out(ix * n + iy, k) = act[(static_cast<std::size_t>(ix) * n + iy) * cells + k];
      }
    }
  }
  return out;
}

/// Explicit-loop affine stack applied to one input vector.
inline std::vector<double> dense_stack(std::vector<double> x, const std::vector<DenseLayer>& stack) {
  for (std::size_t l = 0; l < stack.size(); ++l) {
    const auto& layer = stack[l];
    std::vector<double> y(layer.out_features());
    for (int o = 0; o < layer.out_features(); ++o) {
      double acc = layer.bias[o];
      for (int i = 0; i < layer.in_features(); ++i) acc += layer.weight.at({o, i}) * x[i];
      y[o] = (l + 1 < stack.size() && acc < 0.0) ? 0.0 : acc;
    }
    x = std::move(y);
  }
  return x;
}

inline RowMatrix global_residual(const RowMatrix& s, const RefinerParams& p) {
  RowMatrix out(s.rows(), s.cols());
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    std::vector<double> row(s.cols());
    for (Eigen::Index c = 0; c < s.cols(); ++c) row[c] = s(r, c);
    auto y = dense_stack(row, p.global_mlp);
    for (Eigen::Index c = 0; c < s.cols(); ++c) out(r, c) = y[c];
  }
  return out;
}

/// Mutual maxima by (value desc, index asc), then padding from the global order.
inline std::vector<PatchMatch> extract_matches(const RowMatrix& p, int k) {
  const auto rows = p.rows();
  const auto cols = p.cols();
  struct Entry {
    double v;
    std::int64_t idx;
  };
  auto order = [](const Entry& a, const Entry& b) { return a.v != b.v ? a.v > b.v : a.idx < b.idx; };
  std::vector<Entry> mutual;
  for (Eigen::Index r = 0; r < rows; ++r) {
    Eigen::Index best_c = 0;
    for (Eigen::Index c = 1; c < cols; ++c) {
      if (p(r, c) > p(r, best_c)) best_c = c;
    }
    Eigen::Index best_r = 0;
    for (Eigen::Index rr = 1; rr < rows; ++rr) {
      if (p(rr, best_c) > p(best_r, best_c)) best_r = rr;
    }
    if (best_r == r) mutual.push_back({p(r, best_c), r * cols + best_c});
  }
  std::sort(mutual.begin(), mutual.end(), order);
  if (mutual.size() > static_cast<std::size_t>(k)) mutual.resize(k);
  std::vector<Entry> all;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) all.push_back({p(r, c), r * cols + c});
  }
  std::sort(all.begin(), all.end(), order);
  for (const auto& e : all) {
    if (mutual.size() >= static_cast<std::size_t>(k)) break;
    bool seen = false;
    for (const auto& m : mutual) seen = seen || m.idx == e.idx;
    if (!seen) mutual.push_back(e);
  }
  std::vector<PatchMatch> out;
  for (const auto& e : mutual) {
    out.push_back({static_cast<int>(e.idx / cols), static_cast<int>(e.idx % cols), e.v});
  }
  return out;
}

/// Average of the two InfoNCE directions with plain exp/log loops.
inline double matching_loss(const RowMatrix& s, const std::vector<PatchPair>& pairs) {
  double g2s = 0.0;
  double s2g = 0.0;
  for (const auto& pp : pairs) {
    long double row = 0.0L;
    long double col = 0.0L;
    for (Eigen::Index j = 0; j < s.cols(); ++j) row += std::exp(static_cast<long double>(s(pp.ground, j)));
    for (Eigen::Index i = 0; i < s.rows(); ++i) col += std::exp(static_cast<long double>(s(i, pp.aerial)));
    const double logit = s(pp.ground, pp.aerial);
    g2s += static_cast<double>(std::log(row)) - logit;
    s2g += static_cast<double>(std::log(col)) - logit;
  }
  return 0.5 * (g2s + s2g) / static_cast<double>(pairs.size());
}

/// Forward-projects one panorama pixel with its depth through the pose.
struct PixelProjection {
  bool valid = false;
  Vec2 px = Vec2::Zero();
};

inline PixelProjection project_pixel(double depth, int u, int v, const CameraIntrinsics& intr,
                                     const Pose3DoF& gt, const AerialMeta& meta, double max_range) {
  PixelProjection r;
  if (!(depth > 0.0)) return r;
  const double pi = std::numbers::pi;
  const double az = (static_cast<double>(u) / intr.panorama_width - 0.5) * 2.0 * pi + intr.azimuth_offset_rad;
  const double el = (0.5 - static_cast<double>(v) / intr.panorama_height) * pi;
  const double x = depth * std::cos(el) * std::cos(az);
  const double y = depth * std::cos(el) * std::sin(az);
  const double c = std::cos(gt.yaw_rad);
  const double s = std::sin(gt.yaw_rad);
  r.px = Vec2(gt.t_px.x() + (c * x - s * y) / meta.gsd_m_per_px,
              gt.t_px.y() + (s * x + c * y) / meta.gsd_m_per_px);
  r.valid = depth <= max_range && r.px.x() >= 0 && r.px.y() >= 0 && r.px.x() < meta.image_size_px &&
            r.px.y() < meta.image_size_px;
  return r;
}

/// Uniform random confidence column normalised to sum one.
inline std::vector<double> random_column(std::mt19937_64& rng, int m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> col(m);
  double sum = 0.0;
  for (auto& v : col) {
    const double x = u(rng);
    v = x * x * x;
    sum += v;
  }
  for (auto& v : col) v /= sum;
  return col;
}

inline RowMatrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                               double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

}  // namespace crossview::oracle

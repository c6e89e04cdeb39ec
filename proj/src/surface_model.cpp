#include "crossview/surface_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crossview {

void FeatureVolume::validate() const {
  layers.validate();
  grid.validate();
  const auto m = static_cast<std::int64_t>(layers.num_layers);
  const auto n = static_cast<std::int64_t>(grid.n_points_per_side);
  if (data.rank() != 4 || data.dim(0) != m || data.dim(1) != n || data.dim(2) != n) {
    throw ShapeError("feature volume dims " + format_dims(data.dims()) + " do not match " +
                     std::to_string(m) + " layers on a " + std::to_string(n) + "-point grid");
  }
  for (float v : data.values()) {
    if (!std::isfinite(v)) throw std::invalid_argument("feature volume has non-finite entries");
  }
}

ProjectionHead ProjectionHead::from_tensors(const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2) throw ShapeError("projection weight must be rank 2");
  bias.expect_dims({weight.dim(0)}, "projection bias");
  return {tensor_to_matrix(weight, weight.dim(0), weight.dim(1)), tensor_to_vector(bias)};
}

ConfidenceVolume normalize_confidence(const Tensor& raw_logits) {
  if (raw_logits.rank() != 3 || raw_logits.dim(1) != raw_logits.dim(2)) {
    throw ShapeError("confidence logits must be M x N x N, got " + format_dims(raw_logits.dims()));
  }
  ConfidenceVolume out;
  out.num_layers = static_cast<int>(raw_logits.dim(0));
  out.n = static_cast<int>(raw_logits.dim(1));
  const std::size_t cells = static_cast<std::size_t>(out.n) * out.n;
  out.conf.resize(raw_logits.size());
  for (std::size_t cell = 0; cell < cells; ++cell) {
    double peak = -INFINITY;
    for (int k = 0; k < out.num_layers; ++k) {
      double v = raw_logits[k * cells + cell];
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite confidence logit");
      peak = std::max(peak, v);
    }
    double total = 0.0;
    for (int k = 0; k < out.num_layers; ++k) {
      double e = std::exp(raw_logits[k * cells + cell] - peak);
      out.conf[k * cells + cell] = e;
      total += e;
    }
    for (int k = 0; k < out.num_layers; ++k) out.conf[k * cells + cell] /= total;
  }
  return out;
}

SurfaceMap surface_from_accumulation(const ConfidenceVolume& conf, const HeightLayerSpec& layers,
                                     double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("accumulation threshold must lie in (0, 1)");
  }
  if (conf.num_layers != layers.num_layers) {
    throw ShapeError("confidence volume has " + std::to_string(conf.num_layers) +
                     " layers, spec has " + std::to_string(layers.num_layers));
  }
  const int cells = conf.n * conf.n;
  SurfaceMap surf;
  surf.n = conf.n;
  surf.index.assign(cells, conf.num_layers - 1);
  surf.height_m.resize(cells);
  for (int cell = 0; cell < cells; ++cell) {
    double cumulative = 0.0;
    for (int k = 0; k < conf.num_layers; ++k) {
      cumulative += conf.at(k, cell);
      if (cumulative > threshold) {
        surf.index[cell] = k;
        break;
      }
    }
    surf.height_m[cell] = layers.layer_height(surf.index[cell]);
  }
  return surf;
}

BevFeatureMap fuse_height_features(const FeatureVolume& vol, const ConfidenceVolume& conf,
                                   const SurfaceMap& surf, const FusionOptions& opts) {
  vol.validate();
  const int m = vol.layers.num_layers;
  const int n = vol.grid.n_points_per_side;
  const int ch = vol.channels();
  if (conf.num_layers != m || conf.n != n) throw ShapeError("confidence volume does not match features");
  if (surf.n != n) throw ShapeError("surface map does not match feature grid");
  if (opts.window < 0) throw std::invalid_argument("fusion window must be non-negative");

  const int cells = n * n;
  RowMatrix fused = RowMatrix::Zero(cells, ch);
  const float* src = vol.data.data();
  for (int cell = 0; cell < cells; ++cell) {
    const int s = surf.index[cell];
    if (s < 0 || s >= m) throw std::out_of_range("surface index outside layer range");
    const int lo = std::max(0, s - std::min(opts.window, m));
    const int hi = std::min(m - 1, s + std::min(opts.window, m));
    double total = 0.0;
    for (int k = lo; k <= hi; ++k) total += conf.at(k, cell);
    for (int k = lo; k <= hi; ++k) {
      // Underflowed windows fall back to a plain average.
      const double w = total > 0.0 ? conf.at(k, cell) / total : 1.0 / (hi - lo + 1);
      const float* v = src + (static_cast<std::size_t>(k) * cells + cell) * ch;
      for (int c = 0; c < ch; ++c) fused(cell, c) += w * v[c];
    }
  }

  BevFeatureMap out{vol.grid, {}};
  if (opts.head) {
    const auto& head = *opts.head;
    if (head.weight.cols() != ch) {
      throw ShapeError("projection head expects " + std::to_string(head.weight.cols()) +
                       " input channels, volume has " + std::to_string(ch));
    }
    if (opts.out_channels != 0 && head.weight.rows() != opts.out_channels) {
      throw ShapeError("projection head width does not match requested output channels");
    }
    out.data = (fused * head.weight.transpose()).rowwise() + head.bias.transpose();
  } else {
    if (opts.out_channels != 0 && opts.out_channels != ch) {
      throw ShapeError("projection weights required to map " + std::to_string(ch) + " -> " +
                       std::to_string(opts.out_channels) + " channels");
    }
    out.data = std::move(fused);
  }
  return out;
}

int nearest_layer_index(const HeightLayerSpec& layers, double height_m) {
  const double f = (height_m - layers.z_min_m) / layers.spacing_m();
  const double idx = std::ceil(f - 0.5);
  return static_cast<int>(std::clamp(idx, 0.0, static_cast<double>(layers.num_layers - 1)));
}

SurfaceMap aerial_depth_to_height_index(const Tensor& depth, const HeightLayerSpec& layers,
                                        const DepthAnchorOptions& opts) {
  if (depth.rank() != 2 || depth.dim(0) != depth.dim(1)) {
    throw ShapeError("aerial depth must be N x N, got " + format_dims(depth.dims()));
  }
  float lo = INFINITY;
  float hi = -INFINITY;
  for (float v : depth.values()) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite aerial depth");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  SurfaceMap surf;
  surf.n = static_cast<int>(depth.dim(0));
  surf.index.resize(depth.size());
  surf.height_m.resize(depth.size());

  const double range = static_cast<double>(hi) - lo;
  surf.degenerate = !(range > 0.0);
  double scale = 0.0;
  if (!surf.degenerate) {
    scale = opts.scale ? *opts.scale : (layers.z_max_m - opts.ground_anchor_m) / range;
  }
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double h = opts.ground_anchor_m + scale * (static_cast<double>(depth[i]) - lo);
    surf.index[i] = nearest_layer_index(layers, h);
    surf.height_m[i] = layers.layer_height(surf.index[i]);
  }
  return surf;
}

Tensor surface_to_tensor(const SurfaceMap& surf) {
  Tensor t({surf.n, surf.n});
  for (std::size_t i = 0; i < surf.index.size(); ++i) t[i] = static_cast<float>(surf.index[i]);
  return t;
}

}  // namespace crossview

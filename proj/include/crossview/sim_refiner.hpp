#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "crossview/matrix.hpp"
#include "crossview/surface_model.hpp"
#include "crossview/tensor.hpp"

namespace crossview {

/// Patch similarity scores: row i holds ground patch i against every aerial patch.
struct SimilarityMatrix {
  RowMatrix s;
  double tau = 0.1;
};

/// 3x3x3 convolution, weight dims out x in x 3 x 3 x 3.
struct Conv3dLayer {
  Tensor weight;
  Tensor bias;

  int in_channels() const { return static_cast<int>(weight.dim(1)); }
  int out_channels() const { return static_cast<int>(weight.dim(0)); }
};

/// Affine layer, weight dims out x in.
struct DenseLayer {
  Tensor weight;
  Tensor bias;

  int in_features() const { return static_cast<int>(weight.dim(1)); }
  int out_features() const { return static_cast<int>(weight.dim(0)); }
};

struct RefinerConfig {
  std::vector<int> conv_channels{1, 8, 8, 1};
  int global_hidden = 256;
  int gate_hidden = 64;
};

/// Learned parameters of the similarity refiner. An empty local_conv or
/// global_mlp stack disables that residual branch.
struct RefinerParams {
  std::vector<Conv3dLayer> local_conv;
  std::vector<DenseLayer> global_mlp;
  std::vector<DenseLayer> gate_mlp;
  Tensor dustbin_row;    // N^2
  Tensor dustbin_col;    // N^2
  Tensor dustbin_theta;  // scalar stored as [1]

  /// Throws ShapeError unless every tensor is consistent with `num_cells` = N^2.
  void validate(int num_cells) const;

  /// All-zero parameters: zero residuals, alpha = 0.5, zero dustbin scores.
  static RefinerParams zeros(int num_cells, const RefinerConfig& cfg = {});
  /// Seeded uniform(-scale, scale) parameters; values are float-exact.
  static RefinerParams random(int num_cells, std::uint64_t seed, double scale = 0.1,
                              const RefinerConfig& cfg = {});
  /// Identity-behaviour parameters: no residual branches, closed gate, zero dustbin.
  static RefinerParams passthrough(int num_cells, const RefinerConfig& cfg = {});

  friend bool operator==(const RefinerParams&, const RefinerParams&);
};

void save_refiner_params(const std::filesystem::path& dir, const RefinerParams& params);
RefinerParams load_refiner_params(const std::filesystem::path& dir);

/// Scaled cosine similarity between flattened BEV features.
SimilarityMatrix initial_similarity(const BevFeatureMap& f_grd, const BevFeatureMap& f_sat,
                                    double tau = 0.1);

/// Three-layer 3D convolution over the N x N x N^2 similarity cube.
RowMatrix local_residual(const SimilarityMatrix& s, const RefinerParams& params);
/// Row-wise MLP over the similarity matrix.
RowMatrix global_residual(const SimilarityMatrix& s, const RefinerParams& params);
/// Per-ground-patch gate in [0, 1] computed from each similarity row.
Vector gate_ratios(const SimilarityMatrix& s, const RefinerParams& params);

/// S + alpha * (local + global), alpha broadcast along rows.
SimilarityMatrix refine(const SimilarityMatrix& s, const RefinerParams& params);

/// [[S, b_col], [b_row^T, b_theta]].
RowMatrix dustbin_extend(const SimilarityMatrix& s, const RefinerParams& params);

struct SoftmaxParts {
  RowMatrix row;  // each row sums to one
  RowMatrix col;  // each column sums to one
};
SoftmaxParts dual_softmax(const RowMatrix& s_dustbin);

struct MatchProbabilities {
  RowMatrix p;
};

/// Hadamard product of row- and column-softmax, cropped to the patch block.
MatchProbabilities normalize_doubly_stochastic(const RowMatrix& s_dustbin);

struct PatchMatch {
  int ground = 0;
  int aerial = 0;
  double weight = 0.0;
  friend bool operator==(const PatchMatch&, const PatchMatch&) = default;
};

/// Top-k matches: mutual row/column maxima first (by value), then padded from
/// the global ranking. Ties resolve to the lowest (row, col).
std::vector<PatchMatch> extract_matches(const MatchProbabilities& p, int k,
                                        bool mutual_first = true);

}  // namespace crossview

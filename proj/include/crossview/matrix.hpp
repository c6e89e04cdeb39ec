#pragma once

#include <Eigen/Core>

#include "crossview/tensor.hpp"

namespace crossview {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Views a tensor as a (rows x cols) matrix by collapsing leading axes.
inline RowMatrix tensor_to_matrix(const Tensor& t, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<std::size_t>(rows * cols) != t.size()) {
    throw ShapeError("cannot view tensor " + format_dims(t.dims()) + " as " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  return Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
             t.data(), rows, cols)
      .cast<double>();
}

inline Tensor matrix_to_tensor(const RowMatrix& m, std::vector<std::int64_t> dims) {
  Tensor t(std::move(dims));
  if (t.size() != static_cast<std::size_t>(m.size())) {
    throw ShapeError("matrix of " + std::to_string(m.size()) + " values into tensor " +
                     format_dims(t.dims()));
  }
  Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      t.data(), m.rows(), m.cols()) = m.cast<float>();
  return t;
}

inline Vector tensor_to_vector(const Tensor& t) {
  return Eigen::Map<const Eigen::VectorXf>(t.data(), static_cast<Eigen::Index>(t.size()))
      .cast<double>();
}

}  // namespace crossview

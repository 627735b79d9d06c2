#pragma once

#include <algorithm>

#include <Eigen/Core>

namespace shnet::ops::internal {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

/// Products run on owned, aligned copies so results do not depend on where
/// the source buffers are allocated.
inline RowMatrix owned(const double* data, Eigen::Index rows, Eigen::Index cols) {
  return ConstMatrixMap(data, rows, cols);
}

inline void store(const RowMatrix& m, double* dst) {
  std::copy(m.data(), m.data() + m.size(), dst);
}

inline void accumulate(const RowMatrix& m, double* dst) {
  const double* src = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) dst[i] += src[i];
}

}  // namespace shnet::ops::internal

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>

namespace bolt {

/// Dense row-major matrix, the working currency of the whole library.
/// Row-major layout keeps token matrices (one token per row) contiguous,
/// which the checkpoint writer relies on.
template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

template <class T>
bool all_finite(const Mat<T>& m) {
  return m.allFinite();
}

template <class T>
Mat<T> zeros_like(const Mat<T>& m) {
  return Mat<T>::Zero(m.rows(), m.cols());
}

}  // namespace bolt

#pragma once

#include <Eigen/Dense>

namespace taskclust {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

inline bool all_finite(const Matrix &m) { return m.allFinite(); }

/// Entries of `m` where `mask` is false are zeroed.
inline Matrix project(const Matrix &m, const Mask &mask)
{
  return mask.select(m, Matrix::Zero(m.rows(), m.cols()));
}

struct Svd {
  Matrix u; ///< thin, empty when vectors were not requested
  Vector s; ///< descending
  Matrix v;
};

/// Divide-and-conquer SVD, redone with one-sided Jacobi when the former does
/// not reconstruct `m` (it can fail on heavily repeated singular values).
Svd thin_svd(const Matrix &m, bool vectors = true);

} // namespace taskclust

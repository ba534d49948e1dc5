#include "taskclust/linalg.hpp"

#include <algorithm>

#include <Eigen/SVD>

namespace taskclust {

namespace {

template <class Solver> Svd unpack(const Solver &svd) { return {svd.matrixU(), svd.singularValues(), svd.matrixV()}; }

bool trustworthy(const Matrix &m, const Svd &r)
{
  if (!r.s.allFinite() || !r.u.allFinite() || !r.v.allFinite()) return false;
  const double err = (r.u * r.s.asDiagonal() * r.v.transpose() - m).norm();
  return err <= 1e-10 * std::max(1.0, m.norm());
}

} // namespace

Svd thin_svd(const Matrix &m, bool vectors)
{
  // Vectors are always computed so the result can be checked.
  const unsigned flags = Eigen::ComputeThinU | Eigen::ComputeThinV;
  auto out = unpack(Eigen::BDCSVD<Matrix>(m, flags));
  if (!trustworthy(m, out)) out = unpack(Eigen::JacobiSVD<Matrix>(m, flags));
  if (!vectors) out.u.resize(0, 0), out.v.resize(0, 0);
  return out;
}

} // namespace taskclust

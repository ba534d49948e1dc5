#include "taskclust/matrix_completion.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "taskclust/error.hpp"

namespace taskclust {

CompletionProblem CompletionProblem::from(const PartialSimilarityMatrix &partial)
{
  return {partial.values(), partial.mask(), default_lambda(partial.n())};
}

double default_lambda(Index n) { return 1.0 / std::sqrt(static_cast<double>(n)); }

Matrix svt(const Matrix &m, double tau)
{
  if (!(tau > 0)) throw Error("bad-tau");
  if (!m.allFinite()) throw numerical_error("non-finite", "svt input");
  const auto svd = thin_svd(m);
  const Vector s = (svd.s.array() - tau).max(0.0).matrix();
  Index rank = 0;
  while (rank < s.size() && s[rank] > 0) ++rank;
  if (rank == 0) return Matrix::Zero(m.rows(), m.cols());
  return svd.u.leftCols(rank) * s.head(rank).asDiagonal() * svd.v.leftCols(rank).transpose();
}

Matrix svt_symmetric(const Matrix &m, double tau)
{
  if (!(tau > 0)) throw Error("bad-tau");
  if (!m.allFinite()) throw numerical_error("non-finite", "svt input");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  // The tridiagonal QR occasionally stalls on nearly block-diagonal input.
  if (eig.info() != Eigen::Success || !eig.eigenvectors().allFinite()) return svt(0.5 * (m + m.transpose()), tau);
  const Vector &ev = eig.eigenvalues();
  Vector shrunk(ev.size());
  for (Index i = 0; i < ev.size(); ++i) {
    const double mag = std::max(std::abs(ev[i]) - tau, 0.0);
    shrunk[i] = ev[i] < 0 ? -mag : mag;
  }
  const Matrix &v = eig.eigenvectors();
  Matrix out = v * shrunk.asDiagonal() * v.transpose();
  return 0.5 * (out + out.transpose());
}

Matrix soft_threshold(const Matrix &m, double tau)
{
  return m.unaryExpr([tau](double v) { return v > tau ? v - tau : (v < -tau ? v + tau : 0.0); });
}

double nuclear_norm(const Matrix &m)
{
  return thin_svd(m, false).s.sum();
}

double completion_objective(const Matrix &x, const Matrix &e, const Mask &omega, double lambda)
{
  return nuclear_norm(x) + lambda * project(e, omega).cwiseAbs().sum();
}

namespace {

bool is_symmetric(const Matrix &y, const Mask &omega)
{
  if (y.rows() != y.cols()) return false;
  for (Index i = 0; i < y.rows(); ++i)
    for (Index j = i + 1; j < y.cols(); ++j) {
      if (omega(i, j) != omega(j, i)) return false;
      if (omega(i, j) && y(i, j) != y(j, i)) return false;
    }
  return true;
}

double residual_of(const Matrix &yp, const Matrix &x, const Matrix &e, const Mask &omega, double scale)
{
  return project(yp - x - e, omega).norm() / scale;
}

} // namespace

CompletionResult complete(const CompletionProblem &problem, const SolverConfig &config)
{
  const Index n = problem.y.rows();
  if (n < 2 || problem.y.cols() != n) throw Error("bad-problem", "Y must be square with n >= 2");
  if (problem.omega.rows() != n || problem.omega.cols() != n) throw Error("bad-problem", "mask shape");
  if (problem.omega.count() == 0) throw Error("bad-problem", "no observed entries");
  if (config.tol <= 0 || config.max_iter < 1 || config.rho_growth < 1) throw Error("bad-solver-config");

  const double lambda = config.lambda_override.value_or(problem.lambda > 0 ? problem.lambda : default_lambda(n));
  if (!(lambda > 0)) throw Error("bad-lambda");

  const Mask &omega = problem.omega;
  const Matrix yp = project(problem.y, omega);
  if (!yp.allFinite()) throw numerical_error("non-finite", "observed values");
  const double l1 = yp.cwiseAbs().sum();
  const double scale = std::max(1.0, yp.norm());
  double rho = config.rho0.value_or(l1 > 0 ? static_cast<double>(n * n) / (4.0 * l1) : 1.0);
  const bool symmetric = config.exploit_symmetry && is_symmetric(problem.y, omega);

  Matrix x = Matrix::Zero(n, n), e = Matrix::Zero(n, n), dual = Matrix::Zero(n, n);
  double primal = 0, stationarity = 0;
  CompletionResult result;
  result.lambda = lambda;

  for (int it = 1; it <= config.max_iter; ++it) {
    const Matrix target = yp - e + dual / rho;
    x = symmetric ? svt_symmetric(target, 1.0 / rho) : svt(target, 1.0 / rho);

    const Matrix e_prev = e;
    const Matrix free = yp - x + dual / rho;
    e = omega.select(soft_threshold(free, lambda / rho), free);

    const Matrix r = yp - x - e;
    dual += rho * r;
    primal = project(r, omega).norm() / scale;
    stationarity = rho * (e - e_prev).norm() / scale;

    // Residual balancing: ρ moves by rho_growth toward whichever residual lags.
    if (primal > config.balance_ratio * stationarity)
      rho = std::min(rho * config.rho_growth, config.rho_max);
    else if (stationarity > config.balance_ratio * primal)
      rho = std::max(rho / config.rho_growth, 1.0 / config.rho_max);

    if (!x.allFinite() || !e.allFinite() || !dual.allFinite())
      throw numerical_error("diverged", "non-finite iterate at iteration " + std::to_string(it));

    result.iterations = it;
    if (primal < config.tol && stationarity < config.dual_tol) {
      result.converged = true;
      break;
    }
  }

  result.asymmetry = (x - x.transpose()).norm() / std::max(1.0, x.norm());
  result.x = 0.5 * (x + x.transpose());
  result.e = project(e, omega);
  result.final_residual = residual_of(yp, result.x, result.e, omega, scale);
  result.converged = result.converged && result.final_residual < config.tol;
  return result;
}

double clip_unit_interval(Matrix &m)
{
  if (m.size() == 0) return 0.0;
  Index changed = 0;
  for (Index k = 0; k < m.size(); ++k) {
    double &v = m.data()[k];
    if (v < 0.0) {
      v = 0.0;
      ++changed;
    } else if (v > 1.0) {
      v = 1.0;
      ++changed;
    }
  }
  return static_cast<double>(changed) / static_cast<double>(m.size());
}

} // namespace taskclust

#pragma once

#include <optional>

#include "taskclust/linalg.hpp"
#include "taskclust/score_filter.hpp"

namespace taskclust {

/// min ‖X‖* + λ‖E‖₁  s.t.  P_Ω(X + E) = P_Ω(Y).
struct CompletionProblem {
  Matrix y;     ///< observed values; ignored outside omega
  Mask omega;   ///< observed positions
  double lambda = 0;

  /// Problem built from a filtered matrix with λ = 1/√n.
  static CompletionProblem from(const PartialSimilarityMatrix &partial);
};

double default_lambda(Index n);

struct SolverConfig {
  /// Initial penalty; defaults to n² / (4‖P_Ω(Y)‖₁).
  std::optional<double> rho0;
  /// Multiplier applied to ρ when one residual exceeds the other by balance_ratio.
  double rho_growth = 1.2;
  double balance_ratio = 10;
  double rho_max = 1e7;
  double tol = 1e-7;
  /// Tolerance on the dual residual ρ‖E_k − E_{k−1}‖_F / max(1, ‖P_Ω(Y)‖_F).
  double dual_tol = 1e-6;
  int max_iter = 500;
  std::optional<double> lambda_override;
  /// Use a symmetric eigendecomposition for thresholding when Y and Ω are symmetric.
  bool exploit_symmetry = true;
};

struct CompletionResult {
  Matrix x;
  Matrix e;
  int iterations = 0;
  double final_residual = 0;
  bool converged = false;
  double lambda = 0;
  /// ‖X − Xᵀ‖_F / max(1, ‖X‖_F) before symmetrization.
  double asymmetry = 0;
};

/// Singular value thresholding: U·max(Σ − τ, 0)·Vᵀ. Throws "non-finite".
Matrix svt(const Matrix &m, double tau);

/// Same for a symmetric input via its eigendecomposition (singular values are |eigenvalues|).
Matrix svt_symmetric(const Matrix &m, double tau);

/// Elementwise sign(m)·max(|m| − τ, 0).
Matrix soft_threshold(const Matrix &m, double tau);

double nuclear_norm(const Matrix &m);

/// ‖X‖* + λ‖P_Ω(E)‖₁.
double completion_objective(const Matrix &x, const Matrix &e, const Mask &omega, double lambda);

/// Inexact augmented Lagrangian iteration. Throws "diverged" on non-finite iterates.
CompletionResult complete(const CompletionProblem &problem, const SolverConfig &config = {});

/// Clips entries into [0, 1] in place; returns the fraction of entries changed.
double clip_unit_interval(Matrix &m);

} // namespace taskclust

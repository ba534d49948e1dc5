#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "taskclust/linalg.hpp"

namespace taskclust {

struct TaskPartition {
  int n = 0;
  int k = 0;
  std::vector<int> assignment; ///< cluster id in [0, k) per task
  std::uint64_t seed = 0;

  /// Task ids per cluster, in increasing order.
  std::vector<std::vector<int>> clusters() const;
};

struct SpectralOptions {
  double self_loop = 1e-8;
  int restarts = 20;
  int max_iter = 300;
  double tol = 1e-9;
  /// Max |X - Xᵀ| tolerated, relative to max(1, max |X|).
  double symmetry_tol = 1e-8;
};

/// Normalized Laplacian I − D^{-1/2}(X + εI)D^{-1/2} and its k smallest eigenpairs.
struct SpectralEmbedding {
  Matrix laplacian;
  Vector eigenvalues;  ///< k smallest, ascending
  Matrix eigenvectors; ///< n x k
  Matrix embedding;    ///< eigenvectors with unit-norm rows
};

SpectralEmbedding spectral_embedding(const Matrix &x, int k, const SpectralOptions &options = {});

struct KMeansResult {
  std::vector<int> assignment;
  Matrix centers; ///< k x dim
  double inertia = 0;
};

/// k-means with k-means++ seeding on the rows of `points`, best of options.restarts.
KMeansResult kmeans(const Matrix &points, int k, std::uint64_t seed, const SpectralOptions &options = {});

/// Normalized-cut spectral clustering (symmetric Laplacian, row-normalized
/// embedding, k-means). Cluster ids are numbered by first appearance.
/// Throws "bad-K", "too-many-clusters", "asymmetric-input", "negative-affinity",
/// "non-finite" or "empty-cluster".
TaskPartition spectral_cluster(const Matrix &x, int k, std::uint64_t seed, const SpectralOptions &options = {});

/// Adjusted Rand index between two labelings of the same items.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

/// Renumbers labels by order of first appearance.
std::vector<int> canonical_labels(std::span<const int> labels);

} // namespace taskclust

#include "taskclust/spectral_clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Eigenvalues>

#include "taskclust/error.hpp"
#include "taskclust/random.hpp"

namespace taskclust {

std::vector<std::vector<int>> TaskPartition::clusters() const
{
  std::vector<std::vector<int>> out(static_cast<std::size_t>(k));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)])].push_back(i);
  return out;
}

namespace {

void check_affinity(const Matrix &x, int k, const SpectralOptions &options)
{
  const Index n = x.rows();
  if (x.cols() != n) throw Error("asymmetric-input", "matrix is not square");
  if (k < 1) throw Error("bad-K", "K must be at least 1");
  if (k > n) throw Error("too-many-clusters", std::to_string(k) + " clusters for " + std::to_string(n) + " tasks");
  if (!x.allFinite()) throw numerical_error("non-finite", "affinity matrix");
  if (x.minCoeff() < 0) throw Error("negative-affinity");
  const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
  if ((x - x.transpose()).cwiseAbs().maxCoeff() > options.symmetry_tol * scale) throw Error("asymmetric-input");
}

double sq_dist(const Matrix &points, Index row, const Matrix &centers, Index c)
{
  return (points.row(row) - centers.row(c)).squaredNorm();
}

KMeansResult kmeans_once(const Matrix &points, int k, Rng &rng, const SpectralOptions &options)
{
  const Index n = points.rows();
  Matrix centers(k, points.cols());

  // k-means++ seeding
  std::uniform_int_distribution<Index> first(0, n - 1);
  centers.row(0) = points.row(first(rng));
  Vector closest(n);
  for (Index i = 0; i < n; ++i) closest[i] = sq_dist(points, i, centers, 0);
  for (int c = 1; c < k; ++c) {
    const double total = closest.sum();
    Index pick = 0;
    if (total > 0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        r -= closest[pick];
        if (r <= 0) break;
      }
    } else {
      pick = first(rng);
    }
    centers.row(c) = points.row(pick);
    for (Index i = 0; i < n; ++i) closest[i] = std::min(closest[i], sq_dist(points, i, centers, c));
  }

  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < options.max_iter; ++iter) {
    for (Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(points, i, centers, 0);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(points, i, centers, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      assign[static_cast<std::size_t>(i)] = best;
    }

    Matrix next = Matrix::Zero(k, points.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      next.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        next.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      // Empty cluster: move it to the point farthest from its current center.
      Index far = 0;
      double far_d = -1;
      for (Index i = 0; i < n; ++i) {
        const double d = sq_dist(points, i, centers, assign[static_cast<std::size_t>(i)]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      next.row(c) = points.row(far);
    }
    const double shift = (next - centers).rowwise().squaredNorm().maxCoeff();
    centers = next;
    if (shift <= options.tol) break;
  }

  KMeansResult result;
  result.centers = centers;
  result.assignment.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    int best = 0;
    double best_d = sq_dist(points, i, centers, 0);
    for (int c = 1; c < k; ++c) {
      const double d = sq_dist(points, i, centers, c);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    result.assignment[static_cast<std::size_t>(i)] = best;
    result.inertia += best_d;
  }
  return result;
}

} // namespace

SpectralEmbedding spectral_embedding(const Matrix &x, int k, const SpectralOptions &options)
{
  check_affinity(x, k, options);
  const Index n = x.rows();
  Matrix a = 0.5 * (x + x.transpose());
  a.diagonal().array() += options.self_loop;
  const Vector inv_sqrt_deg = a.rowwise().sum().cwiseSqrt().cwiseInverse();

  SpectralEmbedding out;
  out.laplacian = Matrix::Identity(n, n) - inv_sqrt_deg.asDiagonal() * a * inv_sqrt_deg.asDiagonal();
  out.laplacian = 0.5 * (out.laplacian + out.laplacian.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> eig(out.laplacian);
  if (eig.info() != Eigen::Success) throw numerical_error("non-finite", "Laplacian eigendecomposition failed");
  out.eigenvalues = eig.eigenvalues().head(k);
  out.eigenvectors = eig.eigenvectors().leftCols(k);
  out.embedding = out.eigenvectors;
  for (Index i = 0; i < n; ++i) {
    const double norm = out.embedding.row(i).norm();
    if (norm > 0) out.embedding.row(i) /= norm;
  }
  return out;
}

KMeansResult kmeans(const Matrix &points, int k, std::uint64_t seed, const SpectralOptions &options)
{
  if (k < 1 || k > points.rows()) throw Error("bad-K");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
    auto run = kmeans_once(points, k, rng, options);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

std::vector<int> canonical_labels(std::span<const int> labels)
{
  std::map<int, int> remap;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    auto [it, inserted] = remap.try_emplace(l, static_cast<int>(remap.size()));
    out.push_back(it->second);
  }
  return out;
}

TaskPartition spectral_cluster(const Matrix &x, int k, std::uint64_t seed, const SpectralOptions &options)
{
  const auto emb = spectral_embedding(x, k, options);
  TaskPartition p;
  p.n = static_cast<int>(x.rows());
  p.k = k;
  p.seed = seed;
  if (k == 1) {
    p.assignment.assign(static_cast<std::size_t>(p.n), 0);
    return p;
  }
  const auto km = kmeans(emb.embedding, k, seed, options);
  p.assignment = canonical_labels(km.assignment);
  const int used = 1 + *std::max_element(p.assignment.begin(), p.assignment.end());
  if (used < k) throw Error("empty-cluster", std::to_string(used) + " of " + std::to_string(k) + " clusters nonempty");
  return p;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b)
{
  if (a.size() != b.size()) throw Error("size-mismatch");
  const auto ca = canonical_labels(a), cb = canonical_labels(b);
  const int ka = ca.empty() ? 0 : 1 + *std::max_element(ca.begin(), ca.end());
  const int kb = cb.empty() ? 0 : 1 + *std::max_element(cb.begin(), cb.end());
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(ka, kb);
  for (std::size_t i = 0; i < ca.size(); ++i) table(ca[i], cb[i]) += 1;

  auto comb2 = [](double v) { return v * (v - 1) / 2; };
  double index = 0, rows = 0, cols = 0;
  for (Index i = 0; i < table.size(); ++i) index += comb2(table.data()[i]);
  for (Index i = 0; i < ka; ++i) rows += comb2(table.row(i).sum());
  for (Index j = 0; j < kb; ++j) cols += comb2(table.col(j).sum());
  const double total = comb2(static_cast<double>(ca.size()));
  const double expected = total > 0 ? rows * cols / total : 0;
  const double max_index = 0.5 * (rows + cols);
  if (max_index == expected) return ca == cb ? 1.0 : 0.0;
  return (index - expected) / (max_index - expected);
}

} // namespace taskclust

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "taskclust/linalg.hpp"
#include "taskclust/transfer_estimation.hpp"

namespace taskclust::test {

/// Transfer matrix whose unordered pairs are each observed with probability
/// `fraction`, both directions drawn uniformly from [0, 1].
inline TransferMatrix random_transfer(int n, double fraction, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TransferMatrix s(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (u(rng) < fraction) {
        s.set(i, j, u(rng));
        s.set(j, i, u(rng));
      }
  return s;
}

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed, double scale = 1.0)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

/// Block matrix of ones for the given membership.
inline Matrix block_matrix(const std::vector<int> &membership)
{
  const auto n = static_cast<Index>(membership.size());
  Matrix x = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (membership[static_cast<std::size_t>(i)] == membership[static_cast<std::size_t>(j)]) x(i, j) = 1.0;
  return x;
}

/// Gaussian-blob classification task: label c centred at centres.row(c).
inline TaskDataset blob_task(const Matrix &centres, int per_label_train, int per_label_valid, int per_label_test,
                             double noise, std::uint64_t seed, const std::string &id = "blob")
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, noise);
  auto draw = [&](int per_label) {
    std::vector<Example> out;
    for (int rep = 0; rep < per_label; ++rep)
      for (int c = 0; c < centres.rows(); ++c) {
        Example ex;
        ex.x = centres.row(c).transpose();
        for (Index d = 0; d < ex.x.size(); ++d) ex.x[d] += g(rng);
        ex.y = c;
        out.push_back(std::move(ex));
      }
    return out;
  };
  TaskDataset t;
  t.task_id = id;
  t.label_count = static_cast<int>(centres.rows());
  t.train = draw(per_label_train);
  t.valid = draw(per_label_valid);
  t.test = draw(per_label_test);
  return t;
}

} // namespace taskclust::test

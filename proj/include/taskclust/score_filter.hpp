#pragma once

#include <cstdint>
#include <vector>

#include "taskclust/linalg.hpp"
#include "taskclust/transfer_estimation.hpp"

namespace taskclust {

enum class FilterMode {
  standard, ///< both directions must clear the high (or low) threshold strictly
  xl,       ///< every sampled pair observed: 1 if either direction reaches its column mean
};

struct FilterParams {
  double p1 = 0.5;
  double p2 = 0.5;
  FilterMode mode = FilterMode::standard;
  bool include_diagonal_in_stats = true;
};

enum class Similarity : std::int8_t { unobserved = -1, dissimilar = 0, similar = 1 };

/// Symmetric matrix with entries in {1, 0, unobserved}; diagonal fixed at 1.
class PartialSimilarityMatrix {
 public:
  PartialSimilarityMatrix() = default;
  explicit PartialSimilarityMatrix(int n);

  int n() const { return n_; }
  Similarity at(int i, int j) const { return cells_[index(i, j)]; }
  bool observed(int i, int j) const { return at(i, j) != Similarity::unobserved; }

  /// Sets (i, j) and (j, i). Off-diagonal only.
  void set(int i, int j, Similarity v);

  /// Observed values as reals, zeros elsewhere.
  Matrix values() const;
  Mask mask() const;
  std::int64_t observed_offdiagonal() const;

  bool operator==(const PartialSimilarityMatrix &) const = default;

 private:
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + j; }

  int n_ = 0;
  std::vector<Similarity> cells_;
};

struct ColumnStats {
  double mean = 0;
  double stddev = 0; ///< population standard deviation
};

/// Mean and population standard deviation over the observed entries of column j.
/// Throws "degenerate-column" when fewer than two entries qualify.
ColumnStats column_stats(const TransferMatrix &s, int j, const FilterParams &params);

/// Thresholds consistent pairs of transfer scores into a partial similarity
/// matrix. Statistics are computed only for columns touched by a sampled pair;
/// a degenerate column among those throws "degenerate-column".
PartialSimilarityMatrix filter(const TransferMatrix &s, const FilterParams &params);

} // namespace taskclust

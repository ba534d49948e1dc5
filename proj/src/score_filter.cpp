#include "taskclust/score_filter.hpp"

#include <cmath>
#include <optional>

#include "taskclust/error.hpp"

namespace taskclust {

PartialSimilarityMatrix::PartialSimilarityMatrix(int n)
  : n_{n}
  , cells_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), Similarity::unobserved)
{
  for (int i = 0; i < n; ++i) cells_[index(i, i)] = Similarity::similar;
}

void PartialSimilarityMatrix::set(int i, int j, Similarity v)
{
  if (i == j) throw Error("diagonal-fixed");
  cells_[index(i, j)] = v;
  cells_[index(j, i)] = v;
}

Matrix PartialSimilarityMatrix::values() const
{
  Matrix m = Matrix::Zero(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      if (at(i, j) == Similarity::similar) m(i, j) = 1.0;
  return m;
}

Mask PartialSimilarityMatrix::mask() const
{
  Mask m(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) m(i, j) = observed(i, j);
  return m;
}

std::int64_t PartialSimilarityMatrix::observed_offdiagonal() const
{
  std::int64_t count = 0;
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) count += i != j && observed(i, j);
  return count;
}

ColumnStats column_stats(const TransferMatrix &s, int j, const FilterParams &params)
{
  double sum = 0;
  int count = 0;
  for (int i = 0; i < s.n; ++i) {
    if (!s.observed(i, j) || (i == j && !params.include_diagonal_in_stats)) continue;
    sum += s.scores(i, j);
    ++count;
  }
  if (count < 2) throw Error("degenerate-column", "column " + std::to_string(j));

  const double mean = sum / count;
  double ss = 0;
  for (int i = 0; i < s.n; ++i) {
    if (!s.observed(i, j) || (i == j && !params.include_diagonal_in_stats)) continue;
    const double d = s.scores(i, j) - mean;
    ss += d * d;
  }
  return {mean, std::sqrt(ss / count)};
}

PartialSimilarityMatrix filter(const TransferMatrix &s, const FilterParams &params)
{
  if (params.p1 < 0 || params.p2 < 0) throw Error("bad-filter-params", "p1 and p2 must be nonnegative");
  s.validate();

  std::vector<std::optional<ColumnStats>> stats(static_cast<std::size_t>(s.n));
  auto stats_of = [&](int j) -> const ColumnStats & {
    auto &slot = stats[static_cast<std::size_t>(j)];
    if (!slot) slot = column_stats(s, j, params);
    return *slot;
  };

  PartialSimilarityMatrix y(s.n);
  for (int i = 0; i < s.n; ++i) {
    for (int j = i + 1; j < s.n; ++j) {
      if (!s.observed(i, j)) continue;
      const double sij = s.scores(i, j), sji = s.scores(j, i);
      const ColumnStats &ci = stats_of(i), &cj = stats_of(j);

      if (params.mode == FilterMode::xl) {
        const bool similar = sij >= cj.mean || sji >= ci.mean;
        y.set(i, j, similar ? Similarity::similar : Similarity::dissimilar);
        continue;
      }
      if (sij > cj.mean + params.p1 * cj.stddev && sji > ci.mean + params.p1 * ci.stddev)
        y.set(i, j, Similarity::similar);
      else if (sij < cj.mean - params.p2 * cj.stddev && sji < ci.mean - params.p2 * ci.stddev)
        y.set(i, j, Similarity::dissimilar);
    }
  }
  return y;
}

} // namespace taskclust

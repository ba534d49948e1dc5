#include "taskclust/synthetic_bench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "taskclust/error.hpp"
#include "taskclust/parallel.hpp"
#include "taskclust/random.hpp"

namespace taskclust {

std::vector<int> balanced_sizes(int n, int k)
{
  std::vector<int> sizes(static_cast<std::size_t>(k), n / k);
  for (int i = 0; i < n % k; ++i) ++sizes[static_cast<std::size_t>(i)];
  return sizes;
}

PlantedInstance generate_planted(int n, int k, std::span<const int> sizes, std::uint64_t seed)
{
  if (k < 1 || static_cast<int>(sizes.size()) != k) throw Error("bad-sizes", "expected one size per cluster");
  if (std::any_of(sizes.begin(), sizes.end(), [](int s) { return s < 1; })) throw Error("bad-sizes", "empty cluster");
  if (std::accumulate(sizes.begin(), sizes.end(), 0) != n) throw Error("bad-sizes", "sizes must sum to n");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  PlantedInstance inst;
  inst.n = n;
  inst.k = k;
  inst.sizes.assign(sizes.begin(), sizes.end());
  inst.membership.assign(static_cast<std::size_t>(n), 0);
  std::size_t pos = 0;
  for (int c = 0; c < k; ++c)
    for (int s = 0; s < sizes[static_cast<std::size_t>(c)]; ++s) inst.membership[static_cast<std::size_t>(order[pos++])] = c;

  inst.x_star = Matrix::Zero(n, n);
  for (int c = 0; c < k; ++c) {
    Vector a = Vector::Zero(n);
    for (int i = 0; i < n; ++i) a[i] = inst.membership[static_cast<std::size_t>(i)] == c ? 1.0 : 0.0;
    inst.x_star += a * a.transpose();
  }
  return inst;
}

namespace {

struct Slot {
  int i, j; // i == j for a diagonal slot
  int weight() const { return i == j ? 1 : 2; }
};

/// Whether `left` weight can be collected from `ones` unit slots and `twos` pair slots.
bool reachable(std::int64_t left, std::int64_t ones, std::int64_t twos)
{
  std::int64_t d = std::max<std::int64_t>(0, left - 2 * twos);
  if ((left - d) % 2 != 0) ++d;
  return d <= ones && d <= left;
}

/// Takes slots in order, skipping any that would leave `budget` unreachable,
/// until exactly `budget` weight is collected.
std::vector<Slot> take_weight(const std::vector<Slot> &shuffled, std::int64_t budget)
{
  std::int64_t ones = 0, twos = 0;
  for (const auto &s : shuffled) (s.weight() == 1 ? ones : twos) += 1;
  if (!reachable(budget, ones, twos))
    throw Error("infeasible-budget", "cannot reach the requested count with mirrored pairs");
  std::vector<Slot> taken;
  std::int64_t left = budget;
  for (const auto &s : shuffled) {
    if (left == 0) break;
    (s.weight() == 1 ? ones : twos) -= 1;
    if (s.weight() <= left && reachable(left - s.weight(), ones, twos)) {
      taken.push_back(s);
      left -= s.weight();
    }
  }
  return taken;
}

} // namespace

ObservationPlan observe_and_corrupt(const PlantedInstance &inst, std::int64_t m1, std::int64_t m2, std::uint64_t seed,
                                    SamplingMode mode)
{
  const int n = inst.n;
  const std::int64_t cells = static_cast<std::int64_t>(n) * n;
  if (m1 < 0 || m2 < 0 || m2 > m1 || m1 > cells) throw Error("infeasible-budget", "need 0 <= m2 <= m1 <= n^2");

  ObservationPlan plan;
  plan.m1 = m1;
  plan.m2 = m2;
  plan.omega = Mask::Constant(n, n, false);
  plan.corrupted = Mask::Constant(n, n, false);
  Rng rng(seed);

  if (mode == SamplingMode::uniform) {
    std::vector<std::int64_t> cells_idx(static_cast<std::size_t>(cells));
    std::iota(cells_idx.begin(), cells_idx.end(), 0);
    std::shuffle(cells_idx.begin(), cells_idx.end(), rng);
    for (std::int64_t t = 0; t < m1; ++t) {
      const auto c = cells_idx[static_cast<std::size_t>(t)];
      plan.omega(c / n, c % n) = true;
    }
    std::shuffle(cells_idx.begin(), cells_idx.begin() + m1, rng);
    for (std::int64_t t = 0; t < m2; ++t) {
      const auto c = cells_idx[static_cast<std::size_t>(t)];
      plan.corrupted(c / n, c % n) = true;
    }
  } else {
    std::vector<Slot> slots;
    slots.reserve(static_cast<std::size_t>(n + n * (n - 1) / 2));
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) slots.push_back({i, j});
    std::shuffle(slots.begin(), slots.end(), rng);
    auto observed = take_weight(slots, m1);
    std::shuffle(observed.begin(), observed.end(), rng);
    const auto flipped = take_weight(observed, m2);
    for (const auto &s : observed) plan.omega(s.i, s.j) = plan.omega(s.j, s.i) = true;
    for (const auto &s : flipped) plan.corrupted(s.i, s.j) = plan.corrupted(s.j, s.i) = true;
  }

  plan.y = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (!plan.omega(i, j)) continue;
      const double truth = inst.x_star(i, j);
      plan.y(i, j) = plan.corrupted(i, j) ? 1.0 - truth : truth;
    }
  return plan;
}

int numerical_rank(const Matrix &m, double rel_tol)
{
  const Vector s = thin_svd(m, false).s;
  if (s.size() == 0 || s[0] == 0) return 0;
  int rank = 0;
  for (Index i = 0; i < s.size(); ++i) rank += s[i] >= rel_tol * s[0];
  return rank;
}

CoherenceDiagnostics coherence(const PlantedInstance &inst)
{
  if (inst.x_star.isZero(0)) throw Error("zero-matrix");
  const auto svd = thin_svd(inst.x_star);
  const Index r = inst.k;
  const Matrix u = svd.u.leftCols(r);
  const Matrix v = svd.v.leftCols(r);
  const double n = static_cast<double>(inst.n);

  CoherenceDiagnostics d;
  const double leverage = std::max(u.rowwise().norm().maxCoeff(), v.rowwise().norm().maxCoeff());
  d.mu0 = std::sqrt(n / static_cast<double>(r)) * leverage;
  d.uv_max = (u * v.transpose()).cwiseAbs().maxCoeff();
  d.mu1 = d.uv_max * n / std::sqrt(static_cast<double>(r));
  return d;
}

TrialOutcome recovery_trial(const PlantedInstance &inst, std::int64_t m1, std::int64_t m2, double lambda,
                            std::uint64_t seed, SamplingMode mode, const SolverConfig &solver)
{
  const auto plan = observe_and_corrupt(inst, m1, m2, seed, mode);
  TrialOutcome out;
  if (plan.omega.count() == 0) {
    out.reason = "no-observations";
    out.max_abs_err = inst.x_star.cwiseAbs().maxCoeff();
    return out;
  }
  try {
    const auto result = complete({plan.y, plan.omega, lambda}, solver);
    out.iterations = result.iterations;
    out.max_abs_err = (result.x - inst.x_star).cwiseAbs().maxCoeff();
    out.recovered = out.max_abs_err < kRecoveryTolerance;
  } catch (const Error &e) {
    out.reason = e.code();
    out.max_abs_err = std::numeric_limits<double>::infinity();
  }
  return out;
}

std::int64_t m1_from_fraction(int n, double fraction)
{
  const auto cells = static_cast<std::int64_t>(n) * n;
  return std::clamp<std::int64_t>(std::llround(fraction * static_cast<double>(cells)), 0, cells);
}

double sweep_lambda(int n, std::int64_t m2) { return m2 == 0 ? 2.0 : default_lambda(n); }

std::int64_t m2_from_fraction(std::int64_t m1, double fraction, SamplingMode mode)
{
  if (mode == SamplingMode::pair_aware) {
    // Whole mirrored pairs, so the count is realizable whatever was observed.
    const auto pairs = std::llround(fraction * static_cast<double>(m1) / 2);
    return std::clamp<std::int64_t>(2 * pairs, 0, m1);
  }
  return std::clamp<std::int64_t>(std::llround(fraction * static_cast<double>(m1)), 0, m1);
}

namespace {

int count_recovered(int n, int k, std::int64_t m1, std::int64_t m2, int trials, std::uint64_t cell_seed,
                    const SweepOptions &options)
{
  const auto sizes = balanced_sizes(n, k);
  const double lambda = options.lambda.value_or(sweep_lambda(n, m2));
  std::vector<char> ok(static_cast<std::size_t>(trials), 0);
  parallel_for(ok.size(), [&](std::size_t t) {
    const auto s = derive_seed(cell_seed, {t});
    const auto inst = generate_planted(n, k, sizes, derive_seed(s, {0}));
    ok[t] = recovery_trial(inst, m1, m2, lambda, derive_seed(s, {1}), options.mode, options.solver).recovered;
  });
  return static_cast<int>(std::count(ok.begin(), ok.end(), 1));
}

} // namespace

std::vector<SweepRow> phase_sweep(int n, int k, std::span<const SweepCell> grid, int trials, std::uint64_t seed,
                                  const SweepOptions &options)
{
  if (grid.empty()) throw Error("bad-grid", "grid is empty");
  if (trials < 1) throw Error("bad-grid", "trials must be positive");
  if (n < 2 || k < 1 || k > n) throw Error("bad-grid", "need n >= 2 and 1 <= k <= n");

  std::vector<SweepRow> rows;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    SweepRow row;
    row.n = n;
    row.k = k;
    row.m1 = m1_from_fraction(n, grid[c].m1_fraction);
    row.m2 = m2_from_fraction(row.m1, grid[c].m2_fraction, options.mode);
    row.trials = trials;
    row.recovered_count = count_recovered(n, k, row.m1, row.m2, trials, derive_seed(seed, {stage::sweep, c}), options);
    row.prob = static_cast<double>(row.recovered_count) / trials;
    rows.push_back(row);
  }
  return rows;
}

std::int64_t recovery_threshold(int n, int k, std::uint64_t seed, const ThresholdSearch &search,
                                const SweepOptions &options)
{
  const auto cells = static_cast<std::int64_t>(n) * n;
  std::vector<std::int64_t> ladder;
  for (double m = static_cast<double>(n); m < static_cast<double>(cells); m *= search.step) {
    const auto v = std::llround(m);
    if (ladder.empty() || v > ladder.back()) ladder.push_back(v);
  }
  ladder.push_back(cells);

  auto passes = [&](std::size_t idx) {
    const auto m1 = ladder[idx];
    const auto m2 = m2_from_fraction(m1, search.m2_fraction, options.mode);
    const int hits = count_recovered(n, k, m1, m2, search.trials, derive_seed(seed, {stage::sweep, idx}), options);
    return hits >= static_cast<int>(std::ceil(search.target * search.trials - 1e-12));
  };

  std::size_t lo = 0, hi = ladder.size() - 1; // answer in [lo, hi]
  if (!passes(hi)) throw Error("no-recovery", "target rate not reached even with full observation");
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (passes(mid))
      hi = mid;
    else
      lo = mid + 1;
  }
  return ladder[lo];
}

double loglog_slope(std::span<const double> x, std::span<const double> y)
{
  if (x.size() != y.size() || x.size() < 2) throw Error("bad-fit");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

} // namespace taskclust

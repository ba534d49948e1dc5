#include <doctest.h>

#include <cmath>

#include <Eigen/SVD>

#include "taskclust/error.hpp"
#include "taskclust/parallel.hpp"
#include "taskclust/synthetic_bench.hpp"

using namespace taskclust;

namespace {

Vector singular_values(const Matrix &m) { return Eigen::JacobiSVD<Matrix>(m).singularValues(); }

int hamming_on(const Matrix &a, const Matrix &b, const Mask &omega)
{
  int d = 0;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) d += omega(i, j) && a(i, j) != b(i, j);
  return d;
}

} // namespace

TEST_CASE("generate_planted: two blocks of three")
{
  const std::vector<int> sizes{3, 3};
  const auto inst = generate_planted(6, 2, sizes, 1);
  const Vector s = singular_values(inst.x_star);
  CHECK(s[0] == doctest::Approx(3.0));
  CHECK(s[1] == doctest::Approx(3.0));
  for (Index i = 2; i < 6; ++i) CHECK(std::abs(s[i]) < 1e-12);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      CHECK(inst.x_star(i, j) == (inst.membership[i] == inst.membership[j] ? 1.0 : 0.0));
}

TEST_CASE("generate_planted: degenerate cluster counts")
{
  const std::vector<int> one{5};
  CHECK(generate_planted(5, 1, one, 0).x_star == Matrix::Ones(5, 5));
  const std::vector<int> singles(5, 1);
  const auto inst = generate_planted(5, 5, singles, 0);
  CHECK(inst.x_star == Matrix::Identity(5, 5));
  CHECK(numerical_rank(inst.x_star) == 5);
}

TEST_CASE("generate_planted: bad sizes")
{
  const std::vector<int> wrong_sum{2, 2};
  CHECK_THROWS_WITH_AS(generate_planted(5, 2, wrong_sum, 0), doctest::Contains("bad-sizes"), Error);
  const std::vector<int> empty{5, 0};
  CHECK_THROWS_WITH_AS(generate_planted(5, 2, empty, 0), doctest::Contains("bad-sizes"), Error);
  const std::vector<int> count{5};
  CHECK_THROWS_WITH_AS(generate_planted(5, 2, count, 0), doctest::Contains("bad-sizes"), Error);
}

TEST_CASE("generate_planted: rank equals the cluster count")
{
  std::mt19937_64 rng(8);
  for (int t = 0; t < 30; ++t) {
    const int n = std::uniform_int_distribution<int>(2, 40)(rng);
    const int k = std::uniform_int_distribution<int>(1, n)(rng);
    const auto inst = generate_planted(n, k, balanced_sizes(n, k), rng());
    const Vector s = singular_values(inst.x_star);
    int rank = 0;
    for (Index i = 0; i < s.size(); ++i) rank += s[i] > 1e-9 * s[0];
    CHECK(rank == k);
    CHECK(numerical_rank(inst.x_star) == k);
  }
}

TEST_CASE("coherence: closed forms")
{
  SUBCASE("equal blocks")
  {
    const std::vector<int> sizes{3, 3};
    const auto d = coherence(generate_planted(6, 2, sizes, 2));
    CHECK(d.mu0 == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(d.uv_max == doctest::Approx(1.0 / 3).epsilon(1e-10));
    CHECK(d.mu1 == doctest::Approx(6.0 / 3 / std::sqrt(2.0)).epsilon(1e-10));
  }
  SUBCASE("all ones")
  {
    const std::vector<int> sizes{8};
    const auto d = coherence(generate_planted(8, 1, sizes, 0));
    CHECK(d.mu0 == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(d.mu1 == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("one singleton and one large block")
  {
    const int n = 9;
    const std::vector<int> sizes{1, n - 1};
    const auto d = coherence(generate_planted(n, 2, sizes, 5));
    CHECK(d.mu0 == doctest::Approx(std::sqrt(n / 2.0)).epsilon(1e-10));
    CHECK(d.mu0 >= 1.0);
  }
}

TEST_CASE("observe_and_corrupt: counts and placement")
{
  const auto inst = generate_planted(12, 3, balanced_sizes(12, 3), 4);
  for (auto mode : {SamplingMode::pair_aware, SamplingMode::uniform})
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto plan = observe_and_corrupt(inst, 100, 6, seed, mode);
      CHECK(plan.omega.count() == 100);
      CHECK(plan.corrupted.count() == 6);
      CHECK(hamming_on(plan.y, inst.x_star, plan.omega) == 6);
      for (Index i = 0; i < 12; ++i)
        for (Index j = 0; j < 12; ++j) {
          if (plan.corrupted(i, j)) CHECK(plan.omega(i, j));
          if (!plan.omega(i, j)) CHECK(plan.y(i, j) == 0.0);
          if (mode == SamplingMode::pair_aware) {
            CHECK(plan.omega(i, j) == plan.omega(j, i));
            CHECK(plan.corrupted(i, j) == plan.corrupted(j, i));
          }
        }
    }
}

TEST_CASE("observe_and_corrupt: clean and full observation")
{
  const auto inst = generate_planted(10, 2, balanced_sizes(10, 2), 3);
  const auto clean = observe_and_corrupt(inst, 40, 0, 1);
  CHECK(clean.y == project(inst.x_star, clean.omega));
  const auto full = observe_and_corrupt(inst, 100, 0, 1);
  CHECK(full.omega.count() == 100);
  CHECK(full.y == inst.x_star);
}

TEST_CASE("observe_and_corrupt: every mirrored budget is reachable")
{
  const auto inst = generate_planted(10, 2, balanced_sizes(10, 2), 3);
  for (std::int64_t m1 = 0; m1 <= 100; ++m1)
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto m2 = m2_from_fraction(m1, 0.3, SamplingMode::pair_aware);
      const auto plan = observe_and_corrupt(inst, m1, m2, seed, SamplingMode::pair_aware);
      CHECK(plan.omega.count() == m1);
      CHECK(plan.corrupted.count() == m2);
    }
}

TEST_CASE("observe_and_corrupt: impossible budgets")
{
  const auto inst = generate_planted(4, 2, balanced_sizes(4, 2), 3);
  CHECK_THROWS_WITH_AS(observe_and_corrupt(inst, 17, 0, 0), doctest::Contains("infeasible-budget"), Error);
  CHECK_THROWS_WITH_AS(observe_and_corrupt(inst, 4, 5, 0), doctest::Contains("infeasible-budget"), Error);
}

TEST_CASE("recovery_trial: full clean observation recovers")
{
  const auto inst = generate_planted(15, 3, balanced_sizes(15, 3), 6);
  const auto out = recovery_trial(inst, 225, 0, default_lambda(15), 1);
  CHECK(out.recovered);
  CHECK(out.max_abs_err < kRecoveryTolerance);
}

TEST_CASE("recovery_trial: fewer clean observations than tasks cannot recover")
{
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = generate_planted(20, 2, balanced_sizes(20, 2), seed);
    failures += !recovery_trial(inst, 16, 0, 2.0, seed + 50).recovered;
  }
  CHECK(failures >= 18);
}

TEST_CASE("phase_sweep: full cell, monotone rows, determinism")
{
  std::vector<SweepCell> grid;
  for (double f : {0.2, 0.4, 0.6, 0.8, 1.0}) grid.push_back({f, 0.0});
  const int trials = 6;
  const auto rows = phase_sweep(16, 2, grid, trials, 21);
  REQUIRE(rows.size() == 5);
  CHECK(rows.back().prob == 1.0);
  CHECK(rows.back().m1 == 256);
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < a; ++b) CHECK(rows[a].recovered_count >= rows[b].recovered_count - 2);

  set_thread_count(1);
  const auto serial = phase_sweep(16, 2, grid, trials, 21);
  set_thread_count(0);
  for (std::size_t c = 0; c < rows.size(); ++c) CHECK(serial[c].recovered_count == rows[c].recovered_count);
}

TEST_CASE("phase_sweep: single trial gives 0 or 1")
{
  std::vector<SweepCell> grid{{0.3, 0.0}, {0.7, 0.1}, {1.0, 0.0}};
  for (const auto &r : phase_sweep(10, 2, grid, 1, 3)) CHECK((r.prob == 0.0 || r.prob == 1.0));
}

TEST_CASE("phase_sweep: malformed grid")
{
  CHECK_THROWS_WITH_AS(phase_sweep(10, 2, {}, 3, 0), doctest::Contains("bad-grid"), Error);
  std::vector<SweepCell> grid{{0.5, 0.0}};
  CHECK_THROWS_WITH_AS(phase_sweep(10, 2, grid, 0, 0), doctest::Contains("bad-grid"), Error);
}

TEST_CASE("sweep helpers")
{
  CHECK(sweep_lambda(25, 0) == 2.0);
  CHECK(sweep_lambda(25, 3) == doctest::Approx(0.2));
  CHECK(m1_from_fraction(10, 0.5) == 50);
  CHECK(m2_from_fraction(50, 0.1) == 5);
  CHECK(m2_from_fraction(50, 0.1, SamplingMode::pair_aware) == 6);
  CHECK(m2_from_fraction(5, 1.0, SamplingMode::pair_aware) == 5);
  const std::vector<double> x{10, 20, 40, 80}, y{3 * std::pow(10, 1.5), 3 * std::pow(20, 1.5), 3 * std::pow(40, 1.5),
                                                3 * std::pow(80, 1.5)};
  CHECK(loglog_slope(x, y) == doctest::Approx(1.5).epsilon(1e-12));
}

#include <doctest.h>

#include <filesystem>
#include <limits>
#include <random>

#include "taskclust/error.hpp"
#include "taskclust/io.hpp"
#include "test_support.hpp"

using namespace taskclust;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string &name)
{
  const auto dir = fs::temp_directory_path() / ("taskclust_test_io_" + name);
  fs::remove_all(dir);
  return dir;
}

} // namespace

TEST_CASE("format_double round-trips exactly")
{
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int t = 0; t < 1000; ++t) {
    const double v = u(rng) * std::pow(10.0, static_cast<double>(t % 20) - 10);
    CHECK(std::stod(io::format_double(v)) == v);
  }
  CHECK(io::format_double(0.5) == "0.5");
  CHECK(io::format_double(1.0) == "1");
}

TEST_CASE("task datasets round-trip through files")
{
  const auto dir = scratch_dir("tasks");
  auto a = test::blob_task(test::random_matrix(3, 4, 1), 2, 1, 1, 1.0, 7, "b_task");
  auto b = test::blob_task(test::random_matrix(3, 4, 2), 2, 1, 1, 1.0, 8, "a_task");
  io::save_task(dir / "z.json", a);
  io::save_task(dir / "m.json", b);
  const auto loaded = io::load_task_dir(dir);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].task_id == "a_task");
  CHECK(loaded[1].task_id == "b_task");
  const auto &r = loaded[1];
  CHECK(r.label_count == a.label_count);
  REQUIRE(r.train.size() == a.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(r.train[i].x == a.train[i].x);
    CHECK(r.train[i].y == a.train[i].y);
  }
  CHECK(r.test.size() == a.test.size());
  fs::remove_all(dir);
}

TEST_CASE("task JSON errors")
{
  CHECK_THROWS_WITH_AS(io::load_task_dir(scratch_dir("absent")), doctest::Contains("missing-input"), Error);
  CHECK_THROWS_WITH_AS(io::load_task("/nonexistent/file.json"), doctest::Contains("missing-input"), Error);
  const auto j = io::Json::parse(R"({"task_id": "t", "label_count": 2, "splits": {"train": [{"x": [1, "a"], "y": 0}]}})");
  CHECK_THROWS_WITH_AS(io::task_from_json(j), doctest::Contains("bad-format"), Error);
  const auto bad_label = io::Json::parse(
      R"({"task_id": "t", "label_count": 2, "splits": {"train": [{"x": [1], "y": 5}], "valid": [], "test": []}})");
  CHECK_THROWS_AS(io::task_from_json(bad_label), Error);
}

TEST_CASE("transfer CSV round-trip and errors")
{
  const auto s = test::random_transfer(7, 0.5, 3);
  const auto text = io::transfer_csv(s);
  CHECK(text.rfind("#n=7\n", 0) == 0);
  const auto back = io::parse_transfer_csv(text);
  CHECK(back.n == 7);
  CHECK(back.observed == s.observed);
  CHECK(back.scores == s.scores);

  CHECK_THROWS_WITH_AS(io::parse_transfer_csv("0,1,0.5\n"), doctest::Contains("bad-format"), Error);
  CHECK_THROWS_WITH_AS(io::parse_transfer_csv("#n=3\n0,5,0.5\n5,0,0.5\n"), doctest::Contains("bad-format"), Error);
  CHECK_THROWS_WITH_AS(io::parse_transfer_csv("#n=3\n0,1,abc\n"), doctest::Contains("bad-format"), Error);
  CHECK_THROWS_WITH_AS(io::parse_transfer_csv("#n=3\n0,1,0.5\n"), doctest::Contains("one direction"), Error);
}

TEST_CASE("partial and dense CSV round-trips")
{
  PartialSimilarityMatrix y(5);
  y.set(0, 1, Similarity::similar);
  y.set(2, 4, Similarity::dissimilar);
  y.set(3, 1, Similarity::similar);
  CHECK(io::parse_partial_csv(io::partial_csv(y)) == y);
  CHECK_THROWS_WITH_AS(io::parse_partial_csv("#n=3\n0,1,0.5\n"), doctest::Contains("bad-format"), Error);

  const Matrix m = test::random_matrix(4, 4, 9);
  CHECK(io::parse_dense_csv(io::dense_csv(m)) == m);
  CHECK_THROWS_WITH_AS(io::parse_dense_csv("1,2\n3\n"), doctest::Contains("bad-format"), Error);
}

TEST_CASE("partition and model JSON round-trips")
{
  TaskPartition p{5, 2, {0, 1, 1, 0, 1}, 42};
  const auto q = io::partition_from_json(io::to_json(p));
  CHECK(q.n == 5);
  CHECK(q.k == 2);
  CHECK(q.assignment == p.assignment);
  CHECK(q.seed == 42);
  CHECK_THROWS_AS(io::partition_from_json(io::Json::parse(R"({"n": 3, "K": 2, "assignment": [0, 1]})")), Error);

  const auto task = test::blob_task(test::random_matrix(3, 4, 3), 5, 0, 0, 1.0, 1, "t");
  const auto model = train_single_task(task, TrainConfig{});
  CHECK(io::task_model_from_json(io::to_json(model)) == model);

  const std::vector<TaskDataset> cluster{task, test::blob_task(test::random_matrix(3, 4, 3), 5, 0, 0, 1.0, 2, "u")};
  for (auto kind : {ClusterModelKind::shared_classifier, ClusterModelKind::shared_encoder_multihead,
                    ClusterModelKind::metric_encoder}) {
    const auto cm = train_cluster_model(cluster, kind, TrainConfig{}, 3);
    CHECK(io::cluster_model_from_json(io::to_json(cm)) == cm);
  }

  auto bad = io::to_json(model.encoder);
  bad["weight"].erase(0);
  CHECK_THROWS_WITH_AS(io::linear_map_from_json(bad), doctest::Contains("bad-format"), Error);
}

TEST_CASE("sweep CSV layout")
{
  const std::vector<SweepRow> rows{{30, 3, 450, 0, 10, 7, 0.7}};
  CHECK(io::sweep_csv(rows) == "n,k,m1,m2,trials,recovered_count,prob\n30,3,450,0,10,7,0.7\n");
}

TEST_CASE("write_text creates parent directories")
{
  const auto dir = scratch_dir("nested");
  io::write_text(dir / "a" / "b.txt", "hello");
  CHECK(io::read_text(dir / "a" / "b.txt") == "hello");
  io::write_json(dir / "c.json", io::Json{{"k", 1}});
  CHECK(io::read_json(dir / "c.json")["k"] == 1);
  fs::remove_all(dir);
}

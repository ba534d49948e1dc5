#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "taskclust/cluster_learning.hpp"
#include "taskclust/matrix_completion.hpp"
#include "taskclust/score_filter.hpp"
#include "taskclust/spectral_clustering.hpp"
#include "taskclust/synthetic_bench.hpp"
#include "taskclust/transfer_estimation.hpp"

namespace taskclust::io {

using Json = nlohmann::json;
namespace fs = std::filesystem;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

std::string read_text(const fs::path &path);
/// Writes atomically enough for our purposes: whole buffer, then close.
void write_text(const fs::path &path, const std::string &text);
Json read_json(const fs::path &path);
void write_json(const fs::path &path, const Json &j);

Json to_json(const TaskDataset &task);
TaskDataset task_from_json(const Json &j);
TaskDataset load_task(const fs::path &path);
void save_task(const fs::path &path, const TaskDataset &task);
/// Every *.json file in `dir`, in lexicographic filename order.
std::vector<TaskDataset> load_task_dir(const fs::path &dir);

std::string transfer_csv(const TransferMatrix &s);
TransferMatrix parse_transfer_csv(const std::string &text);

std::string partial_csv(const PartialSimilarityMatrix &y);
PartialSimilarityMatrix parse_partial_csv(const std::string &text);

std::string dense_csv(const Matrix &m);
Matrix parse_dense_csv(const std::string &text);

Json to_json(const TaskPartition &p);
TaskPartition partition_from_json(const Json &j);

Json to_json(const LinearMap &m);
LinearMap linear_map_from_json(const Json &j);
Json to_json(const TaskModel &m);
TaskModel task_model_from_json(const Json &j);
Json to_json(const ClusterModel &m);
ClusterModel cluster_model_from_json(const Json &j);

std::string sweep_csv(std::span<const SweepRow> rows);

} // namespace taskclust::io

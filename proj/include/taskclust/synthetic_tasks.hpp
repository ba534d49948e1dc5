#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "taskclust/synthetic_bench.hpp"
#include "taskclust/transfer_estimation.hpp"

namespace taskclust {

/// Families of classification tasks with planted cluster structure. All tasks
/// share class prototypes; cluster g relabels class c as (c + g) mod L, so
/// tasks in different clusters disagree on every label.
struct TaskFamilyOptions {
  int clusters = 2;
  int tasks_per_cluster = 6;
  int dim = 20;
  int label_count = 3;
  int train_per_task = 10;
  int valid_per_task = 10;
  int test_per_task = 300;
  double prototype_scale = 1.0;
  double task_shift = 0.3;  ///< per-task jitter of the prototypes
  double noise = 1.5;       ///< feature noise standard deviation
  double label_noise = 0.0; ///< probability a training label is replaced uniformly at random
};

struct TaskFamily {
  TaskFamilyOptions options;
  Matrix prototypes; ///< label_count x dim
  std::vector<TaskDataset> tasks;
  std::vector<int> membership;
};

TaskFamily generate_task_family(const TaskFamilyOptions &options, std::uint64_t seed);

/// A fresh task using label shift `shift` (a cluster id, or any value in
/// [clusters, label_count) for an out-of-cluster task). The train split holds
/// `shots` examples per label; test holds options.test_per_task.
TaskDataset sample_family_task(const TaskFamily &family, int shift, int shots, const std::string &task_id,
                               std::uint64_t seed);

/// Transfer scores drawn around `within` for same-cluster pairs and `cross`
/// otherwise, jittered uniformly by ±jitter and clamped to [0, 1].
TransferMatrix synthetic_transfer_matrix(const PlantedInstance &inst, std::span<const TaskPair> pairs, double within,
                                         double cross, double jitter, std::uint64_t seed);

} // namespace taskclust

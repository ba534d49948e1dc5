#include "taskclust/synthetic_tasks.hpp"

#include <algorithm>

#include "taskclust/error.hpp"
#include "taskclust/random.hpp"

namespace taskclust {

namespace {

std::vector<Example> draw(const Matrix &prototypes, int shift, int count_per_label, int total, double noise,
                          double label_noise, Rng &rng)
{
  const int labels = static_cast<int>(prototypes.rows());
  std::normal_distribution<double> gauss(0.0, noise);
  std::uniform_int_distribution<int> any_label(0, labels - 1);
  std::bernoulli_distribution corrupt(label_noise);

  std::vector<Example> out;
  auto emit = [&](int cls) {
    Example ex;
    ex.x = prototypes.row(cls).transpose();
    for (Index d = 0; d < ex.x.size(); ++d) ex.x[d] += gauss(rng);
    ex.y = (cls + shift) % labels;
    if (label_noise > 0 && corrupt(rng)) ex.y = any_label(rng);
    out.push_back(std::move(ex));
  };
  if (count_per_label > 0) {
    for (int c = 0; c < labels; ++c)
      for (int i = 0; i < count_per_label; ++i) emit(c);
  } else {
    for (int i = 0; i < total; ++i) emit(any_label(rng));
  }
  return out;
}

} // namespace

TaskFamily generate_task_family(const TaskFamilyOptions &options, std::uint64_t seed)
{
  if (options.clusters < 1 || options.clusters > options.label_count)
    throw Error("bad-family", "need 1 <= clusters <= label_count");
  TaskFamily family;
  family.options = options;

  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  family.prototypes.resize(options.label_count, options.dim);
  for (Index r = 0; r < family.prototypes.rows(); ++r)
    for (Index c = 0; c < family.prototypes.cols(); ++c) family.prototypes(r, c) = options.prototype_scale * gauss(rng);

  for (int g = 0; g < options.clusters; ++g) {
    for (int t = 0; t < options.tasks_per_cluster; ++t) {
      Matrix local = family.prototypes;
      for (Index i = 0; i < local.size(); ++i) local.data()[i] += options.task_shift * gauss(rng);

      TaskDataset task;
      task.task_id = "c" + std::to_string(g) + "_t" + std::to_string(t);
      task.label_count = options.label_count;
      task.train = draw(local, g, 0, options.train_per_task, options.noise, options.label_noise, rng);
      task.valid = draw(local, g, 0, options.valid_per_task, options.noise, 0.0, rng);
      task.test = draw(local, g, 0, options.test_per_task, options.noise, 0.0, rng);
      family.tasks.push_back(std::move(task));
      family.membership.push_back(g);
    }
  }
  return family;
}

TaskDataset sample_family_task(const TaskFamily &family, int shift, int shots, const std::string &task_id,
                               std::uint64_t seed)
{
  const auto &o = family.options;
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix local = family.prototypes;
  for (Index i = 0; i < local.size(); ++i) local.data()[i] += o.task_shift * gauss(rng);

  TaskDataset task;
  task.task_id = task_id;
  task.label_count = o.label_count;
  task.train = draw(local, shift, shots, 0, o.noise, 0.0, rng);
  task.test = draw(local, shift, 0, o.test_per_task, o.noise, 0.0, rng);
  return task;
}

TransferMatrix synthetic_transfer_matrix(const PlantedInstance &inst, std::span<const TaskPair> pairs, double within,
                                         double cross, double jitter, std::uint64_t seed)
{
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-jitter, jitter);
  TransferMatrix s(inst.n);
  for (const auto &[i, j] : pairs) {
    const bool same = inst.membership[static_cast<std::size_t>(i)] == inst.membership[static_cast<std::size_t>(j)];
    const double base = same ? within : cross;
    s.set(i, j, std::clamp(base + u(rng), 0.0, 1.0));
    s.set(j, i, std::clamp(base + u(rng), 0.0, 1.0));
  }
  return s;
}

} // namespace taskclust

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "taskclust/linalg.hpp"
#include "taskclust/random.hpp"

namespace taskclust {

struct Example {
  Vector x;
  int y = 0;
};

/// One classification task with its train/validation/test split.
struct TaskDataset {
  std::string task_id;
  int label_count = 0;
  std::vector<Example> train;
  std::vector<Example> valid;
  std::vector<Example> test;

  /// Feature dimension, taken from the first example of any split (0 if empty).
  Index dim() const;

  /// Throws "label-out-of-range", "dim-mismatch" or "bad-label-count".
  void validate() const;
};

/// Affine map `weight * x + bias`.
struct LinearMap {
  Matrix weight;
  Vector bias;

  LinearMap() = default;
  LinearMap(Index out, Index in) : weight(Matrix::Zero(out, in)), bias(Vector::Zero(out)) {}

  Index in_dim() const { return weight.cols(); }
  Index out_dim() const { return weight.rows(); }
  Vector operator()(const Vector &x) const { return weight * x + bias; }

  /// Gaussian init with standard deviation scale/sqrt(in_dim), zero bias.
  static LinearMap random(Index out, Index in, double scale, Rng &rng);

  bool operator==(const LinearMap &o) const { return weight == o.weight && bias == o.bias; }
};

/// Linear encoder followed by a linear softmax classifier.
struct TaskModel {
  LinearMap encoder;
  LinearMap classifier;

  int label_count() const { return static_cast<int>(classifier.out_dim()); }
  Vector encode(const Vector &x) const { return encoder(x); }
  Vector predict_proba(const Vector &x) const;
  int predict(const Vector &x) const;
  double accuracy(std::span<const Example> data) const;

  bool operator==(const TaskModel &o) const = default;
};

struct TrainConfig {
  int hidden = 8;
  double learning_rate = 0.1;
  int epochs = 100;
  /// Epochs for the classifier layer retrained on a frozen source encoder.
  int transfer_epochs = 50;
  int batch_size = 16;
  double init_scale = 0.5;
  std::uint64_t seed = 0;
  /// Score a pair by evaluating the unmodified source model on the target
  /// training split instead of retraining a classifier on the frozen encoder.
  bool identical_labels = false;
};

/// Numerically stable softmax.
Vector softmax(const Vector &logits);

/// Index of the largest entry; ties go to the lowest index.
int argmax(const Vector &v);

/// Trains encoder and classifier jointly by mini-batch gradient descent on
/// cross-entropy. Deterministic given config.seed.
TaskModel train_single_task(const TaskDataset &dataset, const TrainConfig &config);

/// Accuracy on target.valid of a classifier trained on target.train over the
/// frozen source encoder; in identical-label mode, accuracy of the source model
/// on target.train. Throws "dim-mismatch", "empty-train", "empty-valid".
double transfer_score(const TaskModel &source, const TaskDataset &target, const TrainConfig &config);

/// Unordered task pair with first < second.
struct TaskPair {
  int first = 0;
  int second = 0;
  auto operator<=>(const TaskPair &) const = default;
};

/// Draws `budget` distinct unordered pairs uniformly without replacement,
/// returned sorted. Throws "budget-too-large".
std::vector<TaskPair> sample_task_pairs(int n, std::int64_t budget, std::uint64_t seed);

/// Partially observed, possibly asymmetric matrix of transfer scores.
/// scores(i, j) is the score of source task i on target task j.
struct TransferMatrix {
  int n = 0;
  Matrix scores;
  Mask observed;

  TransferMatrix() = default;
  /// Only the diagonal observed, set to 1.
  explicit TransferMatrix(int n);

  void set(int i, int j, double value);
  std::int64_t observed_pair_count() const;

  /// Throws "bad-transfer-matrix" if the mask is not pair-symmetric, the
  /// diagonal is not 1, or an observed score lies outside [0, 1].
  void validate() const;
};

/// Evaluates both directions of every pair via transfer_score. Pairs whose
/// target split is degenerate are left unobserved and reported on stderr;
/// dimension mismatches propagate with the pair attached.
TransferMatrix build_transfer_matrix(std::span<const TaskDataset> tasks, std::span<const TaskPair> pairs,
                                     const TrainConfig &config);

/// Same, reusing already trained source models (one per task).
TransferMatrix build_transfer_matrix(std::span<const TaskDataset> tasks, std::span<const TaskModel> models,
                                     std::span<const TaskPair> pairs, const TrainConfig &config);

namespace detail {

/// Training data for one task packed column-wise.
struct LabeledBatch {
  Matrix x; // d x m
  std::vector<int> y;
  int label_count = 0;
};

LabeledBatch pack(std::span<const Example> data, int label_count);

struct SgdSettings {
  double learning_rate = 0.1;
  int epochs = 100;
  int batch_size = 16;
};

/// Mini-batch gradient descent on summed cross-entropy. heads[t] classifies
/// tasks[t] on top of the shared encoder. When train_encoder is false the
/// encoder is read but never written.
void fit_encoder_heads(LinearMap &encoder, std::span<LinearMap *const> heads, std::span<const LabeledBatch> tasks,
                       const SgdSettings &sgd, bool train_encoder, Rng &rng);

} // namespace detail

} // namespace taskclust

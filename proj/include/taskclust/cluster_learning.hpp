#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taskclust/linalg.hpp"
#include "taskclust/transfer_estimation.hpp"

namespace taskclust {

enum class ClusterModelKind {
  shared_classifier,        ///< one encoder + classifier on pooled data; identical label sets required
  shared_encoder_multihead, ///< shared encoder, one classifier head per task
  metric_encoder,           ///< encoder trained so examples score highest against their own label's anchor
};

const char *to_string(ClusterModelKind kind);
ClusterModelKind cluster_model_kind_from(const std::string &name);

/// Model trained jointly on every task of one cluster.
struct ClusterModel {
  int cluster_id = 0;
  ClusterModelKind kind = ClusterModelKind::shared_encoder_multihead;
  LinearMap encoder;
  /// Multihead: one per entry of task_ids. Shared classifier: exactly one. Metric: none.
  std::vector<LinearMap> heads;
  std::vector<std::string> task_ids;

  Vector encode(const Vector &x) const { return encoder(x); }

  /// Class probabilities from a classifier head.
  Vector predict(const Vector &x, std::size_t head = 0) const;

  /// Head index for a task id, if this model has one.
  std::optional<std::size_t> head_for(const std::string &task_id) const;

  bool operator==(const ClusterModel &) const = default;
};

/// Throws "empty-cluster" or "label-space-mismatch" (shared classifier only).
ClusterModel train_cluster_model(std::span<const TaskDataset> cluster, ClusterModelKind kind, const TrainConfig &config,
                                 int cluster_id = 0);

/// Per-label anchor encodings (mean over that label's support examples), label_count x hidden.
/// Throws "no-support" when the support is empty or misses a label.
Matrix anchor_encodings(const LinearMap &encoder, std::span<const Example> support, int label_count);

/// softmax over labels of ⟨anchor_l, encode(x)⟩.
Vector metric_predict(const ClusterModel &model, std::span<const Example> support, int label_count, const Vector &x);

struct FewShotTask {
  std::string task_id;
  int label_count = 0;
  std::vector<Example> support;
  std::vector<Example> query;
};

struct CombinationWeights {
  Vector logits; ///< -inf marks a model that cannot serve this task
  Vector alpha;  ///< softmax(logits)
};

struct FslConfig {
  int steps = 500;
  double learning_rate = 0.1;
};

/// One frozen cluster model viewed as a distribution over the target labels.
class ComponentPredictor {
 public:
  /// Classifier head of a shared-classifier model.
  ComponentPredictor(LinearMap encoder, LinearMap head);
  /// Encoder plus anchors built from the target support.
  ComponentPredictor(LinearMap encoder, Matrix anchors);

  Vector predict_proba(const Vector &x) const;

 private:
  LinearMap encoder_;
  std::optional<LinearMap> head_;
  Matrix anchors_;
};

/// p(y|x) = Σ_k α_k P(y|x; Λ_k).
class MixturePredictor {
 public:
  MixturePredictor() = default;
  MixturePredictor(std::vector<ComponentPredictor> components, std::vector<std::size_t> model_index,
                   CombinationWeights weights);

  Vector predict_proba(const Vector &x) const;
  int predict(const Vector &x) const { return argmax(predict_proba(x)); }
  double accuracy(std::span<const Example> data) const;
  /// Mean negative log-likelihood.
  double cross_entropy(std::span<const Example> data) const;

  const CombinationWeights &weights() const { return weights_; }

 private:
  std::vector<ComponentPredictor> components_;
  std::vector<std::size_t> model_index_; // component -> position in the model list
  CombinationWeights weights_;
};

/// Component for models[k] on this task, or nullopt when it cannot produce a
/// distribution over the task's labels.
std::optional<ComponentPredictor> component_for(const ClusterModel &model, const FewShotTask &task);

/// Learns the mixture logits on the support set by full-batch gradient descent
/// from uniform weights, then keeps a single-model (one-hot) mixture if one fits
/// the support better. Throws "no-compatible-cluster".
MixturePredictor fsl_combine(std::span<const ClusterModel> models, const FewShotTask &task, const FslConfig &config = {});

struct AdaptiveResult {
  bool fallback = false;
  double best_cluster_accuracy = 0; ///< best support accuracy over compatible cluster models
  std::optional<MixturePredictor> mixture;
  std::optional<TaskModel> single_task;

  Vector predict_proba(const Vector &x) const;
  int predict(const Vector &x) const { return argmax(predict_proba(x)); }
  double accuracy(std::span<const Example> data) const;
};

/// Falls back to a single-task model trained on the support set when no
/// cluster model exceeds `threshold` accuracy on the support.
AdaptiveResult adaptive_fsl(std::span<const ClusterModel> models, const FewShotTask &task, double threshold,
                            const TrainConfig &fallback_config, const FslConfig &config = {});

} // namespace taskclust

#include "taskclust/cluster_learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "taskclust/error.hpp"

namespace taskclust {

const char *to_string(ClusterModelKind kind)
{
  switch (kind) {
  case ClusterModelKind::shared_classifier: return "shared_classifier";
  case ClusterModelKind::shared_encoder_multihead: return "shared_encoder_multihead";
  case ClusterModelKind::metric_encoder: return "metric_encoder";
  }
  return "unknown";
}

ClusterModelKind cluster_model_kind_from(const std::string &name)
{
  for (auto kind : {ClusterModelKind::shared_classifier, ClusterModelKind::shared_encoder_multihead,
                    ClusterModelKind::metric_encoder})
    if (name == to_string(kind)) return kind;
  throw Error("bad-model-kind", name);
}

Vector ClusterModel::predict(const Vector &x, std::size_t head) const
{
  if (head >= heads.size()) throw Error("no-head", "model kind " + std::string(to_string(kind)) + " has no head " +
                                                       std::to_string(head));
  return softmax(heads[head](encoder(x)));
}

std::optional<std::size_t> ClusterModel::head_for(const std::string &task_id) const
{
  if (kind != ClusterModelKind::shared_encoder_multihead) return heads.empty() ? std::nullopt : std::optional<std::size_t>(0);
  for (std::size_t t = 0; t < task_ids.size(); ++t)
    if (task_ids[t] == task_id) return t;
  return std::nullopt;
}

namespace {

void fit_metric_encoder(LinearMap &encoder, std::span<const detail::LabeledBatch> tasks, const TrainConfig &config,
                        Rng &rng)
{
  std::vector<std::size_t> order(tasks.size());
  for (std::size_t t = 0; t < order.size(); ++t) order[t] = t;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto t : order) {
      const auto &task = tasks[t];
      const Index m = task.x.cols();
      if (m == 0) continue;

      // Anchor inputs: per-label mean of the task's training inputs (labels absent from the task are skipped).
      Matrix means = Matrix::Zero(task.label_count, task.x.rows());
      Vector counts = Vector::Zero(task.label_count);
      for (Index c = 0; c < m; ++c) {
        means.row(task.y[static_cast<std::size_t>(c)]) += task.x.col(c).transpose();
        counts[task.y[static_cast<std::size_t>(c)]] += 1;
      }
      std::vector<Index> present;
      for (Index l = 0; l < task.label_count; ++l)
        if (counts[l] > 0) present.push_back(l);
      if (present.size() < 2) continue;

      Matrix anchor_in(static_cast<Index>(present.size()), task.x.rows());
      std::vector<int> slot(static_cast<std::size_t>(task.label_count), -1);
      for (std::size_t s = 0; s < present.size(); ++s) {
        anchor_in.row(static_cast<Index>(s)) = means.row(present[s]) / counts[present[s]];
        slot[static_cast<std::size_t>(present[s])] = static_cast<int>(s);
      }

      const Matrix enc = (encoder.weight * task.x).colwise() + encoder.bias;                 // h x m
      const Matrix anchors = (anchor_in * encoder.weight.transpose()).rowwise() +
                             encoder.bias.transpose();                                      // L' x h
      Matrix grad = anchors * enc;                                                          // logits, L' x m
      for (Index c = 0; c < m; ++c) {
        grad.col(c) = softmax(grad.col(c));
        grad(slot[static_cast<std::size_t>(task.y[static_cast<std::size_t>(c)])], c) -= 1.0;
      }
      grad /= static_cast<double>(m);

      const Matrix d_query = anchors.transpose() * grad; // h x m
      const Matrix d_anchor = grad * enc.transpose();    // L' x h
      const Matrix d_weight = d_query * task.x.transpose() + d_anchor.transpose() * anchor_in;
      const Vector d_bias = d_query.rowwise().sum() + d_anchor.colwise().sum().transpose();
      encoder.weight -= config.learning_rate * d_weight;
      encoder.bias -= config.learning_rate * d_bias;
    }
  }
}

} // namespace

ClusterModel train_cluster_model(std::span<const TaskDataset> cluster, ClusterModelKind kind, const TrainConfig &config,
                                 int cluster_id)
{
  if (cluster.empty()) throw Error("empty-cluster", "cluster " + std::to_string(cluster_id));
  const Index dim = cluster.front().dim();
  for (const auto &task : cluster) {
    task.validate();
    if (task.dim() != dim) throw Error("dim-mismatch", task.task_id);
    if (task.train.empty()) throw Error("empty-train", task.task_id);
  }

  ClusterModel model;
  model.cluster_id = cluster_id;
  model.kind = kind;
  for (const auto &task : cluster) model.task_ids.push_back(task.task_id);

  Rng rng(config.seed);
  model.encoder = LinearMap::random(config.hidden, dim, config.init_scale, rng);
  const detail::SgdSettings sgd{config.learning_rate, config.epochs, config.batch_size};

  switch (kind) {
  case ClusterModelKind::shared_encoder_multihead: {
    std::vector<detail::LabeledBatch> batches;
    for (const auto &task : cluster) {
      model.heads.push_back(LinearMap::random(task.label_count, config.hidden, config.init_scale, rng));
      batches.push_back(detail::pack(task.train, task.label_count));
    }
    std::vector<LinearMap *> heads;
    for (auto &h : model.heads) heads.push_back(&h);
    detail::fit_encoder_heads(model.encoder, heads, batches, sgd, true, rng);
    break;
  }
  case ClusterModelKind::shared_classifier: {
    const int labels = cluster.front().label_count;
    std::vector<Example> pooled;
    for (const auto &task : cluster) {
      if (task.label_count != labels)
        throw Error("label-space-mismatch", task.task_id + " has " + std::to_string(task.label_count) +
                                                " labels, expected " + std::to_string(labels));
      pooled.insert(pooled.end(), task.train.begin(), task.train.end());
    }
    model.heads.push_back(LinearMap::random(labels, config.hidden, config.init_scale, rng));
    const auto batch = detail::pack(pooled, labels);
    LinearMap *heads[] = {&model.heads.front()};
    detail::fit_encoder_heads(model.encoder, heads, std::span(&batch, 1), sgd, true, rng);
    break;
  }
  case ClusterModelKind::metric_encoder: {
    std::vector<detail::LabeledBatch> batches;
    for (const auto &task : cluster) batches.push_back(detail::pack(task.train, task.label_count));
    fit_metric_encoder(model.encoder, batches, config, rng);
    break;
  }
  }
  return model;
}

Matrix anchor_encodings(const LinearMap &encoder, std::span<const Example> support, int label_count)
{
  if (support.empty()) throw Error("no-support", "support set is empty");
  Matrix anchors = Matrix::Zero(label_count, encoder.out_dim());
  Vector counts = Vector::Zero(label_count);
  for (const auto &ex : support) {
    if (ex.y < 0 || ex.y >= label_count) throw Error("label-out-of-range");
    anchors.row(ex.y) += encoder(ex.x).transpose();
    counts[ex.y] += 1;
  }
  for (int l = 0; l < label_count; ++l) {
    if (counts[l] == 0) throw Error("no-support", "label " + std::to_string(l) + " has no support example");
    anchors.row(l) /= counts[l];
  }
  return anchors;
}

Vector metric_predict(const ClusterModel &model, std::span<const Example> support, int label_count, const Vector &x)
{
  const Matrix anchors = anchor_encodings(model.encoder, support, label_count);
  return softmax(anchors * model.encoder(x));
}

ComponentPredictor::ComponentPredictor(LinearMap encoder, LinearMap head)
  : encoder_{std::move(encoder)}
  , head_{std::move(head)}
{
}

ComponentPredictor::ComponentPredictor(LinearMap encoder, Matrix anchors)
  : encoder_{std::move(encoder)}
  , anchors_{std::move(anchors)}
{
}

Vector ComponentPredictor::predict_proba(const Vector &x) const
{
  const Vector h = encoder_(x);
  return head_ ? softmax((*head_)(h)) : softmax(anchors_ * h);
}

MixturePredictor::MixturePredictor(std::vector<ComponentPredictor> components, std::vector<std::size_t> model_index,
                                   CombinationWeights weights)
  : components_{std::move(components)}
  , model_index_{std::move(model_index)}
  , weights_{std::move(weights)}
{
}

Vector MixturePredictor::predict_proba(const Vector &x) const
{
  Vector p;
  for (std::size_t c = 0; c < components_.size(); ++c) {
    const double a = weights_.alpha[static_cast<Index>(model_index_[c])];
    if (a == 0) continue;
    const Vector q = components_[c].predict_proba(x);
    if (p.size() == 0) p = Vector::Zero(q.size());
    p += a * q;
  }
  return p;
}

double MixturePredictor::accuracy(std::span<const Example> data) const
{
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto &ex : data) hits += predict(ex.x) == ex.y;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

double MixturePredictor::cross_entropy(std::span<const Example> data) const
{
  double loss = 0;
  for (const auto &ex : data) loss -= std::log(std::max(predict_proba(ex.x)[ex.y], 1e-300));
  return data.empty() ? 0.0 : loss / static_cast<double>(data.size());
}

std::optional<ComponentPredictor> component_for(const ClusterModel &model, const FewShotTask &task)
{
  switch (model.kind) {
  case ClusterModelKind::shared_classifier:
    if (model.heads.size() != 1 || model.heads.front().out_dim() != task.label_count) return std::nullopt;
    return ComponentPredictor(model.encoder, model.heads.front());
  case ClusterModelKind::metric_encoder:
    return ComponentPredictor(model.encoder, anchor_encodings(model.encoder, task.support, task.label_count));
  case ClusterModelKind::shared_encoder_multihead: return std::nullopt;
  }
  return std::nullopt;
}

namespace {

/// Mean of -log Σ_k α_k P[k, s] over support examples s.
double mixture_loss(const Matrix &probs, const Vector &alpha)
{
  const Vector mix = (alpha.transpose() * probs).transpose();
  double loss = 0;
  for (Index s = 0; s < mix.size(); ++s) loss -= std::log(std::max(mix[s], 1e-300));
  return loss / static_cast<double>(mix.size());
}

} // namespace

MixturePredictor fsl_combine(std::span<const ClusterModel> models, const FewShotTask &task, const FslConfig &config)
{
  if (task.support.empty()) throw Error("no-support", task.task_id);

  std::vector<ComponentPredictor> components;
  std::vector<std::size_t> index;
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (auto c = component_for(models[k], task)) {
      components.push_back(std::move(*c));
      index.push_back(k);
    }
  }
  if (components.empty()) throw Error("no-compatible-cluster", task.task_id);

  // probs(k, s): probability component k assigns to the true label of support example s.
  const Index kc = static_cast<Index>(components.size());
  const Index m = static_cast<Index>(task.support.size());
  Matrix probs(kc, m);
  for (Index k = 0; k < kc; ++k)
    for (Index s = 0; s < m; ++s) {
      const auto &ex = task.support[static_cast<std::size_t>(s)];
      probs(k, s) = components[static_cast<std::size_t>(k)].predict_proba(ex.x)[ex.y];
    }

  Vector z = Vector::Zero(kc);
  for (int step = 0; step < config.steps; ++step) {
    const Vector alpha = softmax(z);
    const Vector mix = (alpha.transpose() * probs).transpose().cwiseMax(1e-300);
    Vector grad = Vector::Zero(kc);
    for (Index s = 0; s < m; ++s)
      grad.array() -= alpha.array() * (probs.col(s).array() - mix[s]) / mix[s];
    z -= config.learning_rate * grad / static_cast<double>(m);
  }

  // A one-hot mixture is always feasible; keep it when gradient descent has not caught up.
  Vector alpha = softmax(z);
  double best = mixture_loss(probs, alpha);
  std::optional<Index> vertex;
  for (Index k = 0; k < kc; ++k) {
    const double loss = mixture_loss(probs, Vector::Unit(kc, k));
    if (loss < best) {
      best = loss;
      vertex = k;
    }
  }
  if (vertex) {
    z = Vector::Constant(kc, -std::numeric_limits<double>::infinity());
    z[*vertex] = 0;
    alpha = Vector::Unit(kc, *vertex);
  }

  CombinationWeights weights;
  weights.logits = Vector::Constant(static_cast<Index>(models.size()), -std::numeric_limits<double>::infinity());
  weights.alpha = Vector::Zero(static_cast<Index>(models.size()));
  for (Index k = 0; k < kc; ++k) {
    weights.logits[static_cast<Index>(index[static_cast<std::size_t>(k)])] = z[k];
    weights.alpha[static_cast<Index>(index[static_cast<std::size_t>(k)])] = alpha[k];
  }
  return MixturePredictor(std::move(components), std::move(index), std::move(weights));
}

Vector AdaptiveResult::predict_proba(const Vector &x) const
{
  return single_task ? single_task->predict_proba(x) : mixture->predict_proba(x);
}

double AdaptiveResult::accuracy(std::span<const Example> data) const
{
  return single_task ? single_task->accuracy(data) : mixture->accuracy(data);
}

AdaptiveResult adaptive_fsl(std::span<const ClusterModel> models, const FewShotTask &task, double threshold,
                            const TrainConfig &fallback_config, const FslConfig &config)
{
  if (threshold < 0 || threshold >= 1) throw Error("bad-threshold", "threshold must lie in [0, 1)");

  AdaptiveResult result;
  for (const auto &model : models) {
    const auto component = component_for(model, task);
    if (!component) continue;
    std::size_t hits = 0;
    for (const auto &ex : task.support) hits += argmax(component->predict_proba(ex.x)) == ex.y;
    result.best_cluster_accuracy =
        std::max(result.best_cluster_accuracy, static_cast<double>(hits) / static_cast<double>(task.support.size()));
  }

  if (result.best_cluster_accuracy <= threshold) {
    result.fallback = true;
    TaskDataset local;
    local.task_id = task.task_id;
    local.label_count = task.label_count;
    local.train = task.support;
    result.single_task = train_single_task(local, fallback_config);
    return result;
  }
  result.mixture = fsl_combine(models, task, config);
  return result;
}

} // namespace taskclust

#include "taskclust/transfer_estimation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <unordered_set>

#include "taskclust/error.hpp"
#include "taskclust/parallel.hpp"

namespace taskclust {

Index TaskDataset::dim() const
{
  for (const auto *split : {&train, &valid, &test})
    if (!split->empty()) return split->front().x.size();
  return 0;
}

void TaskDataset::validate() const
{
  if (label_count <= 0) throw Error("bad-label-count", task_id);
  const Index d = dim();
  for (const auto *split : {&train, &valid, &test}) {
    for (const auto &ex : *split) {
      if (ex.x.size() != d) throw Error("dim-mismatch", task_id);
      if (ex.y < 0 || ex.y >= label_count) throw Error("label-out-of-range", task_id);
    }
  }
}

LinearMap LinearMap::random(Index out, Index in, double scale, Rng &rng)
{
  LinearMap m(out, in);
  std::normal_distribution<double> normal(0.0, scale / std::sqrt(static_cast<double>(std::max<Index>(in, 1))));
  for (Index c = 0; c < in; ++c)
    for (Index r = 0; r < out; ++r) m.weight(r, c) = normal(rng);
  return m;
}

Vector softmax(const Vector &logits)
{
  Vector p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

int argmax(const Vector &v)
{
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<int>(best);
}

Vector TaskModel::predict_proba(const Vector &x) const { return softmax(classifier(encoder(x))); }

int TaskModel::predict(const Vector &x) const { return argmax(classifier(encoder(x))); }

double TaskModel::accuracy(std::span<const Example> data) const
{
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto &ex : data) hits += predict(ex.x) == ex.y;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

namespace detail {

LabeledBatch pack(std::span<const Example> data, int label_count)
{
  LabeledBatch b;
  b.label_count = label_count;
  if (data.empty()) return b;
  b.x.resize(data.front().x.size(), static_cast<Index>(data.size()));
  b.y.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    b.x.col(static_cast<Index>(i)) = data[i].x;
    b.y.push_back(data[i].y);
  }
  return b;
}

void fit_encoder_heads(LinearMap &encoder, std::span<LinearMap *const> heads, std::span<const LabeledBatch> tasks,
                       const SgdSettings &sgd, bool train_encoder, Rng &rng)
{
  struct Ref {
    std::size_t task;
    Index col;
  };
  std::vector<Ref> order;
  for (std::size_t t = 0; t < tasks.size(); ++t)
    for (Index c = 0; c < tasks[t].x.cols(); ++c) order.push_back({t, c});
  if (order.empty()) return;

  const std::size_t batch = static_cast<std::size_t>(std::max(1, sgd.batch_size));
  Matrix g_enc_w(encoder.weight.rows(), encoder.weight.cols());
  Vector g_enc_b(encoder.bias.size());
  std::vector<Matrix> g_head_w(heads.size());
  std::vector<Vector> g_head_b(heads.size());

  for (int epoch = 0; epoch < sgd.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      g_enc_w.setZero();
      g_enc_b.setZero();
      for (std::size_t t = 0; t < heads.size(); ++t) {
        g_head_w[t].setZero(heads[t]->weight.rows(), heads[t]->weight.cols());
        g_head_b[t].setZero(heads[t]->bias.size());
      }
      for (std::size_t k = start; k < stop; ++k) {
        const auto [t, c] = order[k];
        const auto x = tasks[t].x.col(c);
        const LinearMap &head = *heads[t];
        const Vector h = encoder.weight * x + encoder.bias;
        Vector dz = softmax(head.weight * h + head.bias);
        dz[tasks[t].y[static_cast<std::size_t>(c)]] -= 1.0;
        g_head_w[t].noalias() += dz * h.transpose();
        g_head_b[t] += dz;
        if (train_encoder) {
          const Vector dh = head.weight.transpose() * dz;
          g_enc_w.noalias() += dh * x.transpose();
          g_enc_b += dh;
        }
      }
      const double step = sgd.learning_rate / static_cast<double>(stop - start);
      for (std::size_t t = 0; t < heads.size(); ++t) {
        heads[t]->weight -= step * g_head_w[t];
        heads[t]->bias -= step * g_head_b[t];
      }
      if (train_encoder) {
        encoder.weight -= step * g_enc_w;
        encoder.bias -= step * g_enc_b;
      }
    }
  }
}

} // namespace detail

namespace {

detail::SgdSettings sgd_from(const TrainConfig &config, int epochs)
{
  return {config.learning_rate, epochs, config.batch_size};
}

} // namespace

TaskModel train_single_task(const TaskDataset &dataset, const TrainConfig &config)
{
  if (dataset.train.empty()) throw Error("empty-train", dataset.task_id);
  dataset.validate();

  Rng rng(config.seed);
  TaskModel model;
  model.encoder = LinearMap::random(config.hidden, dataset.dim(), config.init_scale, rng);
  model.classifier = LinearMap::random(dataset.label_count, config.hidden, config.init_scale, rng);

  const auto batch = detail::pack(dataset.train, dataset.label_count);
  LinearMap *heads[] = {&model.classifier};
  detail::fit_encoder_heads(model.encoder, heads, std::span(&batch, 1), sgd_from(config, config.epochs), true, rng);
  return model;
}

double transfer_score(const TaskModel &source, const TaskDataset &target, const TrainConfig &config)
{
  if (source.encoder.in_dim() != target.dim())
    throw Error("dim-mismatch", "source encoder expects " + std::to_string(source.encoder.in_dim()) +
                                    " features, target " + target.task_id + " has " + std::to_string(target.dim()));
  if (target.train.empty()) throw Error("empty-train", target.task_id);

  if (config.identical_labels) {
    if (source.label_count() != target.label_count) throw Error("label-space-mismatch", target.task_id);
    return source.accuracy(target.train);
  }
  if (target.valid.empty()) throw Error("empty-valid", target.task_id);

  Rng rng(config.seed);
  TaskModel adapted;
  adapted.encoder = source.encoder;
  adapted.classifier = LinearMap::random(target.label_count, source.encoder.out_dim(), config.init_scale, rng);
  const auto batch = detail::pack(target.train, target.label_count);
  LinearMap *heads[] = {&adapted.classifier};
  detail::fit_encoder_heads(adapted.encoder, heads, std::span(&batch, 1), sgd_from(config, config.transfer_epochs),
                            false, rng);
  return adapted.accuracy(target.valid);
}

std::vector<TaskPair> sample_task_pairs(int n, std::int64_t budget, std::uint64_t seed)
{
  const std::int64_t total = static_cast<std::int64_t>(n) * (n - 1) / 2;
  if (budget > total)
    throw Error("budget-too-large", std::to_string(budget) + " pairs requested, " + std::to_string(total) + " exist");
  if (budget < 0) throw Error("bad-budget");

  // Floyd's algorithm: exactly `budget` distinct linear pair indices.
  Rng rng(seed);
  std::unordered_set<std::int64_t> chosen;
  chosen.reserve(static_cast<std::size_t>(budget) * 2);
  for (std::int64_t j = total - budget; j < total; ++j) {
    std::uniform_int_distribution<std::int64_t> pick(0, j);
    const std::int64_t t = pick(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<std::int64_t> ids(chosen.begin(), chosen.end());
  std::sort(ids.begin(), ids.end());

  // Linear index k enumerates (i, j), i < j, row by row.
  std::vector<TaskPair> pairs;
  pairs.reserve(ids.size());
  std::int64_t row = 0, row_start = 0;
  for (auto k : ids) {
    while (k >= row_start + (n - 1 - row)) {
      row_start += n - 1 - row;
      ++row;
    }
    pairs.push_back({static_cast<int>(row), static_cast<int>(row + 1 + (k - row_start))});
  }
  return pairs;
}

TransferMatrix::TransferMatrix(int n)
  : n{n}
  , scores(Matrix::Identity(n, n))
  , observed(Mask::Constant(n, n, false))
{
  for (int i = 0; i < n; ++i) observed(i, i) = true;
}

void TransferMatrix::set(int i, int j, double value)
{
  scores(i, j) = value;
  observed(i, j) = true;
}

std::int64_t TransferMatrix::observed_pair_count() const
{
  std::int64_t count = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) count += observed(i, j);
  return count;
}

void TransferMatrix::validate() const
{
  if (scores.rows() != n || scores.cols() != n || observed.rows() != n || observed.cols() != n)
    throw Error("bad-transfer-matrix", "shape");
  for (int i = 0; i < n; ++i) {
    if (!observed(i, i) || scores(i, i) != 1.0) throw Error("bad-transfer-matrix", "diagonal must be observed and 1");
    for (int j = 0; j < n; ++j) {
      if (observed(i, j) != observed(j, i)) throw Error("bad-transfer-matrix", "mask not pair-symmetric");
      if (observed(i, j) && !(scores(i, j) >= 0.0 && scores(i, j) <= 1.0))
        throw Error("bad-transfer-matrix", "score outside [0,1]");
    }
  }
}

TransferMatrix build_transfer_matrix(std::span<const TaskDataset> tasks, std::span<const TaskPair> pairs,
                                     const TrainConfig &config)
{
  std::vector<TaskModel> models(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t i) {
    TrainConfig c = config;
    c.seed = derive_seed(config.seed, {stage::train, i});
    models[i] = train_single_task(tasks[i], c);
  });
  return build_transfer_matrix(tasks, models, pairs, config);
}

TransferMatrix build_transfer_matrix(std::span<const TaskDataset> tasks, std::span<const TaskModel> models,
                                     std::span<const TaskPair> pairs, const TrainConfig &config)
{
  const int n = static_cast<int>(tasks.size());
  for (const auto &p : pairs)
    if (p.first < 0 || p.second >= n || p.first >= p.second)
      throw Error("bad-pair", std::to_string(p.first) + "," + std::to_string(p.second));

  struct Outcome {
    double forward = 0, backward = 0;
    bool ok = false;
  };
  std::vector<Outcome> outcomes(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
    TrainConfig c = config;
    try {
      c.seed = derive_seed(config.seed, {stage::transfer, ui, uj});
      outcomes[k].forward = transfer_score(models[ui], tasks[uj], c);
      c.seed = derive_seed(config.seed, {stage::transfer, uj, ui});
      outcomes[k].backward = transfer_score(models[uj], tasks[ui], c);
      outcomes[k].ok = true;
    } catch (const Error &e) {
      if (e.code() == "empty-train" || e.code() == "empty-valid") return;
      throw Error(e.code(), "pair {" + std::to_string(i) + "," + std::to_string(j) + "}: " + e.detail(), e.kind());
    }
  });

  TransferMatrix s(n);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    if (!outcomes[k].ok) {
      std::cerr << "warning: pair {" << i << "," << j << "} has a degenerate split; left unobserved\n";
      continue;
    }
    s.set(i, j, outcomes[k].forward);
    s.set(j, i, outcomes[k].backward);
  }
  return s;
}

} // namespace taskclust

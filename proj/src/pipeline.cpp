#include "taskclust/pipeline.hpp"

#include <cmath>
#include <functional>
#include <iostream>
#include <map>

#include "taskclust/error.hpp"
#include "taskclust/parallel.hpp"
#include "taskclust/random.hpp"

namespace taskclust {

namespace {

using io::Json;
using Setter = std::function<void(const Json &)>;

[[noreturn]] void bad_config(const std::string &what) { throw Error("bad-config", what); }

/// Dispatches each key of `section` to its setter; unknown keys are errors.
void read_section(const Json &section, const std::string &name, const std::map<std::string, Setter> &setters)
{
  if (!section.is_object()) bad_config(name + " must be an object");
  for (const auto &[key, value] : section.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) bad_config("unknown key " + name + "." + key);
    try {
      it->second(value);
    } catch (const Json::exception &e) {
      bad_config(name + "." + key + ": " + e.what());
    }
  }
}

template <class T> Setter set(T &field)
{
  return [&field](const Json &v) { field = v.get<T>(); };
}

template <class T> Setter set_opt(std::optional<T> &field)
{
  return [&field](const Json &v) {
    if (v.is_null())
      field.reset();
    else
      field = v.get<T>();
  };
}

Setter set_path(fs::path &field)
{
  return [&field](const Json &v) { field = v.get<std::string>(); };
}

void read_train(TrainConfig &t, const Json &j, const std::string &name)
{
  read_section(j, name, {{"hidden", set(t.hidden)},
                         {"learning_rate", set(t.learning_rate)},
                         {"epochs", set(t.epochs)},
                         {"transfer_epochs", set(t.transfer_epochs)},
                         {"batch_size", set(t.batch_size)},
                         {"init_scale", set(t.init_scale)},
                         {"identical_labels", set(t.identical_labels)}});
}

void read_solver(SolverConfig &s, const Json &j, const std::string &name)
{
  read_section(j, name, {{"rho0", set_opt(s.rho0)},
                         {"rho_growth", set(s.rho_growth)},
                         {"balance_ratio", set(s.balance_ratio)},
                         {"rho_max", set(s.rho_max)},
                         {"tol", set(s.tol)},
                         {"dual_tol", set(s.dual_tol)},
                         {"max_iter", set(s.max_iter)},
                         {"lambda", set_opt(s.lambda_override)},
                         {"exploit_symmetry", set(s.exploit_symmetry)}});
}

void read_filter(FilterParams &p, const Json &j, const std::string &name)
{
  read_section(j, name, {{"p1", set(p.p1)},
                         {"p2", set(p.p2)},
                         {"mode", [&](const Json &v) { p.mode = filter_mode_from(v.get<std::string>()); }},
                         {"include_diagonal", set(p.include_diagonal_in_stats)}});
}

void read_spectral(SpectralOptions &o, const Json &j, const std::string &name)
{
  read_section(j, name, {{"restarts", set(o.restarts)},
                         {"max_iter", set(o.max_iter)},
                         {"self_loop", set(o.self_loop)},
                         {"tol", set(o.tol)}});
}

void read_family(TaskFamilyOptions &f, const Json &j, const std::string &name)
{
  read_section(j, name, {{"clusters", set(f.clusters)},
                         {"tasks_per_cluster", set(f.tasks_per_cluster)},
                         {"dim", set(f.dim)},
                         {"label_count", set(f.label_count)},
                         {"train_per_task", set(f.train_per_task)},
                         {"valid_per_task", set(f.valid_per_task)},
                         {"test_per_task", set(f.test_per_task)},
                         {"prototype_scale", set(f.prototype_scale)},
                         {"task_shift", set(f.task_shift)},
                         {"noise", set(f.noise)},
                         {"label_noise", set(f.label_noise)}});
}

std::vector<TaskPair> all_pairs(int n)
{
  std::vector<TaskPair> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.push_back({i, j});
  return pairs;
}

std::int64_t pair_budget(int n, std::optional<std::int64_t> pairs, double fraction)
{
  const std::int64_t total = static_cast<std::int64_t>(n) * (n - 1) / 2;
  if (pairs) return *pairs;
  if (!(fraction > 0 && fraction <= 1)) throw Error("bad-config", "pair_fraction must lie in (0, 1]");
  return std::clamp<std::int64_t>(std::llround(fraction * static_cast<double>(total)), 0, total);
}

TaskPartition load_partition_for(const fs::path &path, std::size_t task_count)
{
  auto p = io::partition_from_json(io::read_json(path));
  if (static_cast<std::size_t>(p.n) != task_count)
    throw Error("bad-format", "partition covers " + std::to_string(p.n) + " tasks, found " + std::to_string(task_count));
  return p;
}

void dump_models(const fs::path &dir, std::span<const ClusterModel> models)
{
  if (dir.empty()) return;
  for (const auto &m : models)
    io::write_json(dir / ("cluster_" + std::to_string(m.cluster_id) + ".json"), io::to_json(m));
}

Json report(const std::string &method, const Json &rows)
{
  double sum = 0;
  for (const auto &r : rows) sum += r.at("accuracy").get<double>();
  return {{"method", method},
          {"tasks", rows},
          {"macro_accuracy", rows.empty() ? 0.0 : sum / static_cast<double>(rows.size())}};
}

} // namespace

SynthMode synth_mode_from(const std::string &name)
{
  if (name == "planted") return SynthMode::planted;
  if (name == "scores") return SynthMode::scores;
  if (name == "tasks") return SynthMode::tasks;
  throw Error("bad-config", "unknown synth mode " + name);
}

FilterMode filter_mode_from(const std::string &name)
{
  if (name == "standard") return FilterMode::standard;
  if (name == "xl") return FilterMode::xl;
  throw Error("bad-config", "unknown filter mode " + name);
}

SamplingMode sampling_mode_from(const std::string &name)
{
  if (name == "pair_aware") return SamplingMode::pair_aware;
  if (name == "uniform") return SamplingMode::uniform;
  throw Error("bad-config", "unknown sampling mode " + name);
}

void apply_config(PipelineConfig &c, const Json &j)
{
  read_section(
    j, "config",
    {{"seed", set(c.seed)},
     {"threads", set(c.threads)},
     {"estimate",
      [&](const Json &s) {
        auto &e = c.estimate;
        read_section(s, "estimate", {{"tasks_dir", set_path(e.tasks_dir)},
                                     {"output", set_path(e.output)},
                                     {"pairs", set_opt(e.pairs)},
                                     {"pair_fraction", set(e.pair_fraction)},
                                     {"train", [&](const Json &t) { read_train(e.train, t, "estimate.train"); }}});
      }},
     {"filter",
      [&](const Json &s) {
        auto &f = c.filter;
        Json params = Json::object();
        read_section(s, "filter", {{"input", set_path(f.input)},
                                   {"output", set_path(f.output)},
                                   {"p1", [&](const Json &v) { params["p1"] = v; }},
                                   {"p2", [&](const Json &v) { params["p2"] = v; }},
                                   {"mode", [&](const Json &v) { params["mode"] = v; }},
                                   {"include_diagonal", [&](const Json &v) { params["include_diagonal"] = v; }}});
        read_filter(f.params, params, "filter");
      }},
     {"complete",
      [&](const Json &s) {
        auto &m = c.complete;
        read_section(s, "complete", {{"input", set_path(m.input)},
                                     {"x_output", set_path(m.x_output)},
                                     {"e_output", set_path(m.e_output)},
                                     {"diagnostics", set_path(m.diagnostics)},
                                     {"solver", [&](const Json &v) { read_solver(m.solver, v, "complete.solver"); }}});
      }},
     {"cluster",
      [&](const Json &s) {
        auto &k = c.cluster;
        read_section(s, "cluster", {{"input", set_path(k.input)},
                                    {"output", set_path(k.output)},
                                    {"diagnostics", set_path(k.diagnostics)},
                                    {"K", set(k.k)},
                                    {"filter", [&](const Json &v) { read_filter(k.filter, v, "cluster.filter"); }},
                                    {"solver", [&](const Json &v) { read_solver(k.solver, v, "cluster.solver"); }},
                                    {"spectral", [&](const Json &v) { read_spectral(k.spectral, v, "cluster.spectral"); }}});
      }},
     {"mtl",
      [&](const Json &s) {
        auto &m = c.mtl;
        read_section(s, "mtl", {{"tasks_dir", set_path(m.tasks_dir)},
                                {"partition", set_path(m.partition)},
                                {"output", set_path(m.output)},
                                {"models_dir", set_path(m.models_dir)},
                                {"train", [&](const Json &t) { read_train(m.train, t, "mtl.train"); }}});
      }},
     {"fsl",
      [&](const Json &s) {
        auto &f = c.fsl;
        read_section(s, "fsl",
                     {{"tasks_dir", set_path(f.tasks_dir)},
                      {"targets_dir", set_path(f.targets_dir)},
                      {"partition", set_path(f.partition)},
                      {"output", set_path(f.output)},
                      {"models_dir", set_path(f.models_dir)},
                      {"kind", [&](const Json &v) { f.kind = cluster_model_kind_from(v.get<std::string>()); }},
                      {"no_clustering", set(f.no_clustering)},
                      {"adaptive", set(f.adaptive)},
                      {"threshold", set(f.threshold)},
                      {"steps", set(f.fsl.steps)},
                      {"learning_rate", set(f.fsl.learning_rate)},
                      {"train", [&](const Json &t) { read_train(f.train, t, "fsl.train"); }}});
      }},
     {"sweep",
      [&](const Json &s) {
        auto &w = c.sweep;
        read_section(
          s, "sweep",
          {{"n", set(w.n)},
           {"k", set(w.k)},
           {"m1_fractions", set(w.m1_fractions)},
           {"m2_fractions", set(w.m2_fractions)},
           {"trials", set(w.trials)},
           {"output", set_path(w.output)},
           {"mode", [&](const Json &v) { w.options.mode = sampling_mode_from(v.get<std::string>()); }},
           {"lambda", set_opt(w.options.lambda)},
           {"solver", [&](const Json &v) { read_solver(w.options.solver, v, "sweep.solver"); }}});
      }},
     {"synth", [&](const Json &s) {
        auto &y = c.synth;
        read_section(s, "synth",
                     {{"mode", [&](const Json &v) { y.mode = synth_mode_from(v.get<std::string>()); }},
                      {"output_dir", set_path(y.output_dir)},
                      {"n", set(y.n)},
                      {"k", set(y.k)},
                      {"sizes", set(y.sizes)},
                      {"m1_fraction", set(y.m1_fraction)},
                      {"m2_fraction", set(y.m2_fraction)},
                      {"sampling", [&](const Json &v) { y.sampling = sampling_mode_from(v.get<std::string>()); }},
                      {"pair_fraction", set(y.pair_fraction)},
                      {"within", set(y.within)},
                      {"cross", set(y.cross)},
                      {"jitter", set(y.jitter)},
                      {"family", [&](const Json &v) { read_family(y.family, v, "synth.family"); }},
                      {"target_shots", set(y.target_shots)},
                      {"targets_per_cluster", set(y.targets_per_cluster)},
                      {"out_of_cluster_targets", set(y.out_of_cluster_targets)}});
      }}});
}

PipelineConfig load_config(const fs::path &path)
{
  PipelineConfig c;
  Json j;
  try {
    j = io::read_json(path);
  } catch (const Error &e) {
    if (e.code() == "bad-format") bad_config(e.detail());
    throw;
  }
  apply_config(c, j);
  return c;
}

std::uint64_t stage_seed(std::uint64_t master, std::uint64_t stage) { return derive_seed(master, {stage}); }

TaskPartition cluster_transfer_matrix(const TransferMatrix &s, int k, const FilterParams &filter_params,
                                      const SolverConfig &solver, const SpectralOptions &spectral, std::uint64_t seed,
                                      ClusterDiagnostics *diagnostics)
{
  if (k < 1) throw Error("bad-K", "K must be at least 1, got " + std::to_string(k));
  if (k > s.n) throw Error("bad-K", "K=" + std::to_string(k) + " exceeds task count " + std::to_string(s.n));
  const auto partial = filter(s, filter_params);
  auto result = complete(CompletionProblem::from(partial), solver);
  Matrix x = result.x;
  const double clipped = clip_unit_interval(x);
  auto partition = spectral_cluster(x, k, seed, spectral);
  if (diagnostics) {
    diagnostics->observed_pairs = partial.observed_offdiagonal() / 2;
    diagnostics->completion = std::move(result);
    diagnostics->clipped_fraction = clipped;
  }
  return partition;
}

std::vector<ClusterModel> train_partition_models(std::span<const TaskDataset> tasks, const TaskPartition &partition,
                                                 ClusterModelKind kind, const TrainConfig &train, std::uint64_t seed)
{
  const auto cells = partition.clusters();
  std::vector<ClusterModel> models(cells.size());
  parallel_for(cells.size(), [&](std::size_t k) {
    std::vector<TaskDataset> members;
    for (int i : cells[k]) members.push_back(tasks[static_cast<std::size_t>(i)]);
    TrainConfig c = train;
    c.seed = derive_seed(seed, {k});
    models[k] = train_cluster_model(members, kind, c, static_cast<int>(k));
  });
  return models;
}

io::Json completion_diagnostics(const CompletionResult &r, double clipped_fraction)
{
  return {{"iterations", r.iterations},
          {"final_residual", r.final_residual},
          {"converged", r.converged},
          {"lambda", r.lambda},
          {"clipped_fraction", clipped_fraction}};
}

void run_estimate(const PipelineConfig &c)
{
  const auto &e = c.estimate;
  if (e.tasks_dir.empty()) throw Error("missing-input", "estimate.tasks_dir is not set");
  const auto tasks = io::load_task_dir(e.tasks_dir);
  const int n = static_cast<int>(tasks.size());
  const auto budget = pair_budget(n, e.pairs, e.pair_fraction);
  const auto pairs = budget == static_cast<std::int64_t>(n) * (n - 1) / 2
                       ? all_pairs(n)
                       : sample_task_pairs(n, budget, stage_seed(c.seed, stage::pairs));
  TrainConfig train = e.train;
  train.seed = c.seed;
  io::write_text(e.output, io::transfer_csv(build_transfer_matrix(tasks, pairs, train)));
}

void run_filter(const PipelineConfig &c)
{
  const auto s = io::parse_transfer_csv(io::read_text(c.filter.input));
  io::write_text(c.filter.output, io::partial_csv(filter(s, c.filter.params)));
}

void run_complete(const PipelineConfig &c)
{
  const auto &m = c.complete;
  const auto partial = io::parse_partial_csv(io::read_text(m.input));
  const auto result = complete(CompletionProblem::from(partial), m.solver);
  Matrix clipped = result.x;
  const double fraction = clip_unit_interval(clipped);
  io::write_text(m.x_output, io::dense_csv(result.x));
  io::write_text(m.e_output, io::dense_csv(result.e));
  io::write_json(m.diagnostics, completion_diagnostics(result, fraction));
}

void run_cluster(const PipelineConfig &c)
{
  const auto &k = c.cluster;
  if (k.k < 1) throw Error("bad-K", "K must be at least 1, got " + std::to_string(k.k));
  const auto s = io::parse_transfer_csv(io::read_text(k.input));
  ClusterDiagnostics diag;
  const auto partition = cluster_transfer_matrix(s, k.k, k.filter, k.solver, k.spectral,
                                                 stage_seed(c.seed, stage::cluster), &diag);
  io::write_json(k.output, io::to_json(partition));
  auto d = completion_diagnostics(diag.completion, diag.clipped_fraction);
  d["observed_pairs"] = diag.observed_pairs;
  io::write_json(k.diagnostics, d);
}

void run_mtl(const PipelineConfig &c)
{
  const auto &m = c.mtl;
  if (m.tasks_dir.empty()) throw Error("missing-input", "mtl.tasks_dir is not set");
  const auto tasks = io::load_task_dir(m.tasks_dir);
  const auto partition = load_partition_for(m.partition, tasks.size());
  const auto models = train_partition_models(tasks, partition, ClusterModelKind::shared_encoder_multihead, m.train,
                                             stage_seed(c.seed, stage::cluster_models));
  dump_models(m.models_dir, models);

  Json rows = Json::array();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto &model = models[static_cast<std::size_t>(partition.assignment[i])];
    const auto head = *model.head_for(tasks[i].task_id);
    std::size_t correct = 0;
    for (const auto &ex : tasks[i].test) correct += argmax(model.predict(ex.x, head)) == ex.y;
    const double acc = tasks[i].test.empty() ? 0.0 : static_cast<double>(correct) / tasks[i].test.size();
    rows.push_back({{"task_id", tasks[i].task_id}, {"method", "robusttc-mtl"}, {"accuracy", acc}, {"alpha", Json::array()}});
  }
  io::write_json(m.output, report("robusttc-mtl", rows));
}

void run_fsl(const PipelineConfig &c)
{
  const auto &f = c.fsl;
  if (f.tasks_dir.empty()) throw Error("missing-input", "fsl.tasks_dir is not set");
  if (f.targets_dir.empty()) throw Error("missing-input", "fsl.targets_dir is not set");
  if (f.adaptive && !(f.threshold >= 0 && f.threshold < 1)) throw Error("bad-threshold", "threshold must lie in [0, 1)");
  const auto tasks = io::load_task_dir(f.tasks_dir);
  const auto targets = io::load_task_dir(f.targets_dir);

  TaskPartition partition;
  if (f.no_clustering) {
    partition.n = partition.k = static_cast<int>(tasks.size());
    for (int i = 0; i < partition.n; ++i) partition.assignment.push_back(i);
  } else {
    partition = load_partition_for(f.partition, tasks.size());
  }
  const auto models = train_partition_models(tasks, partition, f.kind, f.train, stage_seed(c.seed, stage::cluster_models));
  dump_models(f.models_dir, models);

  const std::string method =
    std::string(f.no_clustering ? "no-clustering" : "robusttc-fsl") + (f.adaptive ? "-adaptive" : "");
  Json rows = Json::array();
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const auto &target = targets[t];
    const FewShotTask task{target.task_id, target.label_count, target.train, target.test};
    Json row{{"task_id", target.task_id}, {"method", method}};
    std::optional<MixturePredictor> mixture;
    if (f.adaptive) {
      TrainConfig fallback = f.train;
      fallback.seed = derive_seed(c.seed, {stage::fsl, t});
      auto result = adaptive_fsl(models, task, f.threshold, fallback, f.fsl);
      row["accuracy"] = result.accuracy(task.query);
      row["fallback"] = result.fallback;
      mixture = result.mixture;
    } else {
      mixture = fsl_combine(models, task, f.fsl);
      row["accuracy"] = mixture->accuracy(task.query);
    }
    const Vector alpha = mixture ? mixture->weights().alpha : Vector();
    row["alpha"] = std::vector<double>(alpha.begin(), alpha.end());
    rows.push_back(std::move(row));
  }
  io::write_json(f.output, report(method, rows));
}

void run_sweep(const PipelineConfig &c)
{
  const auto &w = c.sweep;
  if (w.m1_fractions.empty() || w.m2_fractions.empty()) throw Error("bad-grid", "grid is empty");
  std::vector<SweepCell> grid;
  for (double m2 : w.m2_fractions) {
    if (!(m2 >= 0 && m2 <= 1)) throw Error("bad-grid", "m2 fraction outside [0, 1]");
    for (double m1 : w.m1_fractions) {
      if (!(m1 > 0 && m1 <= 1)) throw Error("bad-grid", "m1 fraction outside (0, 1]");
      grid.push_back({m1, m2});
    }
  }
  const auto rows = phase_sweep(w.n, w.k, grid, w.trials, stage_seed(c.seed, stage::sweep), w.options);
  io::write_text(w.output, io::sweep_csv(rows));
}

void run_synth(const PipelineConfig &c)
{
  const auto &y = c.synth;
  const auto seed = stage_seed(c.seed, stage::synth);
  const auto &dir = y.output_dir;

  if (y.mode == SynthMode::tasks) {
    const auto family = generate_task_family(y.family, derive_seed(seed, {0}));
    for (const auto &task : family.tasks) io::save_task(dir / "tasks" / (task.task_id + ".json"), task);
    std::uint64_t tag = 0;
    Json targets = Json::array();
    auto emit = [&](int shift, const std::string &id, bool in_cluster) {
      const auto task = sample_family_task(family, shift, y.target_shots, id, derive_seed(seed, {1, tag++}));
      io::save_task(dir / "targets" / (id + ".json"), task);
      targets.push_back({{"task_id", id}, {"shift", shift}, {"in_cluster", in_cluster}});
    };
    for (int g = 0; g < y.family.clusters; ++g)
      for (int t = 0; t < y.targets_per_cluster; ++t) emit(g, "target_c" + std::to_string(g) + "_" + std::to_string(t), true);
    const int free_shifts = y.family.label_count - y.family.clusters;
    if (y.out_of_cluster_targets > 0 && free_shifts < 1)
      throw Error("bad-config", "out-of-cluster targets need label_count > clusters");
    for (int t = 0; t < y.out_of_cluster_targets; ++t)
      emit(y.family.clusters + t % std::max(free_shifts, 1), "target_ooc_" + std::to_string(t), false);
    io::write_json(dir / "membership.json", {{"membership", family.membership}, {"targets", targets}});
    return;
  }

  const auto sizes = y.sizes.empty() ? balanced_sizes(y.n, y.k) : y.sizes;
  const auto inst = generate_planted(y.n, y.k, sizes, derive_seed(seed, {0}));
  io::write_json(dir / "membership.json", {{"n", inst.n}, {"K", inst.k}, {"membership", inst.membership}});
  io::write_text(dir / "x_star.csv", io::dense_csv(inst.x_star));

  if (y.mode == SynthMode::scores) {
    const auto budget = pair_budget(y.n, std::nullopt, y.pair_fraction);
    const auto pairs = sample_task_pairs(y.n, budget, derive_seed(seed, {1}));
    io::write_text(dir / "scores.csv",
                   io::transfer_csv(synthetic_transfer_matrix(inst, pairs, y.within, y.cross, y.jitter, derive_seed(seed, {2}))));
    return;
  }

  const auto m1 = m1_from_fraction(y.n, y.m1_fraction);
  const auto plan = observe_and_corrupt(inst, m1, m2_from_fraction(m1, y.m2_fraction, y.sampling), derive_seed(seed, {1}), y.sampling);
  io::write_text(dir / "y.csv", io::dense_csv(plan.y));
  io::write_text(dir / "omega.csv", io::dense_csv(plan.omega.cast<double>()));
  if (y.sampling == SamplingMode::pair_aware) {
    // Mirrored sampling keeps Y symmetric, so the i<j half is a complete record
    // apart from the diagonal, which the partial format fixes at 1.
    PartialSimilarityMatrix partial(y.n);
    for (int i = 0; i < y.n; ++i)
      for (int j = i + 1; j < y.n; ++j)
        if (plan.omega(i, j)) partial.set(i, j, plan.y(i, j) > 0.5 ? Similarity::similar : Similarity::dissimilar);
    io::write_text(dir / "partial.csv", io::partial_csv(partial));
  }
}

} // namespace taskclust

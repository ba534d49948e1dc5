// Command-line driver: estimate, filter, complete, cluster, mtl, fsl, sweep, synth.
#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "taskclust/error.hpp"
#include "taskclust/parallel.hpp"
#include "taskclust/pipeline.hpp"

namespace {

using namespace taskclust;

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kNumerical = 3;

int report_error(const std::string &code, const std::string &detail, const std::string &command, int exit_code)
{
  nlohmann::json record{{"error", code}, {"detail", detail}, {"exit_code", exit_code}};
  if (!command.empty()) record["command"] = command;
  std::cerr << record.dump() << "\n";
  return exit_code;
}

/// Finds `--config <path>` or `--config=<path>` before CLI11 parses anything,
/// so file values become defaults that explicit flags then override.
std::string find_config(int argc, char **argv)
{
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--config") == 0 && i + 1 < argc) return argv[i + 1];
    if (std::strncmp(argv[i], "--config=", 9) == 0) return argv[i] + 9;
  }
  return {};
}

template <class T> CLI::Option *opt(CLI::App *app, const std::string &name, T &field, const std::string &help)
{
  return app->add_option(name, field, help)->capture_default_str();
}

template <class T>
CLI::Option *opt_optional(CLI::App *app, const std::string &name, std::optional<T> &field, const std::string &help)
{
  return app->add_option_function<T>(name, [&field](const T &v) { field = v; }, help);
}

CLI::Option *path_opt(CLI::App *app, const std::string &name, std::filesystem::path &field, const std::string &help)
{
  return app
    ->add_option_function<std::string>(name, [&field](const std::string &v) { field = v; }, help)
    ->default_str(field.string());
}

void train_opts(CLI::App *app, TrainConfig &t)
{
  opt(app, "--hidden", t.hidden, "encoder width");
  opt(app, "--learning-rate", t.learning_rate, "SGD step size");
  opt(app, "--epochs", t.epochs, "training epochs");
  opt(app, "--batch-size", t.batch_size, "mini-batch size");
  app->add_flag("--identical-labels", t.identical_labels, "score transfer by direct evaluation of the source model");
}

void solver_opts(CLI::App *app, SolverConfig &s)
{
  opt_optional(app, "--lambda", s.lambda_override, "weight of the l1 term (default 1/sqrt(n))");
  opt(app, "--max-iter", s.max_iter, "solver iteration cap");
  opt(app, "--tol", s.tol, "primal residual tolerance");
}

void filter_opts(CLI::App *app, FilterParams &p)
{
  opt(app, "--p1", p.p1, "upper threshold multiplier");
  opt(app, "--p2", p.p2, "lower threshold multiplier");
  app->add_option_function<std::string>("--mode", [&p](const std::string &v) { p.mode = filter_mode_from(v); },
                                        "standard or xl")
    ->check(CLI::IsMember({"standard", "xl"}));
  app->add_flag_callback("--xl", [&p] { p.mode = FilterMode::xl; }, "shorthand for --mode xl");
  app->add_flag_callback("--exclude-diagonal", [&p] { p.include_diagonal_in_stats = false; },
                         "leave S_jj out of the column statistics");
}

int run(int argc, char **argv)
{
  PipelineConfig config;
  const auto config_path = find_config(argc, argv);
  if (!config_path.empty()) config = load_config(config_path);

  CLI::App app{"Task clustering by robust matrix completion"};
  app.require_subcommand(1);
  std::string ignored_config;
  app.add_option("--config", ignored_config, "JSON config; flags override its values");
  opt(&app, "--seed", config.seed, "master seed");
  opt(&app, "--threads", config.threads, "worker threads (0 = all cores)");

  auto *estimate = app.add_subcommand("estimate", "transfer-performance matrix from a directory of task files");
  path_opt(estimate, "--tasks", config.estimate.tasks_dir, "directory of task JSON files");
  path_opt(estimate, "-o,--output", config.estimate.output, "transfer CSV");
  opt_optional(estimate, "--pairs", config.estimate.pairs, "number of sampled task pairs");
  opt(estimate, "--pair-fraction", config.estimate.pair_fraction, "fraction of pairs when --pairs is absent");
  train_opts(estimate, config.estimate.train);
  opt(estimate, "--transfer-epochs", config.estimate.train.transfer_epochs, "classifier retraining epochs");

  auto *filter_cmd = app.add_subcommand("filter", "threshold transfer scores into a partial similarity matrix");
  path_opt(filter_cmd, "-i,--input", config.filter.input, "transfer CSV");
  path_opt(filter_cmd, "-o,--output", config.filter.output, "partial similarity CSV");
  filter_opts(filter_cmd, config.filter.params);

  auto *complete_cmd = app.add_subcommand("complete", "recover the full similarity matrix");
  path_opt(complete_cmd, "-i,--input", config.complete.input, "partial similarity CSV");
  path_opt(complete_cmd, "--x-output", config.complete.x_output, "dense CSV for X");
  path_opt(complete_cmd, "--e-output", config.complete.e_output, "dense CSV for E");
  path_opt(complete_cmd, "--diagnostics", config.complete.diagnostics, "solver diagnostics JSON");
  solver_opts(complete_cmd, config.complete.solver);

  auto *cluster = app.add_subcommand("cluster", "filter, complete and partition a transfer matrix");
  path_opt(cluster, "-i,--input", config.cluster.input, "transfer CSV");
  path_opt(cluster, "-o,--output", config.cluster.output, "partition JSON");
  path_opt(cluster, "--diagnostics", config.cluster.diagnostics, "diagnostics JSON");
  opt(cluster, "-K,--clusters", config.cluster.k, "number of clusters");
  filter_opts(cluster, config.cluster.filter);
  solver_opts(cluster, config.cluster.solver);

  auto *mtl = app.add_subcommand("mtl", "multi-task training per cluster and per-task test accuracy");
  path_opt(mtl, "--tasks", config.mtl.tasks_dir, "directory of task JSON files");
  path_opt(mtl, "--partition", config.mtl.partition, "partition JSON");
  path_opt(mtl, "-o,--output", config.mtl.output, "report JSON");
  path_opt(mtl, "--models-dir", config.mtl.models_dir, "write model dumps here");
  train_opts(mtl, config.mtl.train);

  auto *fsl = app.add_subcommand("fsl", "few-shot prediction with mixtures of cluster models");
  path_opt(fsl, "--tasks", config.fsl.tasks_dir, "training task directory");
  path_opt(fsl, "--targets", config.fsl.targets_dir, "target task directory (train = support, test = query)");
  path_opt(fsl, "--partition", config.fsl.partition, "partition JSON");
  path_opt(fsl, "-o,--output", config.fsl.output, "report JSON");
  path_opt(fsl, "--models-dir", config.fsl.models_dir, "write model dumps here");
  fsl->add_option_function<std::string>(
       "--kind", [&](const std::string &v) { config.fsl.kind = cluster_model_kind_from(v); }, "cluster model kind")
    ->check(CLI::IsMember({"shared_classifier", "metric_encoder"}));
  fsl->add_flag("--no-clustering", config.fsl.no_clustering, "one model per training task");
  fsl->add_flag("--adaptive", config.fsl.adaptive, "fall back to a single-task model on poor support accuracy");
  opt(fsl, "--threshold", config.fsl.threshold, "support accuracy threshold for the fallback");
  opt(fsl, "--steps", config.fsl.fsl.steps, "mixture weight optimisation steps");
  train_opts(fsl, config.fsl.train);

  auto *sweep = app.add_subcommand("sweep", "recovery probability over a grid of sampling and corruption rates");
  opt(sweep, "--n", config.sweep.n, "tasks per instance");
  opt(sweep, "--k", config.sweep.k, "planted clusters");
  double m1_min = -1, m1_max = -1;
  int m1_steps = 0;
  sweep->add_option("--m1-min", m1_min, "smallest observed fraction");
  sweep->add_option("--m1-max", m1_max, "largest observed fraction");
  sweep->add_option("--m1-steps", m1_steps, "evenly spaced fractions from min to max");
  opt(sweep, "--m2", config.sweep.m2_fractions, "corrupted fractions of the observed entries");
  opt(sweep, "--trials", config.sweep.trials, "trials per cell");
  path_opt(sweep, "-o,--output", config.sweep.output, "sweep CSV");
  sweep->add_option_function<std::string>(
         "--sampling", [&](const std::string &v) { config.sweep.options.mode = sampling_mode_from(v); },
         "pair_aware or uniform")
    ->check(CLI::IsMember({"pair_aware", "uniform"}));
  opt_optional(sweep, "--lambda", config.sweep.options.lambda, "fixed lambda for every cell");

  auto *synth = app.add_subcommand("synth", "write synthetic planted instances, scores or task families");
  synth->add_option_function<std::string>(
         "--mode", [&](const std::string &v) { config.synth.mode = synth_mode_from(v); }, "planted, scores or tasks")
    ->check(CLI::IsMember({"planted", "scores", "tasks"}));
  path_opt(synth, "-o,--output-dir", config.synth.output_dir, "output directory");
  opt(synth, "--n", config.synth.n, "tasks");
  opt(synth, "--k", config.synth.k, "clusters");
  opt(synth, "--sizes", config.synth.sizes, "cluster sizes (balanced when omitted)");
  opt(synth, "--m1-fraction", config.synth.m1_fraction, "observed fraction (planted)");
  opt(synth, "--m2-fraction", config.synth.m2_fraction, "corrupted fraction of observed (planted)");
  opt(synth, "--pair-fraction", config.synth.pair_fraction, "sampled pair fraction (scores)");
  opt(synth, "--within", config.synth.within, "within-cluster transfer (scores)");
  opt(synth, "--cross", config.synth.cross, "cross-cluster transfer (scores)");
  opt(synth, "--jitter", config.synth.jitter, "uniform jitter (scores)");
  opt(synth, "--shots", config.synth.target_shots, "support examples per label for targets (tasks)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    return report_error("usage", e.what(), "", kUsage);
  }

  if (m1_min >= 0 || m1_max >= 0 || m1_steps > 0) {
    if (!(m1_min > 0 && m1_max <= 1 && m1_min <= m1_max && m1_steps >= 1) || (m1_steps == 1 && m1_min != m1_max))
      return report_error("bad-grid", "need 0 < --m1-min <= --m1-max <= 1 and --m1-steps >= 1", "sweep", kUsage);
    config.sweep.m1_fractions.clear();
    for (int s = 0; s < m1_steps; ++s)
      config.sweep.m1_fractions.push_back(s + 1 == m1_steps ? m1_max
                                                            : m1_min + (m1_max - m1_min) * s / (m1_steps - 1));
  }

  set_thread_count(config.threads);
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "estimate") run_estimate(config);
    else if (command == "filter") run_filter(config);
    else if (command == "complete") run_complete(config);
    else if (command == "cluster") run_cluster(config);
    else if (command == "mtl") run_mtl(config);
    else if (command == "fsl") run_fsl(config);
    else if (command == "sweep") run_sweep(config);
    else if (command == "synth") run_synth(config);
  } catch (const Error &e) {
    return report_error(e.code(), e.detail(), command, e.kind() == ErrorKind::numerical ? kNumerical : kUsage);
  } catch (const std::filesystem::filesystem_error &e) {
    return report_error("bad-output", e.what(), command, kUsage);
  }
  return kOk;
}

} // namespace

int main(int argc, char **argv)
{
  try {
    return run(argc, argv);
  } catch (const Error &e) {
    // config loading happens before a subcommand is known
    return report_error(e.code(), e.detail(), "", e.kind() == ErrorKind::numerical ? kNumerical : kUsage);
  } catch (const std::exception &e) {
    return report_error("internal", e.what(), "", 1);
  }
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "taskclust/cluster_learning.hpp"
#include "taskclust/io.hpp"
#include "taskclust/matrix_completion.hpp"
#include "taskclust/score_filter.hpp"
#include "taskclust/spectral_clustering.hpp"
#include "taskclust/synthetic_bench.hpp"
#include "taskclust/synthetic_tasks.hpp"

namespace taskclust {

namespace fs = std::filesystem;

struct EstimateStage {
  fs::path tasks_dir;
  fs::path output = "scores.csv";
  std::optional<std::int64_t> pairs; ///< sampled pair budget; all pairs when unset
  double pair_fraction = 1.0;        ///< used when `pairs` is unset
  TrainConfig train{};
};

struct FilterStage {
  fs::path input = "scores.csv";
  fs::path output = "partial.csv";
  FilterParams params{};
};

struct CompleteStage {
  fs::path input = "partial.csv";
  fs::path x_output = "X.csv";
  fs::path e_output = "E.csv";
  fs::path diagnostics = "completion.json";
  SolverConfig solver{};
};

struct ClusterStage {
  fs::path input = "scores.csv";
  fs::path output = "partition.json";
  fs::path diagnostics = "cluster_diagnostics.json";
  int k = 2;
  FilterParams filter{};
  SolverConfig solver{};
  SpectralOptions spectral{};
};

struct MtlStage {
  fs::path tasks_dir;
  fs::path partition = "partition.json";
  fs::path output = "mtl_report.json";
  fs::path models_dir; ///< model dumps are skipped when empty
  TrainConfig train{};
};

struct FslStage {
  fs::path tasks_dir;
  fs::path targets_dir;
  fs::path partition = "partition.json";
  fs::path output = "fsl_report.json";
  fs::path models_dir;
  ClusterModelKind kind = ClusterModelKind::shared_classifier;
  bool no_clustering = false; ///< one model per training task, ignoring the partition
  bool adaptive = false;
  double threshold = 0.2;
  FslConfig fsl{};
  TrainConfig train{};
};

struct SweepStage {
  int n = 30;
  int k = 3;
  std::vector<double> m1_fractions{0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> m2_fractions{0.0};
  int trials = 10;
  fs::path output = "sweep.csv";
  SweepOptions options{};
};

enum class SynthMode { planted, scores, tasks };

struct SynthStage {
  SynthMode mode = SynthMode::planted;
  fs::path output_dir = "synth";
  int n = 12;
  int k = 3;
  std::vector<int> sizes; ///< balanced when empty
  double m1_fraction = 1.0;
  double m2_fraction = 0.0;
  SamplingMode sampling = SamplingMode::pair_aware;
  double pair_fraction = 0.3;
  double within = 0.9;
  double cross = 0.1;
  double jitter = 0.05;
  TaskFamilyOptions family{};
  int target_shots = 1;
  int targets_per_cluster = 1;
  int out_of_cluster_targets = 1;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  int threads = 0;
  EstimateStage estimate;
  FilterStage filter;
  CompleteStage complete;
  ClusterStage cluster;
  MtlStage mtl;
  FslStage fsl;
  SweepStage sweep;
  SynthStage synth;
};

/// Overlays the sections present in `j` onto `config`. Unknown keys are
/// rejected with "bad-config" so typos do not silently fall back to defaults.
void apply_config(PipelineConfig &config, const io::Json &j);
PipelineConfig load_config(const fs::path &path);

std::uint64_t stage_seed(std::uint64_t master, std::uint64_t stage);

SynthMode synth_mode_from(const std::string &name);
FilterMode filter_mode_from(const std::string &name);
SamplingMode sampling_mode_from(const std::string &name);

struct ClusterDiagnostics {
  std::int64_t observed_pairs = 0;
  CompletionResult completion;
  double clipped_fraction = 0;
};

/// filter → complete → clip to [0, 1] → spectral clustering.
TaskPartition cluster_transfer_matrix(const TransferMatrix &s, int k, const FilterParams &filter_params,
                                      const SolverConfig &solver, const SpectralOptions &spectral, std::uint64_t seed,
                                      ClusterDiagnostics *diagnostics = nullptr);

/// One model per partition cell, trained in parallel with per-cluster seeds.
std::vector<ClusterModel> train_partition_models(std::span<const TaskDataset> tasks, const TaskPartition &partition,
                                                 ClusterModelKind kind, const TrainConfig &train, std::uint64_t seed);

io::Json completion_diagnostics(const CompletionResult &r, double clipped_fraction);

void run_estimate(const PipelineConfig &config);
void run_filter(const PipelineConfig &config);
void run_complete(const PipelineConfig &config);
void run_cluster(const PipelineConfig &config);
void run_mtl(const PipelineConfig &config);
void run_fsl(const PipelineConfig &config);
void run_sweep(const PipelineConfig &config);
void run_synth(const PipelineConfig &config);

} // namespace taskclust

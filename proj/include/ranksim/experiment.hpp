#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ranksim/baselines.hpp"
#include "ranksim/evaluation.hpp"
#include "ranksim/model.hpp"
#include "ranksim/regularizer.hpp"
#include "ranksim/synthetic.hpp"

namespace ranksim {

struct TrainingConfig {
  std::size_t epochs = 90;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  std::vector<std::size_t> lr_milestones{60, 80};  // lr *= lr_decay at each
  double lr_decay = 0.1;
  double weight_decay = 1e-4;
  RegressionLossKind loss = RegressionLossKind::l1;
  std::vector<std::size_t> hidden{64, 64};
};

struct EvalConfig {
  double gm_clamp = kDefaultGmClamp;
  std::size_t ranking_batch_size = 32;
  bool ranking_matrices = true;
};

/// One training run. The RankSim term enters the objective as
///   task_loss + gamma * sum_{rows} penalty(...)
/// i.e. gamma multiplies the raw row sum, with no division by the subset size.
struct ExperimentConfig {
  std::variant<SkewSpec, std::string> dataset = SkewSpec{};  // spec, or a gen-data directory
  std::optional<RankSimConfig> ranksim;
  std::optional<LdsKernel> lds;
  ReweightScheme reweight = ReweightScheme::none;
  std::optional<FocalRConfig> focal_r;
  std::optional<RrtConfig> rrt;
  TrainingConfig training;
  EvalConfig eval;
  std::uint64_t seed = 0;
  std::string output_dir;

  void validate() const;
  /// Stages executed by run(): a single stage, or the two RRT stages.
  std::vector<TrainingStage> stages() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Stable 64-bit FNV-1a hash of the config JSON (output_dir excluded), as hex.
std::string config_hash(const ExperimentConfig& c);

struct EpochLog {
  std::size_t stage = 0;
  std::size_t epoch = 0;  // within the stage, 1-based
  double lr = 0.0;
  double task_loss = 0.0;     // mean over batches
  double ranksim_loss = 0.0;  // mean raw regularizer value over batches (gamma not applied)
  double val_mae = 0.0;
};

struct RunArtifacts {
  std::string status = "ok";  // "ok", "diverged" or "failed"
  std::optional<std::string> error;
  std::size_t best_stage = 0;
  std::size_t best_epoch = 0;
  MetricReport val_at_best;
  MetricReport test_at_best;
  MetricReport test_final;
  std::vector<EpochLog> log;
  std::optional<AvgRankingMatrices> ranking;
  RegressorNet best_model;
  RegressorNet final_model;
  nlohmann::json config_echo;

  bool ok() const { return status == "ok"; }
  nlohmann::json metrics_json() const;
};

/// Loads or generates the dataset named by the config.
ImbalancedDataset load_dataset(const ExperimentConfig& config);

/// Trains and evaluates one configuration. Deterministic for a given config.
/// When output_dir is set, writes config.json, metrics.json, metrics_*.csv,
/// train_log.csv, checkpoints and ranking matrices there.
RunArtifacts run(const ExperimentConfig& config);

/// Same, on an already materialized dataset.
RunArtifacts run(const ExperimentConfig& config, const ImbalancedDataset& dataset);

/// Writes the artifact files of a finished run into `dir`.
void write_artifacts(const RunArtifacts& artifacts, const std::filesystem::path& dir);

struct SweepRow {
  std::string hash;
  nlohmann::json overrides;
  std::string status;
  std::optional<std::string> error;
  MetricReport test_at_best;
};

/// Expands {"base": {...}, "grid": {"/json/pointer": [values...]}} or
/// {"configs": [...]} into concrete configs (grid order: last key fastest).
std::vector<std::pair<ExperimentConfig, nlohmann::json>> expand_sweep(const nlohmann::json& j);

/// Runs every config (up to `jobs` at once); failures are recorded per row.
std::vector<SweepRow> sweep(const std::vector<std::pair<ExperimentConfig, nlohmann::json>>& configs,
                            std::size_t jobs = 1);

/// Summary keyed by config hash: one row per config with per-region test MAE/GM.
std::string sweep_summary_csv(const std::vector<SweepRow>& rows);

}  // namespace ranksim

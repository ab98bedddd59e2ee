// Command-line front end: run / sweep / gen-data / rank-matrices.
//
// Every subcommand prints a JSON document on stdout when it succeeds and a
// {"error": {"type": ..., "message": ...}} document on stderr with a nonzero
// exit code when it fails. Relative output directories are resolved against
// $RANKSIM_OUTPUT_ROOT when that variable is set.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ranksim/error.hpp"
#include "ranksim/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ranksim;

namespace {

struct Overrides {
  std::string config_file;
  std::string dataset_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> data_seed;
  std::optional<std::size_t> epochs, batch_size, n_train, input_dim;
  std::optional<double> lr, weight_decay, noise_sigma, rate;
  std::string loss, profile;
  std::vector<std::size_t> zero_shot_bins;
  bool ranksim = false;
  std::optional<double> gamma, lambda, huber_delta;
  std::string penalty, feature_sim;
  bool no_unique_sampling = false;
  bool normalize_ranks = false;
  bool lds = false;
  std::optional<std::size_t> lds_size;
  std::optional<double> lds_sigma;
  std::string reweight;
  bool focal_r = false;
  std::optional<double> focal_beta, focal_gamma;
  bool rrt = false;
  std::optional<std::size_t> rrt_stage2_epochs;
  std::string output_dir;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

std::string resolve_output(const std::string& dir) {
  if (dir.empty()) return dir;
  const char* root = std::getenv("RANKSIM_OUTPUT_ROOT");
  if (root && *root && fs::path(dir).is_relative()) return (fs::path(root) / dir).string();
  return dir;
}

void add_dataset_flags(CLI::App* app, Overrides& o) {
  app->add_option("--dataset", o.dataset_path, "Directory written by gen-data");
  app->add_option("--data-seed", o.data_seed, "Seed of the synthetic dataset");
  app->add_option("--n-train", o.n_train, "Training samples");
  app->add_option("--input-dim", o.input_dim, "Input features (>= 8)");
  app->add_option("--noise-sigma", o.noise_sigma, "Input noise standard deviation");
  app->add_option("--profile", o.profile, "exponential | zipf | two_peak");
  app->add_option("--rate", o.rate, "Exponential skew rate");
  app->add_option("--zero-shot-bins", o.zero_shot_bins, "Bins withheld from training");
}

void add_run_flags(CLI::App* app, Overrides& o) {
  app->add_option("-c,--config", o.config_file, "JSON experiment config");
  add_dataset_flags(app, o);
  app->add_option("--seed", o.seed, "Training seed");
  app->add_option("--epochs", o.epochs);
  app->add_option("--batch-size", o.batch_size);
  app->add_option("--lr", o.lr);
  app->add_option("--weight-decay", o.weight_decay);
  app->add_option("--loss", o.loss, "l1 | mse");
  app->add_flag("--ranksim", o.ranksim, "Enable the RankSim regularizer");
  app->add_option("--gamma", o.gamma, "RankSim balancing weight");
  app->add_option("--lambda", o.lambda, "RankSim interpolation strength");
  app->add_option("--penalty", o.penalty, "mse | mae | huber | cosine_distance | linf");
  app->add_option("--huber-delta", o.huber_delta);
  app->add_option("--feature-sim", o.feature_sim,
                  "cosine | correlation | negative_mse | negative_mae | negative_linf");
  app->add_flag("--no-unique-sampling", o.no_unique_sampling,
                "Use the whole batch instead of one sample per label");
  app->add_flag("--normalize-ranks", o.normalize_ranks,
                "Divide rank vectors by their length before the penalty");
  app->add_flag("--lds", o.lds, "Label distribution smoothing");
  app->add_option("--lds-size", o.lds_size);
  app->add_option("--lds-sigma", o.lds_sigma);
  app->add_option("--reweight", o.reweight, "none | inv | sqinv");
  app->add_flag("--focal-r", o.focal_r, "Focal-R loss scaling");
  app->add_option("--focal-beta", o.focal_beta);
  app->add_option("--focal-gamma", o.focal_gamma);
  app->add_flag("--rrt", o.rrt, "Two-stage regressor retraining");
  app->add_option("--rrt-stage2-epochs", o.rrt_stage2_epochs);
  app->add_option("-o,--output-dir", o.output_dir);
}

SkewSpec& spec_of(ExperimentConfig& c) {
  if (!std::holds_alternative<SkewSpec>(c.dataset)) {
    throw Error("dataset flags need a synthetic dataset, not --dataset PATH");
  }
  return std::get<SkewSpec>(c.dataset);
}

void apply_dataset_overrides(const Overrides& o, ExperimentConfig& c) {
  if (!o.dataset_path.empty()) c.dataset = o.dataset_path;
  if (o.data_seed) spec_of(c).seed = *o.data_seed;
  if (o.n_train) spec_of(c).n_train = *o.n_train;
  if (o.input_dim) spec_of(c).input_dim = *o.input_dim;
  if (o.noise_sigma) spec_of(c).noise_sigma = *o.noise_sigma;
  if (!o.profile.empty()) spec_of(c).profile = parse_skew_profile(o.profile);
  if (o.rate) spec_of(c).rate = *o.rate;
  if (!o.zero_shot_bins.empty()) spec_of(c).zero_shot_bins = o.zero_shot_bins;
}

ExperimentConfig build_config(const Overrides& o) {
  ExperimentConfig c;
  if (!o.config_file.empty()) c = read_json_file(o.config_file).get<ExperimentConfig>();
  apply_dataset_overrides(o, c);
  if (o.seed) c.seed = *o.seed;
  if (o.epochs) c.training.epochs = *o.epochs;
  if (o.batch_size) c.training.batch_size = *o.batch_size;
  if (o.lr) c.training.lr = *o.lr;
  if (o.weight_decay) c.training.weight_decay = *o.weight_decay;
  if (!o.loss.empty()) c.training.loss = parse_regression_loss(o.loss);

  const bool touches_ranksim = o.ranksim || o.gamma || o.lambda || !o.penalty.empty() ||
                               !o.feature_sim.empty() || o.huber_delta || o.no_unique_sampling ||
                               o.normalize_ranks;
  if (touches_ranksim && !c.ranksim) c.ranksim = RankSimConfig{};
  if (c.ranksim) {
    if (o.gamma) c.ranksim->gamma = *o.gamma;
    if (o.lambda) c.ranksim->lambda = *o.lambda;
    if (!o.penalty.empty()) c.ranksim->penalty.kind = parse_penalty_kind(o.penalty);
    if (o.huber_delta) c.ranksim->penalty.huber_delta = *o.huber_delta;
    if (!o.feature_sim.empty()) c.ranksim->feature_sim = parse_feature_similarity(o.feature_sim);
    if (o.no_unique_sampling) c.ranksim->unique_label_sampling = false;
    if (o.normalize_ranks) c.ranksim->normalize_ranks = true;
  }
  if ((o.lds || o.lds_size || o.lds_sigma) && !c.lds) c.lds = LdsKernel{};
  if (o.lds_size) c.lds->size = *o.lds_size;
  if (o.lds_sigma) c.lds->sigma = *o.lds_sigma;
  if (!o.reweight.empty()) c.reweight = parse_reweight_scheme(o.reweight);
  if ((o.focal_r || o.focal_beta || o.focal_gamma) && !c.focal_r) c.focal_r = FocalRConfig{};
  if (o.focal_beta) c.focal_r->beta = *o.focal_beta;
  if (o.focal_gamma) c.focal_r->gamma_exp = *o.focal_gamma;
  if ((o.rrt || o.rrt_stage2_epochs) && !c.rrt) c.rrt = RrtConfig{c.training.epochs, 10};
  if (o.rrt_stage2_epochs) c.rrt->stage2_epochs = *o.rrt_stage2_epochs;
  if (!o.output_dir.empty()) c.output_dir = o.output_dir;
  c.output_dir = resolve_output(c.output_dir);
  c.validate();
  return c;
}

void print_error(const std::string& type, const std::string& message) {
  std::cerr << json{{"error", {{"type", type}, {"message", message}}}}.dump() << std::endl;
}

int cmd_run(const Overrides& o) {
  const ExperimentConfig c = build_config(o);
  const RunArtifacts art = run(c);
  json out = art.metrics_json();
  out["config_hash"] = config_hash(c);
  if (!c.output_dir.empty()) out["output_dir"] = c.output_dir;
  if (!art.ok()) {
    print_error(art.status, art.error.value_or(""));
    return 1;
  }
  std::cout << out.dump(2) << std::endl;
  return 0;
}

int cmd_sweep(const std::string& file, std::size_t jobs, const std::string& output_dir) {
  json j = read_json_file(file);
  auto configs = expand_sweep(j);
  const std::string root = resolve_output(output_dir);
  for (auto& [cfg, _] : configs) {
    cfg.validate();
    if (!root.empty()) cfg.output_dir = (fs::path(root) / config_hash(cfg)).string();
  }
  const auto rows = sweep(configs, jobs);
  const std::string csv = sweep_summary_csv(rows);
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.status != "ok";
  json out = {{"runs", rows.size()}, {"failed", failed}};
  if (!root.empty()) {
    fs::create_directories(root);
    std::ofstream(fs::path(root) / "summary.csv") << csv;
    out["summary"] = (fs::path(root) / "summary.csv").string();
  } else {
    std::cout << csv;
  }
  std::cout << out.dump(2) << std::endl;
  return 0;
}

int cmd_gen_data(const Overrides& o) {
  ExperimentConfig c;
  if (!o.config_file.empty()) c = read_json_file(o.config_file).get<ExperimentConfig>();
  apply_dataset_overrides(o, c);
  if (o.output_dir.empty()) throw Error("gen-data needs --output-dir");
  const std::string dir = resolve_output(o.output_dir);
  const ImbalancedDataset ds = generate(spec_of(c));
  write_dataset(ds, dir);
  const auto counts = ds.train_counts();
  const auto part = shot_partition(ds);
  std::size_t regions[4] = {0, 0, 0, 0};
  for (auto r : part.regions) ++regions[static_cast<int>(r)];
  std::cout << json{{"output_dir", dir},
                    {"train", ds.train.size()},
                    {"val", ds.val.size()},
                    {"test", ds.test.size()},
                    {"bins", {{"many", regions[0]}, {"medium", regions[1]}, {"few", regions[2]}, {"zero", regions[3]}}}}
                   .dump(2)
            << std::endl;
  return 0;
}

int cmd_rank_matrices(const std::string& run_dir, std::size_t batch_size, const std::string& out_dir,
                      const std::string& checkpoint) {
  const fs::path dir = resolve_output(run_dir);
  ExperimentConfig c = read_json_file((dir / "config.json").string()).get<ExperimentConfig>();
  const RegressorNet net = load_checkpoint(dir / checkpoint);
  const ImbalancedDataset ds = load_dataset(c);
  const auto kind = c.ranksim ? c.ranksim->feature_sim : FeatureSimilarity::cosine;
  const AvgRankingMatrices m = average_ranking_matrices(net, ds.test, batch_size, kind, c.seed);
  const fs::path out = out_dir.empty() ? dir : fs::path(resolve_output(out_dir));
  fs::create_directories(out);
  write_matrix_csv(m.label_matrix, out / "ranking_label.csv");
  write_matrix_csv(m.feature_matrix, out / "ranking_feature.csv");
  std::cout << json{{"batches", m.batch_count},
                    {"batch_size", batch_size},
                    {"label_csv", (out / "ranking_label.csv").string()},
                    {"feature_csv", (out / "ranking_feature.csv").string()}}
                   .dump(2)
            << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RankSim imbalanced-regression experiments"};
  app.require_subcommand(1);

  Overrides run_o;
  auto* run_cmd = app.add_subcommand("run", "Train and evaluate one configuration");
  add_run_flags(run_cmd, run_o);

  std::string sweep_file, sweep_out;
  std::size_t jobs = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a grid or list of configurations");
  sweep_cmd->add_option("sweep_file", sweep_file, "Sweep JSON")->required();
  sweep_cmd->add_option("-j,--jobs", jobs, "Runs executed concurrently");
  sweep_cmd->add_option("-o,--output-dir", sweep_out, "Root directory for run outputs and summary.csv");

  Overrides gen_o;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV + spec JSON");
  gen_cmd->add_option("-c,--config", gen_o.config_file, "Experiment config holding the dataset spec");
  add_dataset_flags(gen_cmd, gen_o);
  gen_cmd->add_option("-o,--output-dir", gen_o.output_dir)->required();

  std::string rm_run, rm_out, rm_ckpt = "checkpoint_best.json";
  std::size_t rm_batch = 32;
  auto* rm_cmd = app.add_subcommand("rank-matrices", "Average ranking matrices of a trained run");
  rm_cmd->add_option("run_dir", rm_run, "Output directory of a previous run")->required();
  rm_cmd->add_option("--batch-size", rm_batch);
  rm_cmd->add_option("--checkpoint", rm_ckpt);
  rm_cmd->add_option("-o,--output-dir", rm_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*run_cmd) return cmd_run(run_o);
    if (*sweep_cmd) return cmd_sweep(sweep_file, jobs, sweep_out);
    if (*gen_cmd) return cmd_gen_data(gen_o);
    if (*rm_cmd) return cmd_rank_matrices(rm_run, rm_batch, rm_out, rm_ckpt);
  } catch (const Error& e) {
    print_error("error", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 1;
}

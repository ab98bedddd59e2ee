#include "ranksim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "ranksim/error.hpp"

namespace ranksim {

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  if (const auto* spec = std::get_if<SkewSpec>(&dataset)) {
    spec->validate();
  } else if (std::get<std::string>(dataset).empty()) {
    throw Error("dataset path is empty");
  }
  if (ranksim) ranksim->validate();
  if (lds) lds->validate();
  if (focal_r) focal_r->validate();
  if (lds && reweight == ReweightScheme::none && !rrt) {
    throw Error("LDS needs a reweight scheme (inv or sqinv)");
  }
  if (rrt && (focal_r || reweight != ReweightScheme::none)) {
    throw Error("RRT re-weights only its second stage; drop focal_r/reweight");
  }
  if (training.batch_size == 0) throw Error("batch_size must be positive");
  if (!(training.lr > 0.0)) throw Error("lr must be positive");
  if (!(training.lr_decay > 0.0)) throw Error("lr_decay must be positive");
  if (!(training.weight_decay >= 0.0)) throw Error("weight_decay must be >= 0");
  if (training.hidden.empty()) throw Error("at least one hidden layer is required");
  if (!(eval.gm_clamp > 0.0)) throw Error("gm_clamp must be positive");
  if (eval.ranking_batch_size < 2) throw Error("ranking_batch_size must be >= 2");
}

std::vector<TrainingStage> ExperimentConfig::stages() const {
  if (rrt) return rrt_schedule(*rrt, ranksim.has_value(), lds.has_value());
  return {{"train", training.epochs, false, ranksim.has_value(), reweight, lds.has_value(),
           focal_r.has_value()}};
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json::object();
  if (const auto* spec = std::get_if<SkewSpec>(&c.dataset)) {
    j["dataset"] = *spec;
  } else {
    j["dataset"] = std::get<std::string>(c.dataset);
  }
  if (c.ranksim) {
    j["ranksim"] = {{"gamma", c.ranksim->gamma},
                    {"lambda", c.ranksim->lambda},
                    {"penalty", to_string(c.ranksim->penalty.kind)},
                    {"huber_delta", c.ranksim->penalty.huber_delta},
                    {"feature_sim", to_string(c.ranksim->feature_sim)},
                    {"unique_label_sampling", c.ranksim->unique_label_sampling},
                    {"normalize_ranks", c.ranksim->normalize_ranks}};
  } else {
    j["ranksim"] = nullptr;
  }
  j["lds"] = c.lds ? nlohmann::json{{"size", c.lds->size}, {"sigma", c.lds->sigma}}
                   : nlohmann::json(nullptr);
  j["reweight"] = to_string(c.reweight);
  j["focal_r"] = c.focal_r ? nlohmann::json{{"beta", c.focal_r->beta},
                                            {"gamma", c.focal_r->gamma_exp}}
                           : nlohmann::json(nullptr);
  j["rrt"] = c.rrt ? nlohmann::json{{"stage1_epochs", c.rrt->stage1_epochs},
                                    {"stage2_epochs", c.rrt->stage2_epochs}}
                   : nlohmann::json(nullptr);
  j["training"] = {{"epochs", c.training.epochs},
                   {"batch_size", c.training.batch_size},
                   {"lr", c.training.lr},
                   {"lr_milestones", c.training.lr_milestones},
                   {"lr_decay", c.training.lr_decay},
                   {"weight_decay", c.training.weight_decay},
                   {"loss", to_string(c.training.loss)},
                   {"hidden", c.training.hidden}};
  j["eval"] = {{"gm_clamp", c.eval.gm_clamp},
               {"ranking_batch_size", c.eval.ranking_batch_size},
               {"ranking_matrices", c.eval.ranking_matrices}};
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
}

namespace {

bool present(const nlohmann::json& j, const char* key) {
  return j.contains(key) && !j.at(key).is_null();
}

}  // namespace

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  static const std::vector<std::string> known = {"dataset", "ranksim", "lds",  "reweight",
                                                 "focal_r", "rrt",     "training", "eval",
                                                 "seed",    "output_dir"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error("unknown config key '" + key + "'");
    }
  }
  ExperimentConfig d;
  if (present(j, "dataset")) {
    if (j.at("dataset").is_string()) {
      d.dataset = j.at("dataset").get<std::string>();
    } else {
      d.dataset = j.at("dataset").get<SkewSpec>();
    }
  }
  if (present(j, "ranksim")) {
    const auto& r = j.at("ranksim");
    RankSimConfig rs;
    rs.gamma = r.value("gamma", rs.gamma);
    rs.lambda = r.value("lambda", rs.lambda);
    if (r.contains("penalty")) rs.penalty.kind = parse_penalty_kind(r.at("penalty").get<std::string>());
    rs.penalty.huber_delta = r.value("huber_delta", rs.penalty.huber_delta);
    if (r.contains("feature_sim")) {
      rs.feature_sim = parse_feature_similarity(r.at("feature_sim").get<std::string>());
    }
    rs.unique_label_sampling = r.value("unique_label_sampling", rs.unique_label_sampling);
    rs.normalize_ranks = r.value("normalize_ranks", rs.normalize_ranks);
    d.ranksim = rs;
  }
  if (present(j, "lds")) {
    LdsKernel k;
    k.size = j.at("lds").value("size", k.size);
    k.sigma = j.at("lds").value("sigma", k.sigma);
    d.lds = k;
  }
  if (present(j, "reweight")) d.reweight = parse_reweight_scheme(j.at("reweight").get<std::string>());
  if (present(j, "focal_r")) {
    FocalRConfig f;
    f.beta = j.at("focal_r").value("beta", f.beta);
    f.gamma_exp = j.at("focal_r").value("gamma", f.gamma_exp);
    d.focal_r = f;
  }
  if (present(j, "rrt")) {
    RrtConfig r;
    r.stage1_epochs = j.at("rrt").value("stage1_epochs", r.stage1_epochs);
    r.stage2_epochs = j.at("rrt").value("stage2_epochs", r.stage2_epochs);
    d.rrt = r;
  }
  if (present(j, "training")) {
    const auto& t = j.at("training");
    d.training.epochs = t.value("epochs", d.training.epochs);
    d.training.batch_size = t.value("batch_size", d.training.batch_size);
    d.training.lr = t.value("lr", d.training.lr);
    d.training.lr_milestones = t.value("lr_milestones", d.training.lr_milestones);
    d.training.lr_decay = t.value("lr_decay", d.training.lr_decay);
    d.training.weight_decay = t.value("weight_decay", d.training.weight_decay);
    if (t.contains("loss")) d.training.loss = parse_regression_loss(t.at("loss").get<std::string>());
    d.training.hidden = t.value("hidden", d.training.hidden);
  }
  if (present(j, "eval")) {
    const auto& e = j.at("eval");
    d.eval.gm_clamp = e.value("gm_clamp", d.eval.gm_clamp);
    d.eval.ranking_batch_size = e.value("ranking_batch_size", d.eval.ranking_batch_size);
    d.eval.ranking_matrices = e.value("ranking_matrices", d.eval.ranking_matrices);
  }
  d.seed = j.value("seed", d.seed);
  d.output_dir = j.value("output_dir", d.output_dir);
  c = std::move(d);
}

std::string config_hash(const ExperimentConfig& c) {
  nlohmann::json j = c;
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Training

namespace {

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(idx[k]));
  }
  return out;
}

std::vector<double> predict(const RegressorNet& net, const Split& split) {
  const Vector p = net.forward(split.x).predictions;
  return {p.data(), p.data() + p.size()};
}

double lr_at(const TrainingConfig& t, std::size_t epoch_index) {
  double lr = t.lr;
  for (std::size_t m : t.lr_milestones) {
    if (epoch_index >= m) lr *= t.lr_decay;
  }
  return lr;
}

struct Diverged {
  std::string message;
};

class Trainer {
 public:
  Trainer(const ExperimentConfig& cfg, const ImbalancedDataset& ds)
      : cfg_(cfg),
        ds_(ds),
        partition_(shot_partition(ds)),
        density_(bin_labels(ds.train.y, ds.binning())),
        shuffle_rng_(cfg.seed ^ 0x5bd1e995ULL),
        subset_rng_(cfg.seed ^ 0x9e3779b97f4a7c15ULL) {
    if (cfg.lds) density_ = lds_smooth(density_, *cfg.lds);
  }

  RunArtifacts train() {
    RunArtifacts art;
    art.config_echo = cfg_;
    RegressorNet net(ds_.spec.input_dim, cfg_.training.hidden, cfg_.seed);
    const auto stages = cfg_.stages();
    try {
      for (std::size_t s = 0; s < stages.size(); ++s) {
        if (s > 0) net = art.best_model;  // later stages continue from the best checkpoint
        run_stage(s, stages[s], net, art);
      }
      art.final_model = net;
    } catch (const Diverged& d) {
      art.status = "diverged";
      art.error = d.message;
      art.final_model = net;  // last good parameters: updates are rejected before they apply
    }
    if (art.best_model.params().layers.empty()) art.best_model = art.final_model;

    const double clamp = cfg_.eval.gm_clamp;
    art.val_at_best = report(predict(art.best_model, ds_.val), ds_.val.y, partition_, clamp);
    art.test_at_best = report(predict(art.best_model, ds_.test), ds_.test.y, partition_, clamp);
    art.test_final = report(predict(art.final_model, ds_.test), ds_.test.y, partition_, clamp);
    if (cfg_.eval.ranking_matrices && ds_.test.size() >= cfg_.eval.ranking_batch_size) {
      const auto kind = cfg_.ranksim ? cfg_.ranksim->feature_sim : FeatureSimilarity::cosine;
      try {
        art.ranking = average_ranking_matrices(art.best_model, ds_.test,
                                               cfg_.eval.ranking_batch_size, kind, cfg_.seed);
      } catch (const Error&) {
        art.ranking.reset();  // e.g. a dead (all-zero) feature vector under cosine
      }
    }
    return art;
  }

 private:
  std::vector<double> stage_bin_weights(const TrainingStage& stage) const {
    return reweight(density_, stage.reweight, stage.lds && stage.reweight != ReweightScheme::none);
  }

  double validate_mae(const RegressorNet& net) const {
    return mae(predict(net, ds_.val), ds_.val.y);
  }

  void consider_best(std::size_t stage, std::size_t epoch, double val_mae, const RegressorNet& net,
                     RunArtifacts& art) {
    if (!(val_mae < best_val_)) return;
    best_val_ = val_mae;
    art.best_model = net;
    art.best_stage = stage;
    art.best_epoch = epoch;
  }

  void run_stage(std::size_t stage_index, const TrainingStage& stage, RegressorNet& net,
                 RunArtifacts& art) {
    const auto bin_w = stage_bin_weights(stage);
    const auto binning = ds_.binning();
    std::vector<double> sample_w(ds_.train.size());
    for (std::size_t i = 0; i < sample_w.size(); ++i) sample_w[i] = bin_w[binning.bin_of(ds_.train.y[i])];

    AdamConfig adam_cfg;
    adam_cfg.lr = cfg_.training.lr;
    adam_cfg.weight_decay = cfg_.training.weight_decay;
    AdamState adam(net.params(), adam_cfg);
    const std::vector<bool> mask = stage.head_only ? head_only_mask(net) : std::vector<bool>{};

    if (stage_index > 0) {
      // The starting point of a later stage competes for the best checkpoint.
      best_val_ = std::numeric_limits<double>::infinity();
      consider_best(stage_index, 0, validate_mae(net), net, art);
    }

    std::vector<std::size_t> order(ds_.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t bs = cfg_.training.batch_size;

    for (std::size_t epoch = 0; epoch < stage.epochs; ++epoch) {
      adam.config.lr = lr_at(cfg_.training, epoch);
      std::shuffle(order.begin(), order.end(), shuffle_rng_);
      double task_sum = 0.0, rs_sum = 0.0;
      std::size_t batches = 0;
      for (std::size_t start = 0; start < order.size(); start += bs) {
        const std::size_t end = std::min(order.size(), start + bs);
        const std::span<const std::size_t> idx(order.data() + start, end - start);
        const auto [task, rs] = step(stage, net, adam, mask, idx, sample_w);
        task_sum += task;
        rs_sum += rs;
        ++batches;
      }
      const double val = validate_mae(net);
      art.log.push_back({stage_index, epoch + 1, adam.config.lr, task_sum / static_cast<double>(batches),
                         rs_sum / static_cast<double>(batches), val});
      consider_best(stage_index, epoch + 1, val, net, art);
    }
  }

  std::pair<double, double> step(const TrainingStage& stage, RegressorNet& net, AdamState& adam,
                                 const std::vector<bool>& mask, std::span<const std::size_t> idx,
                                 const std::vector<double>& sample_w) {
    const Matrix x = gather_rows(ds_.train.x, idx);
    std::vector<double> y(idx.size());
    Vector targets(static_cast<Eigen::Index>(idx.size()));
    Vector weights(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      y[k] = ds_.train.y[idx[k]];
      targets(static_cast<Eigen::Index>(k)) = y[k];
      weights(static_cast<Eigen::Index>(k)) = sample_w[idx[k]];
    }

    const ForwardPass pass = net.forward(x);
    if (stage.focal_r) {
      std::vector<double> abs_err(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) {
        abs_err[k] = std::abs(pass.predictions(static_cast<Eigen::Index>(k)) - y[k]);
      }
      const auto factors = focal_r_weights(abs_err, *cfg_.focal_r);
      for (std::size_t k = 0; k < idx.size(); ++k) weights(static_cast<Eigen::Index>(k)) *= factors[k];
    }
    const LossAndGrad task = regression_loss(pass.predictions, targets, weights, cfg_.training.loss);

    Matrix d_features;
    double rs_loss = 0.0;
    if (stage.ranksim && cfg_.ranksim) {
      const RankSimConfig& rc = *cfg_.ranksim;
      std::vector<std::size_t> chosen;
      if (rc.unique_label_sampling) {
        chosen = sample_unique_labels(y, subset_rng_);
      } else {
        chosen.resize(y.size());
        std::iota(chosen.begin(), chosen.end(), std::size_t{0});
      }
      const BatchSubset subset = make_subset(chosen, y, pass.features);
      const RankSimForward fwd = ranksim_forward(subset, rc);
      rs_loss = fwd.loss;
      if (!fwd.degenerate) {
        const RankSimGradient g = ranksim_backward(subset, fwd, rc);
        d_features = Matrix::Zero(pass.features.rows(), pass.features.cols());
        for (std::size_t k = 0; k < chosen.size(); ++k) {
          d_features.row(static_cast<Eigen::Index>(chosen[k])) +=
              rc.gamma * g.feature_grad.row(static_cast<Eigen::Index>(k));
        }
      }
    }

    const double total = task.loss + (cfg_.ranksim ? cfg_.ranksim->gamma * rs_loss : 0.0);
    if (!std::isfinite(total)) throw Diverged{"non-finite loss"};
    const NetParameters grads = net.backward(pass, task.grad, d_features);
    try {
      adam_step(adam, net.params(), grads, mask);
    } catch (const Error& e) {
      throw Diverged{e.what()};
    }
    return {task.loss, rs_loss};
  }

  const ExperimentConfig& cfg_;
  const ImbalancedDataset& ds_;
  ShotPartition partition_;
  BinnedLabelDensity density_;
  std::mt19937_64 shuffle_rng_;
  std::mt19937_64 subset_rng_;
  double best_val_ = std::numeric_limits<double>::infinity();
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

nlohmann::json RunArtifacts::metrics_json() const {
  nlohmann::json j;
  j["status"] = status;
  if (error) j["error"] = *error;
  j["best_stage"] = best_stage;
  j["best_epoch"] = best_epoch;
  j["val_at_best"] = to_json(val_at_best);
  j["test_at_best"] = to_json(test_at_best);
  j["test_final"] = to_json(test_final);
  return j;
}

ImbalancedDataset load_dataset(const ExperimentConfig& config) {
  if (const auto* spec = std::get_if<SkewSpec>(&config.dataset)) return generate(*spec);
  return read_dataset(std::get<std::string>(config.dataset));
}

RunArtifacts run(const ExperimentConfig& config) {
  config.validate();
  const ImbalancedDataset ds = load_dataset(config);
  return run(config, ds);
}

RunArtifacts run(const ExperimentConfig& config, const ImbalancedDataset& dataset) {
  config.validate();
  RunArtifacts art = Trainer(config, dataset).train();
  if (!config.output_dir.empty()) write_artifacts(art, config.output_dir);
  return art;
}

void write_artifacts(const RunArtifacts& art, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.json", art.config_echo.dump(2) + "\n");
  write_text(dir / "metrics.json", art.metrics_json().dump(2) + "\n");
  write_text(dir / "metrics_test_best.csv", to_csv(art.test_at_best));
  write_text(dir / "metrics_test_final.csv", to_csv(art.test_final));

  std::ostringstream log;
  log.precision(17);
  log << "stage,epoch,lr,task_loss,ranksim_loss,val_mae\n";
  for (const auto& e : art.log) {
    log << e.stage << ',' << e.epoch << ',' << e.lr << ',' << e.task_loss << ',' << e.ranksim_loss
        << ',' << e.val_mae << '\n';
  }
  write_text(dir / "train_log.csv", log.str());

  if (!art.best_model.params().layers.empty()) save_checkpoint(art.best_model, dir / "checkpoint_best.json");
  if (!art.final_model.params().layers.empty()) {
    save_checkpoint(art.final_model,
                    dir / (art.ok() ? "checkpoint_final.json" : "checkpoint_last_good.json"));
  }
  if (art.ranking) {
    write_matrix_csv(art.ranking->label_matrix, dir / "ranking_label.csv");
    write_matrix_csv(art.ranking->feature_matrix, dir / "ranking_feature.csv");
  }
  if (!art.ok()) {
    write_text(dir / "error.json",
               nlohmann::json{{"error", {{"type", art.status}, {"message", art.error.value_or("")}}}}
                       .dump(2) +
                   "\n");
  }
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<std::pair<ExperimentConfig, nlohmann::json>> expand_sweep(const nlohmann::json& j) {
  std::vector<std::pair<ExperimentConfig, nlohmann::json>> out;
  if (j.contains("configs")) {
    for (const auto& c : j.at("configs")) out.emplace_back(c.get<ExperimentConfig>(), nlohmann::json::object());
    if (out.empty()) throw Error("sweep has no configs");
    return out;
  }
  if (!j.contains("base")) throw Error("sweep needs 'base' or 'configs'");
  const nlohmann::json base = nlohmann::json(j.at("base").get<ExperimentConfig>());
  std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;
  if (j.contains("grid")) {
    for (const auto& [pointer, values] : j.at("grid").items()) {
      if (!values.is_array() || values.empty()) throw Error("grid axis " + pointer + " needs values");
      axes.emplace_back(pointer, values.get<std::vector<nlohmann::json>>());
    }
  }
  std::vector<std::size_t> pos(axes.size(), 0);
  while (true) {
    nlohmann::json cfg = base;
    nlohmann::json overrides = nlohmann::json::object();
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const nlohmann::json::json_pointer ptr(axes[a].first);
      cfg[ptr] = axes[a].second[pos[a]];
      overrides[axes[a].first] = axes[a].second[pos[a]];
    }
    out.emplace_back(cfg.get<ExperimentConfig>(), overrides);
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++pos[a] < axes[a].second.size()) break;
      pos[a] = 0;
      if (a == 0) return out;
    }
    if (axes.empty()) return out;
  }
}

std::vector<SweepRow> sweep(const std::vector<std::pair<ExperimentConfig, nlohmann::json>>& configs,
                            std::size_t jobs) {
  if (configs.empty()) throw Error("sweep has no configs");
  std::vector<SweepRow> rows(configs.size());
  std::size_t next = 0;
  std::mutex mu;
  auto worker = [&] {
    while (true) {
      std::size_t k;
      {
        std::lock_guard lock(mu);
        if (next >= configs.size()) return;
        k = next++;
      }
      const auto& [cfg, overrides] = configs[k];
      SweepRow row;
      row.hash = config_hash(cfg);
      row.overrides = overrides;
      try {
        const RunArtifacts art = run(cfg);
        row.status = art.status;
        row.error = art.error;
        row.test_at_best = art.test_at_best;
      } catch (const std::exception& e) {
        row.status = "failed";
        row.error = e.what();
      }
      rows[k] = std::move(row);
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(jobs, configs.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

std::string sweep_summary_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "config_hash,overrides,status";
  for (auto r : kReportRegions) out << ',' << to_string(r) << "_count," << to_string(r) << "_mae," << to_string(r) << "_gm";
  out << ",error\n";
  for (const auto& row : rows) {
    std::string ov = row.overrides.dump();
    for (char& ch : ov) {
      if (ch == ',') ch = ';';
      if (ch == '"') ch = '\'';
    }
    out << row.hash << ',' << ov << ',' << row.status;
    for (auto r : kReportRegions) {
      const auto& m = row.test_at_best[r];
      out << ',';
      if (m) out << m->count << ',' << m->mae << ',' << m->gm;
      else out << ",,";
    }
    std::string err = row.error.value_or("");
    for (char& ch : err) {
      if (ch == ',' || ch == '\n') ch = ' ';
    }
    out << ',' << err << '\n';
  }
  return out.str();
}

}  // namespace ranksim

#include "ranksim/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "ranksim/error.hpp"
#include "ranksim/model.hpp"
#include "ranksim/ranking.hpp"

namespace ranksim {
namespace {

void check_pair(std::span<const double> p, std::span<const double> t) {
  if (p.size() != t.size()) throw Error("length mismatch");
  if (p.empty()) throw Error("empty vector");
}

}  // namespace

double mae(std::span<const double> predictions, std::span<const double> targets) {
  check_pair(predictions, targets);
  double s = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) s += std::abs(targets[i] - predictions[i]);
  return s / static_cast<double>(targets.size());
}

double mse(std::span<const double> predictions, std::span<const double> targets) {
  check_pair(predictions, targets);
  double s = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double e = targets[i] - predictions[i];
    s += e * e;
  }
  return s / static_cast<double>(targets.size());
}

double gm(std::span<const double> predictions, std::span<const double> targets, double clamp) {
  check_pair(predictions, targets);
  if (!(clamp > 0.0)) throw Error("GM clamp must be positive");
  double log_sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    log_sum += std::log(std::max(std::abs(targets[i] - predictions[i]), clamp));
  }
  return std::exp(log_sum / static_cast<double>(targets.size()));
}

double pearson(std::span<const double> predictions, std::span<const double> targets) {
  check_pair(predictions, targets);
  if (targets.size() < 2) throw Error("degenerate correlation");
  const double n = static_cast<double>(targets.size());
  const double mp = std::accumulate(predictions.begin(), predictions.end(), 0.0) / n;
  const double mt = std::accumulate(targets.begin(), targets.end(), 0.0) / n;
  double cov = 0.0, vp = 0.0, vt = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double dp = predictions[i] - mp;
    const double dt = targets[i] - mt;
    cov += dp * dt;
    vp += dp * dp;
    vt += dt * dt;
  }
  if (vp == 0.0 || vt == 0.0) throw Error("degenerate correlation");
  return std::clamp(cov / std::sqrt(vp * vt), -1.0, 1.0);
}

double spearman(std::span<const double> predictions, std::span<const double> targets) {
  check_pair(predictions, targets);
  if (targets.size() < 2) throw Error("degenerate correlation");
  const auto rp = fractional_rank(predictions);
  const auto rt = fractional_rank(targets);
  return pearson(rp, rt);
}

std::string to_string(ReportRegion r) {
  switch (r) {
    case ReportRegion::all: return "all";
    case ReportRegion::many: return "many";
    case ReportRegion::medium: return "medium";
    case ReportRegion::few: return "few";
    case ReportRegion::zero: return "zero";
  }
  return "unknown";
}

RegionMetrics region_metrics(std::span<const double> predictions, std::span<const double> targets,
                             double gm_clamp) {
  RegionMetrics m;
  m.count = targets.size();
  m.mae = mae(predictions, targets);
  m.mse = mse(predictions, targets);
  m.gm = gm(predictions, targets, gm_clamp);
  try {
    m.pearson = pearson(predictions, targets);
    m.spearman = spearman(predictions, targets);
  } catch (const Error&) {
    m.pearson.reset();
    m.spearman.reset();
  }
  return m;
}

MetricReport report(std::span<const double> predictions, std::span<const double> targets,
                    const ShotPartition& partition, double gm_clamp) {
  if (predictions.size() != targets.size()) throw Error("length mismatch");
  MetricReport r;
  if (targets.empty()) return r;
  r.regions[0] = region_metrics(predictions, targets, gm_clamp);
  std::array<std::vector<double>, 5> pred_by, targ_by;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto slot = 1 + static_cast<std::size_t>(partition.region_of(targets[i]));
    pred_by[slot].push_back(predictions[i]);
    targ_by[slot].push_back(targets[i]);
  }
  for (std::size_t s = 1; s < 5; ++s) {
    if (!targ_by[s].empty()) r.regions[s] = region_metrics(pred_by[s], targ_by[s], gm_clamp);
  }
  return r;
}

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j = nlohmann::json::object();
  for (auto region : kReportRegions) {
    const auto& m = r[region];
    if (!m) continue;
    nlohmann::json e = {{"count", m->count}, {"mae", m->mae}, {"mse", m->mse}, {"gm", m->gm}};
    if (m->pearson) e["pearson"] = *m->pearson;
    if (m->spearman) e["spearman"] = *m->spearman;
    j[to_string(region)] = e;
  }
  return j;
}

std::string to_csv(const MetricReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "region,count,mae,mse,gm,pearson,spearman\n";
  for (auto region : kReportRegions) {
    const auto& m = r[region];
    if (!m) continue;
    out << to_string(region) << ',' << m->count << ',' << m->mae << ',' << m->mse << ',' << m->gm
        << ',';
    if (m->pearson) out << *m->pearson;
    out << ',';
    if (m->spearman) out << *m->spearman;
    out << '\n';
  }
  return out.str();
}

RankingMatrixAccumulator::RankingMatrixAccumulator(std::size_t batch_size, FeatureSimilarity kind)
    : batch_size_(batch_size), kind_(kind) {
  if (batch_size < 2) throw Error("ranking matrices need batches of at least 2");
  const auto b = static_cast<Eigen::Index>(batch_size);
  label_sum_ = Matrix::Zero(b, b);
  feature_sum_ = Matrix::Zero(b, b);
}

void RankingMatrixAccumulator::add_batch(std::span<const double> labels, const Matrix& features) {
  if (labels.size() != batch_size_ || static_cast<std::size_t>(features.rows()) != batch_size_) {
    throw Error("ragged batch: expected " + std::to_string(batch_size_) + " items");
  }
  if (!std::is_sorted(labels.begin(), labels.end())) throw Error("batch is not sorted by label");
  const auto sy = pairwise_matrix(labels);
  const auto sz = pairwise_matrix(features, kind_);
  for (Eigen::Index i = 0; i < sy.entries.rows(); ++i) {
    const auto ry = rank(sy.row(i));
    const auto rz = rank(sz.row(i));
    for (Eigen::Index j = 0; j < sy.entries.cols(); ++j) {
      label_sum_(i, j) += ry[static_cast<std::size_t>(j)];
      feature_sum_(i, j) += rz[static_cast<std::size_t>(j)];
    }
  }
  ++batches_;
}

AvgRankingMatrices RankingMatrixAccumulator::result() const {
  if (batches_ == 0) throw Error("no batches accumulated");
  const double inv = 1.0 / static_cast<double>(batches_);
  return {label_sum_ * inv, feature_sum_ * inv, batches_};
}

AvgRankingMatrices average_ranking_matrices(const RegressorNet& net, const Split& split,
                                            std::size_t batch_size, FeatureSimilarity kind,
                                            std::uint64_t seed) {
  std::vector<std::size_t> order(split.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  RankingMatrixAccumulator acc(batch_size, kind);
  const std::size_t full = split.size() / batch_size;
  for (std::size_t b = 0; b < full; ++b) {
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b * batch_size),
                                 order.begin() + static_cast<std::ptrdiff_t>((b + 1) * batch_size));
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t i, std::size_t j) { return split.y[i] < split.y[j]; });
    Matrix x(static_cast<Eigen::Index>(batch_size), split.x.cols());
    std::vector<double> y;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      x.row(static_cast<Eigen::Index>(k)) = split.x.row(static_cast<Eigen::Index>(idx[k]));
      y.push_back(split.y[idx[k]]);
    }
    acc.add_batch(y, net.forward(x).features);
  }
  return acc.result();
}

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
}

}  // namespace ranksim

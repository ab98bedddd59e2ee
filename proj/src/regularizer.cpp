#include "ranksim/regularizer.hpp"

#include <cmath>
#include <unordered_map>

#include "ranksim/error.hpp"

namespace ranksim {

void RankSimConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw Error("ranksim gamma must be >= 0");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error("ranksim lambda must be > 0");
  if (penalty.kind == PenaltyKind::huber && !(penalty.huber_delta > 0.0)) {
    throw Error("huber delta must be positive");
  }
}

std::vector<std::size_t> sample_unique_labels(std::span<const double> labels,
                                              std::mt19937_64& rng) {
  std::vector<std::vector<std::size_t>> groups;
  std::unordered_map<double, std::size_t> group_of;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double key = labels[i] + 0.0;  // folds -0.0 into 0.0
    auto [it, inserted] = group_of.try_emplace(key, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  std::vector<std::size_t> picked;
  picked.reserve(groups.size());
  for (const auto& g : groups) {
    if (g.size() == 1) {
      picked.push_back(g.front());
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
      picked.push_back(g[pick(rng)]);
    }
  }
  return picked;
}

BatchSubset make_subset(std::span<const std::size_t> indices, std::span<const double> labels,
                        const Matrix& features) {
  if (labels.size() != static_cast<std::size_t>(features.rows())) {
    throw Error("labels and features disagree on batch size");
  }
  BatchSubset s;
  s.indices.assign(indices.begin(), indices.end());
  s.labels.reserve(indices.size());
  s.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= labels.size()) throw Error("subset index out of range");
    s.labels.push_back(labels[indices[k]]);
    s.features.row(static_cast<Eigen::Index>(k)) =
        features.row(static_cast<Eigen::Index>(indices[k]));
  }
  return s;
}

namespace {

std::vector<double> scaled(const RankVector& r, const RankSimConfig& cfg) {
  std::vector<double> v = r.as_real();
  if (cfg.normalize_ranks) {
    const double n = static_cast<double>(v.size());
    for (double& x : v) x /= n;
  }
  return v;
}

}  // namespace

RankSimForward ranksim_forward(const BatchSubset& subset, const RankSimConfig& cfg) {
  if (subset.labels.size() != static_cast<std::size_t>(subset.features.rows())) {
    throw Error("labels and features disagree on subset size");
  }
  RankSimForward fwd;
  const auto m = static_cast<Eigen::Index>(subset.labels.size());
  if (m < 2) {
    fwd.degenerate = true;
    return fwd;
  }
  fwd.label_sim = pairwise_matrix(subset.labels);
  fwd.feature_sim = pairwise_matrix(subset.features, cfg.feature_sim);
  fwd.label_ranks.reserve(static_cast<std::size_t>(m));
  fwd.feature_ranks.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    fwd.label_ranks.push_back(rank(fwd.label_sim.row(i)));
    fwd.feature_ranks.push_back(rank(fwd.feature_sim.row(i)));
    ++fwd.feature_rank_calls;
    fwd.loss += penalty(scaled(fwd.label_ranks.back(), cfg), scaled(fwd.feature_ranks.back(), cfg),
                        cfg.penalty);
  }
  return fwd;
}

double ranksim_loss(const BatchSubset& subset, const RankSimConfig& cfg) {
  return ranksim_forward(subset, cfg).loss;
}

RankSimGradient ranksim_backward(const BatchSubset& subset, const RankSimForward& forward,
                                 const RankSimConfig& cfg) {
  RankSimGradient out;
  out.feature_grad = Matrix::Zero(subset.features.rows(), subset.features.cols());
  if (forward.degenerate) {
    out.degenerate = true;
    return out;
  }
  const auto m = subset.features.rows();
  if (static_cast<Eigen::Index>(forward.feature_ranks.size()) != m) {
    throw Error("forward state does not match subset");
  }
  const InterpolationConfig interp{cfg.lambda};

  // d loss / d S^z, one row at a time.
  Matrix sim_grad(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto incoming = penalty_grad(scaled(forward.label_ranks[i], cfg),
                                       scaled(forward.feature_ranks[i], cfg), cfg.penalty);
    const auto row_grad =
        rank_backward(forward.feature_sim.row(i), forward.feature_ranks[i], incoming, interp);
    ++out.rank_calls;
    // With normalized ranks the solver output is rk / m, so its difference
    // quotient carries the same 1 / m factor.
    const double unit = cfg.normalize_ranks ? 1.0 / static_cast<double>(m) : 1.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      sim_grad(i, j) = unit * row_grad[static_cast<std::size_t>(j)];
    }
  }

  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double g = sim_grad(i, j);
      if (g == 0.0) continue;
      auto [gi, gj] = feature_similarity_grad(row_span(subset.features, i),
                                              row_span(subset.features, j), cfg.feature_sim);
      auto dst_i = row_span(out.feature_grad, i);
      auto dst_j = row_span(out.feature_grad, j);
      for (std::size_t k = 0; k < gi.size(); ++k) {
        dst_i[k] += g * gi[k];
        dst_j[k] += g * gj[k];
      }
    }
  }
  return out;
}

RankSimGradient ranksim_backward(const BatchSubset& subset, const RankSimConfig& cfg) {
  return ranksim_backward(subset, ranksim_forward(subset, cfg), cfg);
}

}  // namespace ranksim

#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "ranksim/linalg.hpp"
#include "ranksim/ranking.hpp"
#include "ranksim/similarity.hpp"

namespace ranksim {

struct RankSimConfig {
  double gamma = 100.0;  // balancing weight, applied by the training loop
  double lambda = 2.0;   // interpolation strength of the rank backward pass
  Penalty penalty{};
  FeatureSimilarity feature_sim = FeatureSimilarity::cosine;
  bool unique_label_sampling = true;
  // Divide each rank vector by its length before the penalty. Off by default;
  // integer ranks are the reference definition.
  bool normalize_ranks = false;

  void validate() const;
};

/// The items of a batch that enter the regularizer.
struct BatchSubset {
  std::vector<std::size_t> indices;  // positions in the originating batch
  std::vector<double> labels;
  Matrix features;                   // one row per item

  std::size_t size() const { return indices.size(); }
};

/// One representative per distinct label, chosen uniformly among that
/// label's occurrences. Output follows first-occurrence order.
std::vector<std::size_t> sample_unique_labels(std::span<const double> labels,
                                              std::mt19937_64& rng);

/// Gathers the given batch rows into a subset.
BatchSubset make_subset(std::span<const std::size_t> indices, std::span<const double> labels,
                        const Matrix& features);

/// Forward state of the regularizer, reused by the backward pass.
struct RankSimForward {
  double loss = 0.0;
  bool degenerate = false;  // fewer than two items; loss is defined as 0
  SimilarityMatrix label_sim;
  SimilarityMatrix feature_sim;
  std::vector<RankVector> label_ranks;
  std::vector<RankVector> feature_ranks;
  std::size_t feature_rank_calls = 0;
};

struct RankSimGradient {
  Matrix feature_grad;  // d loss / d features, same shape as subset.features
  bool degenerate = false;
  std::size_t rank_calls = 0;  // perturbed rankings evaluated, one per row
};

/// Sum over rows i of penalty(rank(S^y[i,:]), rank(S^z[i,:])).
RankSimForward ranksim_forward(const BatchSubset& subset, const RankSimConfig& cfg);

double ranksim_loss(const BatchSubset& subset, const RankSimConfig& cfg);

/// Gradient of the regularizer with respect to every feature row (gamma not
/// applied). Each row's ranking is differentiated with rank_backward and the
/// resulting similarity gradients are chained through the feature similarity.
RankSimGradient ranksim_backward(const BatchSubset& subset, const RankSimForward& forward,
                                 const RankSimConfig& cfg);

RankSimGradient ranksim_backward(const BatchSubset& subset, const RankSimConfig& cfg);

}  // namespace ranksim

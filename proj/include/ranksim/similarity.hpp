#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ranksim/linalg.hpp"
#include "ranksim/ranking.hpp"

namespace ranksim {

enum class FeatureSimilarity { cosine, correlation, negative_mse, negative_mae, negative_linf };

enum class PenaltyKind { mse, mae, huber, cosine_distance, linf };

struct Penalty {
  PenaltyKind kind = PenaltyKind::mse;
  double huber_delta = 1.0;
};

enum class SimilaritySpace { label, feature };

struct SimilarityMatrix {
  Matrix entries;
  SimilaritySpace space = SimilaritySpace::label;

  std::span<const double> row(Eigen::Index i) const { return row_span(entries, i); }
};

std::string to_string(FeatureSimilarity kind);
std::string to_string(PenaltyKind kind);
FeatureSimilarity parse_feature_similarity(const std::string& name);
PenaltyKind parse_penalty_kind(const std::string& name);

/// Negative absolute distance between two labels.
double label_similarity(double y_i, double y_j);

/// Similarity between two feature vectors of equal dimension.
/// Cosine and correlation throw Error("degenerate vector") on a zero
/// (centered) norm.
double feature_similarity(std::span<const double> z1, std::span<const double> z2,
                          FeatureSimilarity kind);

/// Analytic partial derivatives of feature_similarity with respect to each
/// argument. MAE and L-infinity use sign(0) = 0 and put the L-infinity
/// subgradient on the first maximizing coordinate.
std::pair<std::vector<double>, std::vector<double>> feature_similarity_grad(
    std::span<const double> z1, std::span<const double> z2, FeatureSimilarity kind);

/// Penalty between a reference ranking `a` and a candidate ranking `b`.
double penalty(std::span<const double> a, std::span<const double> b, const Penalty& p);
double penalty(const RankVector& a, const RankVector& b, const Penalty& p);

/// Gradient of penalty() with respect to `b`, treated as real-valued.
std::vector<double> penalty_grad(std::span<const double> a, std::span<const double> b,
                                 const Penalty& p);
std::vector<double> penalty_grad(const RankVector& a, const RankVector& b, const Penalty& p);

/// Label-space matrix: entries(i, j) = label_similarity(labels[i], labels[j]).
SimilarityMatrix pairwise_matrix(std::span<const double> labels);

/// Feature-space matrix over the rows of `features`.
SimilarityMatrix pairwise_matrix(const Matrix& features, FeatureSimilarity kind);

}  // namespace ranksim

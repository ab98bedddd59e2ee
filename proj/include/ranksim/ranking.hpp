#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ranksim {

/// Competition ranks of a real vector: entry i is 1 + the number of
/// elements strictly greater than element i, so the largest element has
/// rank 1 and tied elements share the smaller rank.
class RankVector {
 public:
  RankVector() = default;
  explicit RankVector(std::vector<int> ranks) : ranks_(std::move(ranks)) {}

  std::size_t size() const { return ranks_.size(); }
  int operator[](std::size_t i) const { return ranks_[i]; }
  const std::vector<int>& values() const { return ranks_; }
  std::vector<double> as_real() const { return {ranks_.begin(), ranks_.end()}; }

  friend bool operator==(const RankVector&, const RankVector&) = default;

 private:
  std::vector<int> ranks_;
};

struct InterpolationConfig {
  double lambda = 2.0;  // interpolation strength, must be > 0
};

/// Competition ranking (1 = largest). O(n log n).
/// Throws Error("empty vector") or Error("non-finite input").
RankVector rank(std::span<const double> a);

/// Mid-ranks (ties get the average of the positions they occupy), with the
/// same descending orientation as rank(). Used for Spearman correlation.
std::vector<double> fractional_rank(std::span<const double> a);

/// Blackbox backward pass through rank():
///   grad = -(rank(a) - rank(a + lambda * incoming_grad)) / lambda
/// `forward_ranks` must be rank(a) from the forward pass; only the
/// perturbed vector is ranked here.
std::vector<double> rank_backward(std::span<const double> a,
                                  const RankVector& forward_ranks,
                                  std::span<const double> incoming_grad,
                                  const InterpolationConfig& cfg);

/// Convenience form that recomputes rank(a).
std::vector<double> rank_backward(std::span<const double> a,
                                  std::span<const double> incoming_grad,
                                  const InterpolationConfig& cfg);

}  // namespace ranksim

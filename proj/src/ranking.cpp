#include "ranksim/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ranksim/error.hpp"

namespace ranksim {
namespace {

void check_input(std::span<const double> a) {
  if (a.empty()) throw Error("empty vector");
  for (double v : a) {
    if (!std::isfinite(v)) throw Error("non-finite input");
  }
}

// Indices ordered by decreasing value; ties keep index order.
std::vector<std::size_t> descending_order(std::span<const double> a) {
  std::vector<std::size_t> order(a.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a[i] > a[j]; });
  return order;
}

}  // namespace

RankVector rank(std::span<const double> a) {
  check_input(a);
  const auto order = descending_order(a);
  std::vector<int> ranks(a.size());
  int current = 1;
  for (std::size_t p = 0; p < order.size(); ++p) {
    if (p > 0 && a[order[p]] != a[order[p - 1]]) current = static_cast<int>(p) + 1;
    ranks[order[p]] = current;
  }
  return RankVector(std::move(ranks));
}

std::vector<double> fractional_rank(std::span<const double> a) {
  check_input(a);
  const auto order = descending_order(a);
  std::vector<double> ranks(a.size());
  std::size_t p = 0;
  while (p < order.size()) {
    std::size_t q = p;
    while (q + 1 < order.size() && a[order[q + 1]] == a[order[p]]) ++q;
    // positions p..q (0-based) share the mean of the 1-based positions
    const double mid = 0.5 * static_cast<double>(p + q) + 1.0;
    for (std::size_t k = p; k <= q; ++k) ranks[order[k]] = mid;
    p = q + 1;
  }
  return ranks;
}

std::vector<double> rank_backward(std::span<const double> a,
                                  const RankVector& forward_ranks,
                                  std::span<const double> incoming_grad,
                                  const InterpolationConfig& cfg) {
  if (a.size() != incoming_grad.size() || a.size() != forward_ranks.size()) {
    throw Error("gradient shape mismatch");
  }
  if (!(cfg.lambda > 0.0)) throw Error("interpolation strength must be positive");

  std::vector<double> perturbed(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    perturbed[i] = a[i] + cfg.lambda * incoming_grad[i];
  }
  const RankVector perturbed_ranks = rank(perturbed);

  std::vector<double> grad(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(forward_ranks[i] - perturbed_ranks[i]);
    grad[i] = -diff / cfg.lambda;
  }
  return grad;
}

std::vector<double> rank_backward(std::span<const double> a,
                                  std::span<const double> incoming_grad,
                                  const InterpolationConfig& cfg) {
  if (a.size() != incoming_grad.size()) throw Error("gradient shape mismatch");
  return rank_backward(a, rank(a), incoming_grad, cfg);
}

}  // namespace ranksim

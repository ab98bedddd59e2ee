#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "ranksim/error.hpp"
#include "ranksim/ranking.hpp"
#include "ranksim/similarity.hpp"
#include "support.hpp"

using namespace ranksim;

namespace {

// argmin over every permutation pi of {1..n} of sum_i a_i * pi_i.
std::vector<int> permutation_oracle(const std::vector<double>& a) {
  std::vector<int> pi(a.size());
  std::iota(pi.begin(), pi.end(), 1);
  std::vector<int> best = pi;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) cost += a[i] * pi[i];
    if (cost < best_cost) {
      best_cost = cost;
      best = pi;
    }
  } while (std::next_permutation(pi.begin(), pi.end()));
  return best;
}

bool all_zero(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

}  // namespace

TEST_CASE("rank follows competition ranking") {
  CHECK(rank(std::vector<double>{9, 5, 11, 6}).values() == std::vector<int>{2, 4, 1, 3});
  CHECK(rank(std::vector<double>{7}).values() == std::vector<int>{1});
  CHECK(rank(std::vector<double>{3, 3, 1}).values() == std::vector<int>{1, 1, 3});
  CHECK(rank(std::vector<double>{1, 2, 2, 2, 0}).values() == std::vector<int>{4, 1, 1, 1, 5});
}

TEST_CASE("rank rejects bad input") {
  CHECK_THROWS_WITH_AS(rank(std::vector<double>{}), "empty vector", Error);
  CHECK_THROWS_WITH_AS(rank(std::vector<double>{1.0, std::nan("")}), "non-finite input", Error);
  CHECK_THROWS_WITH_AS(rank(std::vector<double>{std::numeric_limits<double>::infinity()}),
                       "non-finite input", Error);
}

TEST_CASE("rank matches the permutation argmin for short tie-free vectors") {
  std::mt19937_64 rng(11);
  for (std::size_t n = 1; n <= 6; ++n) {
    for (int t = 0; t < 50; ++t) {
      const auto a = testing::normal_vector(rng, n);
      CHECK(rank(a).values() == permutation_oracle(a));
    }
  }
}

TEST_CASE("rank agrees with counting definition, ties included") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> small(0, 4);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(1 + t % 12);
    for (double& x : a) x = small(rng);
    const auto r = rank(a);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto greater = std::count_if(a.begin(), a.end(), [&](double x) { return x > a[i]; });
      CHECK(r[i] == 1 + greater);
      CHECK(r[i] >= 1);
      CHECK(r[i] <= static_cast<int>(a.size()));
    }
  }
}

TEST_CASE("rank is invariant to positive affine maps") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> scale(0.1, 10.0), shift(-50.0, 50.0);
  for (int t = 0; t < 100; ++t) {
    auto a = testing::normal_vector(rng, 10);
    const auto before = rank(a);
    const double c = scale(rng), d = shift(rng);
    for (double& x : a) x = c * x + d;
    CHECK(rank(a) == before);
  }
}

TEST_CASE("strictly decreasing input ranks as identity") {
  std::vector<double> a(9);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = 100.0 - 3.0 * static_cast<double>(i);
  std::vector<int> expected(9);
  std::iota(expected.begin(), expected.end(), 1);
  CHECK(rank(a).values() == expected);
}

TEST_CASE("fractional_rank averages tied positions") {
  CHECK(fractional_rank(std::vector<double>{3, 3, 1}) == std::vector<double>{1.5, 1.5, 3});
  CHECK(fractional_rank(std::vector<double>{9, 5, 11, 6}) == std::vector<double>{2, 4, 1, 3});
  CHECK(fractional_rank(std::vector<double>{2, 2, 2}) == std::vector<double>{2, 2, 2});
}

TEST_CASE("rank_backward worked examples") {
  const std::vector<double> a{9, 5, 11, 6};
  const InterpolationConfig cfg{2.0};
  CHECK(rank_backward(a, std::vector<double>{0, 0, 0, 0}, cfg) ==
        std::vector<double>{0, 0, 0, 0});
  // a + 2*[1,0,0,0] = [11,5,11,6] ranks as [1,4,1,3]
  CHECK(rank_backward(a, std::vector<double>{1, 0, 0, 0}, cfg) ==
        std::vector<double>{-0.5, 0, 0, 0});
  // a small lambda leaves the ranking unchanged
  CHECK(all_zero(rank_backward(a, std::vector<double>{1, -1, 0.5, 2}, InterpolationConfig{0.1})));
}

TEST_CASE("rank_backward uses the supplied forward ranks") {
  const std::vector<double> a{9, 5, 11, 6};
  const std::vector<double> g{0.3, -0.2, 0.9, 1.4};
  const InterpolationConfig cfg{3.0};
  CHECK(rank_backward(a, rank(a), g, cfg) == rank_backward(a, g, cfg));
}

TEST_CASE("rank_backward rejects bad arguments") {
  const std::vector<double> a{1, 2, 3};
  CHECK_THROWS_WITH_AS(rank_backward(a, std::vector<double>{1, 2}, InterpolationConfig{}),
                       "gradient shape mismatch", Error);
  CHECK_THROWS_WITH_AS(rank_backward(a, std::vector<double>{1, 2, 3}, InterpolationConfig{0.0}),
                       "interpolation strength must be positive", Error);
}

TEST_CASE("rank_backward is bounded by (n-1)/lambda") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> lam(0.01, 10.0);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t n = 2 + t % 20;
    const auto a = testing::normal_vector(rng, n);
    const auto g = testing::normal_vector(rng, n, 5.0);
    const InterpolationConfig cfg{lam(rng)};
    const auto grad = rank_backward(a, g, cfg);
    const double bound = static_cast<double>(n - 1) / cfg.lambda;
    for (double x : grad) CHECK(std::abs(x) <= bound + 1e-12);
    CHECK(all_zero(rank_backward(a, std::vector<double>(n, 0.0), cfg)));
  }
}

TEST_CASE("one descent step through rank_backward rarely hurts") {
  // For each trial lambda is the smallest value on a geometric grid that
  // yields a non-zero gradient, and the step moves a by a quarter of lambda
  // times that gradient.
  int not_worse = 0;
  const int trials = 1000;
  for (int seed = 0; seed < trials; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    const std::size_t n = 8;
    auto a = testing::normal_vector(rng, n);
    std::vector<double> target(n);
    std::iota(target.begin(), target.end(), 1.0);
    std::shuffle(target.begin(), target.end(), rng);

    const RankVector r = rank(a);
    const auto incoming = penalty_grad(target, r.as_real(), Penalty{});
    std::vector<double> grad;
    double lambda = 1e-3;
    for (; lambda < 1e3; lambda *= 1.5) {
      grad = rank_backward(a, r, incoming, InterpolationConfig{lambda});
      if (!all_zero(grad)) break;
    }
    const double before = penalty(target, r.as_real(), Penalty{});
    for (std::size_t i = 0; i < n; ++i) a[i] -= 0.25 * lambda * grad[i];
    const double after = penalty(target, rank(a).as_real(), Penalty{});
    if (after <= before) ++not_worse;
  }
  CHECK(not_worse >= 900);
}

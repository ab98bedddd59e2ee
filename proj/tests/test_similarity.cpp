#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ranksim/error.hpp"
#include "ranksim/similarity.hpp"
#include "support.hpp"

using namespace ranksim;

namespace {

const FeatureSimilarity kAllSims[] = {FeatureSimilarity::cosine, FeatureSimilarity::correlation,
                                      FeatureSimilarity::negative_mse,
                                      FeatureSimilarity::negative_mae,
                                      FeatureSimilarity::negative_linf};

const PenaltyKind kAllPenalties[] = {PenaltyKind::mse, PenaltyKind::mae, PenaltyKind::huber,
                                     PenaltyKind::cosine_distance, PenaltyKind::linf};

// Pearson correlation of mid-ranks, written out independently of the library.
double spearman_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  auto midrank = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        less += w < v[i];
        equal += w == v[i];
      }
      r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
  };
  const auto rx = midrank(x), ry = midrank(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("label similarity is negative absolute distance") {
  CHECK(label_similarity(21, 25) == -4);
  CHECK(label_similarity(5, 5) == 0);
  CHECK(label_similarity(70, 1) == -69);
  CHECK_THROWS_AS(label_similarity(std::nan(""), 1), Error);
}

TEST_CASE("feature similarity examples") {
  const std::vector<double> e1{1, 0}, e2{0, 1};
  CHECK(feature_similarity(e1, e1, FeatureSimilarity::cosine) == doctest::Approx(1.0));
  CHECK(feature_similarity(e1, e2, FeatureSimilarity::cosine) == doctest::Approx(0.0));
  CHECK(feature_similarity(std::vector<double>{1, 2}, std::vector<double>{3, 2},
                           FeatureSimilarity::negative_mse) == doctest::Approx(-2.0));
  CHECK(feature_similarity(std::vector<double>{1, 2}, std::vector<double>{3, 5},
                           FeatureSimilarity::negative_mae) == doctest::Approx(-2.5));
  CHECK(feature_similarity(std::vector<double>{1, 2}, std::vector<double>{3, 5},
                           FeatureSimilarity::negative_linf) == doctest::Approx(-3.0));
  // correlation ignores a common offset: [1,2,3] and [11,12,13] are perfectly correlated
  CHECK(feature_similarity(std::vector<double>{1, 2, 3}, std::vector<double>{11, 12, 13},
                           FeatureSimilarity::correlation) == doctest::Approx(1.0));
}

TEST_CASE("feature similarity errors") {
  const std::vector<double> zero{0, 0}, one{1, 0};
  CHECK_THROWS_WITH_AS(feature_similarity(zero, one, FeatureSimilarity::cosine),
                       "degenerate vector", Error);
  CHECK_THROWS_WITH_AS(feature_similarity(std::vector<double>{2, 2}, one,
                                          FeatureSimilarity::correlation),
                       "degenerate vector", Error);
  CHECK_THROWS_AS(feature_similarity(one, std::vector<double>{1, 2, 3},
                                     FeatureSimilarity::negative_mse),
                  Error);
}

TEST_CASE("every feature similarity is symmetric") {
  std::mt19937_64 rng(1);
  for (auto kind : kAllSims) {
    for (int t = 0; t < 50; ++t) {
      const auto a = testing::normal_vector(rng, 6), b = testing::normal_vector(rng, 6);
      CHECK(feature_similarity(a, b, kind) == doctest::Approx(feature_similarity(b, a, kind)));
    }
  }
}

TEST_CASE("cosine and correlation invariances") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> scale(0.1, 20.0), shift(-5.0, 5.0);
  for (int t = 0; t < 50; ++t) {
    const auto a = testing::normal_vector(rng, 7), b = testing::normal_vector(rng, 7);
    auto a_scaled = a;
    const double c = scale(rng);
    for (double& x : a_scaled) x *= c;
    CHECK(feature_similarity(a_scaled, b, FeatureSimilarity::cosine) ==
          doctest::Approx(feature_similarity(a, b, FeatureSimilarity::cosine)).epsilon(1e-12));

    auto a_affine = a_scaled;
    const double d = shift(rng);
    for (double& x : a_affine) x += d;
    CHECK(feature_similarity(a_affine, b, FeatureSimilarity::correlation) ==
          doctest::Approx(feature_similarity(a, b, FeatureSimilarity::correlation))
              .epsilon(1e-12));
  }
}

TEST_CASE("feature similarity gradients match finite differences") {
  std::mt19937_64 rng(3);
  const double h = 1e-6;
  for (auto kind : kAllSims) {
    CAPTURE(to_string(kind));
    for (int t = 0; t < 100; ++t) {
      const auto a = testing::normal_vector(rng, 5), b = testing::normal_vector(rng, 5);
      const auto [ga, gb] = feature_similarity_grad(a, b, kind);
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double fa = testing::central_difference(
            [&](const std::vector<double>& x) { return feature_similarity(x, b, kind); }, a, i, h);
        const double fb = testing::central_difference(
            [&](const std::vector<double>& x) { return feature_similarity(a, x, kind); }, b, i, h);
        CHECK(testing::relative_error(ga[i], fa, 1e-4) < 1e-5);
        CHECK(testing::relative_error(gb[i], fb, 1e-4) < 1e-5);
      }
    }
  }
}

TEST_CASE("feature similarity gradient examples") {
  const auto [g1, g2] = feature_similarity_grad(std::vector<double>{1, 0}, std::vector<double>{0, 1},
                                                FeatureSimilarity::cosine);
  CHECK(g1[0] == doctest::Approx(0.0));
  CHECK(g1[1] == doctest::Approx(1.0));
  const std::vector<double> z{0.5, -1.0, 2.0};
  const auto [m1, m2] = feature_similarity_grad(z, z, FeatureSimilarity::negative_mse);
  for (double x : m1) CHECK(x == 0.0);
  for (double x : m2) CHECK(x == 0.0);

  // mean-centered orthogonal pair under correlation
  const std::vector<double> u{1, -1, 0, 0}, v{0, 0, 1, -1};
  const auto [c1, c2] = feature_similarity_grad(u, v, FeatureSimilarity::correlation);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double fd = testing::central_difference(
        [&](const std::vector<double>& x) {
          return feature_similarity(x, v, FeatureSimilarity::correlation);
        },
        u, i, 1e-6);
    CHECK(testing::relative_error(c1[i], fd, 1e-4) < 1e-6);
  }
  (void)c2;

  // ties in |z1 - z2| put the L-infinity subgradient on the first maximizer
  const auto [l1, l2] = feature_similarity_grad(std::vector<double>{2, 0, 0},
                                                std::vector<double>{0, 2, 0},
                                                FeatureSimilarity::negative_linf);
  CHECK(l1 == std::vector<double>{-1, 0, 0});
  CHECK(l2 == std::vector<double>{1, 0, 0});
  const auto [a1, a2] = feature_similarity_grad(std::vector<double>{1, 3},
                                                std::vector<double>{1, 0},
                                                FeatureSimilarity::negative_mae);
  CHECK(a1 == std::vector<double>{0, -0.5});
  CHECK(a2 == std::vector<double>{0, 0.5});
}

TEST_CASE("penalty examples") {
  const Penalty mse{PenaltyKind::mse};
  CHECK(penalty(RankVector({2, 4, 1, 3}), RankVector({2, 4, 1, 3}), mse) == 0.0);
  CHECK(penalty(RankVector({1, 2}), RankVector({2, 1}), mse) == 1.0);
  CHECK(penalty(RankVector({1, 4, 2, 3}), RankVector({4, 1, 2, 3}), Penalty{PenaltyKind::linf}) ==
        3.0);
  CHECK(penalty(RankVector({1, 4, 2, 3}), RankVector({4, 1, 2, 3}), Penalty{PenaltyKind::mae}) ==
        1.5);
  // huber: one |d|=0.5 inside delta, one |d|=3 outside -> (0.125 + 2.5) / 2
  CHECK(penalty(std::vector<double>{0, 0}, std::vector<double>{0.5, 3}, Penalty{PenaltyKind::huber}) ==
        doctest::Approx(1.3125));
  // cosine distance of [1,2] and [2,1]: 1 - 4/5
  CHECK(penalty(RankVector({1, 2}), RankVector({2, 1}), Penalty{PenaltyKind::cosine_distance}) ==
        doctest::Approx(0.2));
}

TEST_CASE("penalty errors") {
  CHECK_THROWS_AS(penalty(RankVector({1, 2}), RankVector({1, 2, 3}), Penalty{}), Error);
  CHECK_THROWS_AS(penalty_grad(RankVector({1, 2}), RankVector({1}), Penalty{}), Error);
  CHECK_THROWS_AS(penalty(RankVector({1, 2}), RankVector({2, 1}), Penalty{PenaltyKind::huber, 0.0}),
                  Error);
}

TEST_CASE("penalties are non-negative and vanish on equal rankings") {
  std::mt19937_64 rng(4);
  for (auto kind : kAllPenalties) {
    for (int t = 0; t < 100; ++t) {
      std::vector<int> a(8), b(8);
      std::iota(a.begin(), a.end(), 1);
      std::iota(b.begin(), b.end(), 1);
      std::shuffle(a.begin(), a.end(), rng);
      std::shuffle(b.begin(), b.end(), rng);
      const double p = penalty(RankVector(a), RankVector(b), Penalty{kind});
      CHECK(p >= 0.0);
      CHECK(penalty(RankVector(a), RankVector(a), Penalty{kind}) == doctest::Approx(0.0));
      if (kind != PenaltyKind::cosine_distance) CHECK((p == 0.0) == (a == b));
    }
  }
}

TEST_CASE("penalty gradient examples") {
  const auto g = penalty_grad(RankVector({1, 2}), RankVector({2, 1}), Penalty{});
  CHECK(g == std::vector<double>{1, -1});
  const auto z = penalty_grad(RankVector({3, 1, 2}), RankVector({3, 1, 2}), Penalty{});
  for (double x : z) CHECK(x == 0.0);
}

TEST_CASE("penalty gradients match finite differences") {
  std::mt19937_64 rng(5);
  const double h = 1e-6;
  for (auto kind : kAllPenalties) {
    CAPTURE(to_string(kind));
    const Penalty p{kind};
    for (int t = 0; t < 100; ++t) {
      const auto a = testing::normal_vector(rng, 6, 3.0);
      const auto b = testing::normal_vector(rng, 6, 3.0);
      // stay away from kinks: |d| near 0 or delta, and near-ties of the max
      std::vector<double> d(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) d[i] = std::abs(a[i] - b[i]);
      bool near_kink = std::any_of(d.begin(), d.end(), [&](double x) {
        return x < 1e-3 || std::abs(x - p.huber_delta) < 1e-3;
      });
      auto sorted = d;
      std::sort(sorted.rbegin(), sorted.rend());
      near_kink = near_kink || sorted[0] - sorted[1] < 1e-3;
      if (near_kink) continue;

      const auto g = penalty_grad(a, b, p);
      for (std::size_t i = 0; i < b.size(); ++i) {
        const double fd = testing::central_difference(
            [&](const std::vector<double>& x) { return penalty(a, x, p); }, b, i, h);
        CHECK(testing::relative_error(g[i], fd, 1e-4) < 1e-5);
      }
    }
  }
}

TEST_CASE("mse penalty determines Spearman correlation") {
  std::mt19937_64 rng(6);
  const std::size_t m = 32;
  for (int t = 0; t < 200; ++t) {
    const auto x = testing::normal_vector(rng, m), y = testing::normal_vector(rng, m);
    const double p = penalty(rank(x), rank(y), Penalty{});
    const double md = static_cast<double>(m);
    const double rho = 1.0 - 6.0 * md * p / (md * (md * md - 1.0));
    CHECK(std::abs(rho - spearman_oracle(x, y)) < 1e-10);
  }
}

TEST_CASE("pairwise label matrix") {
  const auto s = pairwise_matrix(std::vector<double>{1, 21, 25, 70});
  CHECK(s.space == SimilaritySpace::label);
  const auto row = s.row(1);
  CHECK(std::vector<double>(row.begin(), row.end()) == std::vector<double>{-20, 0, -4, -49});
  CHECK(rank(row).values() == std::vector<int>{3, 1, 2, 4});
}

TEST_CASE("pairwise feature matrices are symmetric with a maximal diagonal") {
  std::mt19937_64 rng(7);
  Matrix f(6, 4);
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    for (Eigen::Index k = 0; k < f.cols(); ++k) f(i, k) = std::normal_distribution<double>()(rng);
  }
  for (auto kind : kAllSims) {
    const auto s = pairwise_matrix(f, kind);
    CHECK(s.space == SimilaritySpace::feature);
    CHECK((s.entries - s.entries.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    for (Eigen::Index i = 0; i < s.entries.rows(); ++i) {
      CHECK(s.entries(i, i) == doctest::Approx(s.entries.row(i).maxCoeff()));
    }
  }
  Matrix same(3, 2);
  same << 1, 2, 1, 2, 1, 2;
  const auto ones = pairwise_matrix(same, FeatureSimilarity::cosine);
  CHECK((ones.entries.array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("pairwise errors carry the failing pair") {
  Matrix f(3, 2);
  f << 1, 0, 0, 0, 0, 1;
  CHECK_THROWS_WITH_AS(pairwise_matrix(f, FeatureSimilarity::cosine),
                       "pair (0, 1): degenerate vector", Error);
}

TEST_CASE("enum names round-trip") {
  for (auto kind : kAllSims) CHECK(parse_feature_similarity(to_string(kind)) == kind);
  for (auto kind : kAllPenalties) CHECK(parse_penalty_kind(to_string(kind)) == kind);
  CHECK_THROWS_AS(parse_penalty_kind("l2"), Error);
  CHECK_THROWS_AS(parse_feature_similarity("dot"), Error);
}

#include "ranksim/similarity.hpp"

#include <cmath>
#include <numeric>

#include "ranksim/error.hpp"

namespace ranksim {
namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_same_size(std::size_t a, std::size_t b) {
  if (a != b) throw Error("dimension mismatch");
}

double dot(std::span<const double> u, std::span<const double> v) {
  return std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
}

std::vector<double> centered(std::span<const double> z) {
  const double mean = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
  std::vector<double> out(z.begin(), z.end());
  for (double& v : out) v -= mean;
  return out;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  const double nu = std::sqrt(dot(u, u));
  const double nv = std::sqrt(dot(v, v));
  if (nu == 0.0 || nv == 0.0) throw Error("degenerate vector");
  return dot(u, v) / (nu * nv);
}

// d cos(u, v) / du and d cos(u, v) / dv.
std::pair<std::vector<double>, std::vector<double>> cosine_grad(std::span<const double> u,
                                                                std::span<const double> v) {
  const double uu = dot(u, u);
  const double vv = dot(v, v);
  if (uu == 0.0 || vv == 0.0) throw Error("degenerate vector");
  const double nu = std::sqrt(uu);
  const double nv = std::sqrt(vv);
  const double c = dot(u, v) / (nu * nv);
  std::vector<double> gu(u.size()), gv(v.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    gu[k] = v[k] / (nu * nv) - c * u[k] / uu;
    gv[k] = u[k] / (nu * nv) - c * v[k] / vv;
  }
  return {std::move(gu), std::move(gv)};
}

std::size_t first_argmax_abs_diff(std::span<const double> u, std::span<const double> v) {
  std::size_t best = 0;
  double best_val = -1.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double d = std::abs(u[k] - v[k]);
    if (d > best_val) {
      best_val = d;
      best = k;
    }
  }
  return best;
}

}  // namespace

std::string to_string(FeatureSimilarity kind) {
  switch (kind) {
    case FeatureSimilarity::cosine: return "cosine";
    case FeatureSimilarity::correlation: return "correlation";
    case FeatureSimilarity::negative_mse: return "negative_mse";
    case FeatureSimilarity::negative_mae: return "negative_mae";
    case FeatureSimilarity::negative_linf: return "negative_linf";
  }
  return "unknown";
}

std::string to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::mse: return "mse";
    case PenaltyKind::mae: return "mae";
    case PenaltyKind::huber: return "huber";
    case PenaltyKind::cosine_distance: return "cosine_distance";
    case PenaltyKind::linf: return "linf";
  }
  return "unknown";
}

FeatureSimilarity parse_feature_similarity(const std::string& name) {
  for (auto k : {FeatureSimilarity::cosine, FeatureSimilarity::correlation,
                 FeatureSimilarity::negative_mse, FeatureSimilarity::negative_mae,
                 FeatureSimilarity::negative_linf}) {
    if (to_string(k) == name) return k;
  }
  throw Error("unknown feature similarity '" + name + "'");
}

PenaltyKind parse_penalty_kind(const std::string& name) {
  for (auto k : {PenaltyKind::mse, PenaltyKind::mae, PenaltyKind::huber,
                 PenaltyKind::cosine_distance, PenaltyKind::linf}) {
    if (to_string(k) == name) return k;
  }
  throw Error("unknown penalty '" + name + "'");
}

double label_similarity(double y_i, double y_j) {
  if (!std::isfinite(y_i) || !std::isfinite(y_j)) throw Error("non-finite input");
  return -std::abs(y_i - y_j);
}

double feature_similarity(std::span<const double> z1, std::span<const double> z2,
                          FeatureSimilarity kind) {
  check_same_size(z1.size(), z2.size());
  if (z1.empty()) throw Error("empty vector");
  const double d = static_cast<double>(z1.size());
  switch (kind) {
    case FeatureSimilarity::cosine:
      return cosine(z1, z2);
    case FeatureSimilarity::correlation: {
      const auto c1 = centered(z1);
      const auto c2 = centered(z2);
      return cosine(c1, c2);
    }
    case FeatureSimilarity::negative_mse: {
      double s = 0.0;
      for (std::size_t k = 0; k < z1.size(); ++k) s += (z1[k] - z2[k]) * (z1[k] - z2[k]);
      return -s / d;
    }
    case FeatureSimilarity::negative_mae: {
      double s = 0.0;
      for (std::size_t k = 0; k < z1.size(); ++k) s += std::abs(z1[k] - z2[k]);
      return -s / d;
    }
    case FeatureSimilarity::negative_linf: {
      double m = 0.0;
      for (std::size_t k = 0; k < z1.size(); ++k) m = std::max(m, std::abs(z1[k] - z2[k]));
      return -m;
    }
  }
  throw Error("unknown feature similarity");
}

std::pair<std::vector<double>, std::vector<double>> feature_similarity_grad(
    std::span<const double> z1, std::span<const double> z2, FeatureSimilarity kind) {
  check_same_size(z1.size(), z2.size());
  if (z1.empty()) throw Error("empty vector");
  const std::size_t n = z1.size();
  const double d = static_cast<double>(n);
  std::vector<double> g1(n, 0.0), g2(n, 0.0);
  switch (kind) {
    case FeatureSimilarity::cosine:
      return cosine_grad(z1, z2);
    case FeatureSimilarity::correlation: {
      // Centering is a linear projection P = I - 11^T/d, so the gradient is
      // the cosine gradient at the centered vectors, projected again.
      const auto c1 = centered(z1);
      const auto c2 = centered(z2);
      auto [gc1, gc2] = cosine_grad(c1, c2);
      return {centered(gc1), centered(gc2)};
    }
    case FeatureSimilarity::negative_mse:
      for (std::size_t k = 0; k < n; ++k) {
        g1[k] = -2.0 * (z1[k] - z2[k]) / d;
        g2[k] = -g1[k];
      }
      break;
    case FeatureSimilarity::negative_mae:
      for (std::size_t k = 0; k < n; ++k) {
        g1[k] = -sign(z1[k] - z2[k]) / d;
        g2[k] = -g1[k];
      }
      break;
    case FeatureSimilarity::negative_linf: {
      const std::size_t k = first_argmax_abs_diff(z1, z2);
      g1[k] = -sign(z1[k] - z2[k]);
      g2[k] = -g1[k];
      break;
    }
  }
  return {std::move(g1), std::move(g2)};
}

double penalty(std::span<const double> a, std::span<const double> b, const Penalty& p) {
  if (a.size() != b.size()) throw Error("length mismatch");
  if (a.empty()) throw Error("empty vector");
  const double m = static_cast<double>(a.size());
  switch (p.kind) {
    case PenaltyKind::mse: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
      return s / m;
    }
    case PenaltyKind::mae: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
      return s / m;
    }
    case PenaltyKind::huber: {
      if (!(p.huber_delta > 0.0)) throw Error("huber delta must be positive");
      const double delta = p.huber_delta;
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double r = std::abs(a[i] - b[i]);
        s += r < delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
      }
      return s / m;
    }
    case PenaltyKind::cosine_distance:
      return 1.0 - cosine(a, b);
    case PenaltyKind::linf: {
      double mx = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) mx = std::max(mx, std::abs(a[i] - b[i]));
      return mx;
    }
  }
  throw Error("unknown penalty");
}

double penalty(const RankVector& a, const RankVector& b, const Penalty& p) {
  const auto ra = a.as_real();
  const auto rb = b.as_real();
  return penalty(ra, rb, p);
}

std::vector<double> penalty_grad(std::span<const double> a, std::span<const double> b,
                                 const Penalty& p) {
  if (a.size() != b.size()) throw Error("length mismatch");
  if (a.empty()) throw Error("empty vector");
  const double m = static_cast<double>(a.size());
  std::vector<double> g(a.size(), 0.0);
  switch (p.kind) {
    case PenaltyKind::mse:
      for (std::size_t i = 0; i < a.size(); ++i) g[i] = 2.0 * (b[i] - a[i]) / m;
      break;
    case PenaltyKind::mae:
      for (std::size_t i = 0; i < a.size(); ++i) g[i] = sign(b[i] - a[i]) / m;
      break;
    case PenaltyKind::huber: {
      if (!(p.huber_delta > 0.0)) throw Error("huber delta must be positive");
      const double delta = p.huber_delta;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = b[i] - a[i];
        g[i] = (std::abs(d) < delta ? d : delta * sign(d)) / m;
      }
      break;
    }
    case PenaltyKind::cosine_distance: {
      auto [ga, gb] = cosine_grad(a, b);
      for (std::size_t i = 0; i < a.size(); ++i) g[i] = -gb[i];
      break;
    }
    case PenaltyKind::linf: {
      const std::size_t k = first_argmax_abs_diff(a, b);
      g[k] = sign(b[k] - a[k]);
      break;
    }
  }
  return g;
}

std::vector<double> penalty_grad(const RankVector& a, const RankVector& b, const Penalty& p) {
  const auto ra = a.as_real();
  const auto rb = b.as_real();
  return penalty_grad(ra, rb, p);
}

SimilarityMatrix pairwise_matrix(std::span<const double> labels) {
  const auto m = static_cast<Eigen::Index>(labels.size());
  if (m < 2) throw Error("pairwise matrix needs at least 2 items");
  SimilarityMatrix out{Matrix(m, m), SimilaritySpace::label};
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      try {
        out.entries(i, j) = label_similarity(labels[i], labels[j]);
      } catch (const Error& e) {
        throw Error("pair (" + std::to_string(i) + ", " + std::to_string(j) + "): " + e.what());
      }
    }
  }
  return out;
}

SimilarityMatrix pairwise_matrix(const Matrix& features, FeatureSimilarity kind) {
  const Eigen::Index m = features.rows();
  if (m < 2) throw Error("pairwise matrix needs at least 2 items");
  SimilarityMatrix out{Matrix(m, m), SimilaritySpace::feature};
  // Every implemented similarity is symmetric; fill the upper triangle and
  // mirror it so the matrix is exactly symmetric.
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) {
      try {
        const double s = feature_similarity(row_span(features, i), row_span(features, j), kind);
        out.entries(i, j) = s;
        out.entries(j, i) = s;
      } catch (const Error& e) {
        throw Error("pair (" + std::to_string(i) + ", " + std::to_string(j) + "): " + e.what());
      }
    }
  }
  return out;
}

}  // namespace ranksim

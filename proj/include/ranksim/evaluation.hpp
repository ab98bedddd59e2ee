#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ranksim/linalg.hpp"
#include "ranksim/similarity.hpp"
#include "ranksim/synthetic.hpp"

namespace ranksim {

class RegressorNet;

inline constexpr double kDefaultGmClamp = 1e-6;

double mae(std::span<const double> predictions, std::span<const double> targets);
double mse(std::span<const double> predictions, std::span<const double> targets);
/// Geometric mean of |e|, computed in the log domain with |e| clamped below
/// at `clamp` so exact hits do not zero the whole product.
double gm(std::span<const double> predictions, std::span<const double> targets,
          double clamp = kDefaultGmClamp);
/// Throws Error("degenerate correlation") on zero variance.
double pearson(std::span<const double> predictions, std::span<const double> targets);
/// Pearson correlation of mid-ranks.
double spearman(std::span<const double> predictions, std::span<const double> targets);

struct RegionMetrics {
  std::size_t count = 0;
  double mae = 0.0;
  double mse = 0.0;
  double gm = 0.0;
  std::optional<double> pearson;   // absent when undefined (n < 2 or constant)
  std::optional<double> spearman;
};

enum class ReportRegion { all, many, medium, few, zero };
inline constexpr std::array<ReportRegion, 5> kReportRegions = {
    ReportRegion::all, ReportRegion::many, ReportRegion::medium, ReportRegion::few,
    ReportRegion::zero};

std::string to_string(ReportRegion r);

/// Metrics over the whole set and per shot region; regions without samples
/// are absent.
struct MetricReport {
  std::array<std::optional<RegionMetrics>, 5> regions;

  const std::optional<RegionMetrics>& operator[](ReportRegion r) const {
    return regions[static_cast<std::size_t>(r)];
  }
};

RegionMetrics region_metrics(std::span<const double> predictions, std::span<const double> targets,
                             double gm_clamp = kDefaultGmClamp);

MetricReport report(std::span<const double> predictions, std::span<const double> targets,
                    const ShotPartition& partition, double gm_clamp = kDefaultGmClamp);

nlohmann::json to_json(const MetricReport& r);
/// One line per present region: region,count,mae,mse,gm,pearson,spearman.
std::string to_csv(const MetricReport& r);

/// Entrywise mean of row-wise rank matrices over equally sized batches.
struct AvgRankingMatrices {
  Matrix label_matrix;
  Matrix feature_matrix;
  std::size_t batch_count = 0;
};

/// Accumulates rank(S^y) and rank(S^z) over label-sorted batches.
class RankingMatrixAccumulator {
 public:
  RankingMatrixAccumulator(std::size_t batch_size, FeatureSimilarity kind);

  /// `labels` must be sorted ascending. Throws on a batch of the wrong size.
  void add_batch(std::span<const double> labels, const Matrix& features);
  AvgRankingMatrices result() const;

 private:
  std::size_t batch_size_;
  FeatureSimilarity kind_;
  Matrix label_sum_;
  Matrix feature_sum_;
  std::size_t batches_ = 0;
};

/// Shuffles `split` with `seed`, cuts it into batches of `batch_size`
/// (dropping a ragged tail), sorts each batch by label and averages the
/// ranking matrices of the model's features.
AvgRankingMatrices average_ranking_matrices(const RegressorNet& net, const Split& split,
                                            std::size_t batch_size, FeatureSimilarity kind,
                                            std::uint64_t seed);

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path);

}  // namespace ranksim

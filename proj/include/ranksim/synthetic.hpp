#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ranksim/baselines.hpp"
#include "ranksim/linalg.hpp"

namespace ranksim {

enum class SkewProfile { exponential, zipf, two_peak };

struct ShotThresholds {
  std::size_t many_min = 50;  // many-shot: count > many_min
  std::size_t few_max = 10;   // few-shot: 0 < count < few_max
};

/// Declarative description of a synthetic imbalanced regression task.
/// Labels take the left edge of their bin (integer-valued for unit bins, like
/// ages); inputs are noisy random Fourier features of the label.
struct SkewSpec {
  double label_lo = 0.0;
  double label_hi = 100.0;
  double bin_width = 1.0;
  std::size_t n_train = 5000;
  std::size_t n_val = 1000;   // spread evenly over all bins
  std::size_t n_test = 2000;  // spread evenly over all bins
  SkewProfile profile = SkewProfile::exponential;
  double rate = 0.05;      // exponential: weight of bin b is exp(-rate * b)
  double exponent = 1.0;   // zipf: weight of bin b is (b + 1)^-exponent
  std::vector<std::size_t> zero_shot_bins;  // bins withheld from training
  double noise_sigma = 0.1;
  std::size_t input_dim = 16;  // number of Fourier features, >= 8
  std::uint64_t seed = 0;            // sampling of labels and noise
  std::uint64_t embedding_seed = 7;  // frequencies and phases of the input map
  ShotThresholds thresholds{};

  void validate() const;
  LabelBinning binning() const;
  /// Unnormalized sampling weight of each bin, zero for withheld bins.
  std::vector<double> bin_weights() const;
};

std::string to_string(SkewProfile p);
SkewProfile parse_skew_profile(const std::string& name);

void to_json(nlohmann::json& j, const SkewSpec& s);
void from_json(const nlohmann::json& j, SkewSpec& s);

struct Split {
  Matrix x;
  std::vector<double> y;

  std::size_t size() const { return y.size(); }
};

struct ImbalancedDataset {
  SkewSpec spec;
  Split train;
  Split val;
  Split test;

  LabelBinning binning() const { return spec.binning(); }
  std::vector<std::size_t> train_counts() const;
};

/// The fixed input map x_k = sin(omega_k * y + phi_k).
class FourierEmbedding {
 public:
  FourierEmbedding(std::size_t dim, double label_lo, double label_hi, std::uint64_t seed);
  void apply(double y, std::span<double> out) const;
  std::size_t dim() const { return omega_.size(); }

 private:
  std::vector<double> omega_;
  std::vector<double> phase_;
};

/// Deterministic given the spec. Throws when every bin is withheld.
ImbalancedDataset generate(const SkewSpec& spec);

enum class ShotRegion { many, medium, few, zero };

std::string to_string(ShotRegion r);

struct ShotPartition {
  LabelBinning binning;
  std::vector<ShotRegion> regions;  // one per bin

  ShotRegion region_of(double label) const { return regions[binning.bin_of(label)]; }
};

ShotRegion classify_bin(std::size_t count, const ShotThresholds& t);
ShotPartition shot_partition(const LabelBinning& binning, const std::vector<std::size_t>& counts,
                             const ShotThresholds& t);
ShotPartition shot_partition(const ImbalancedDataset& dataset);

/// Writes <dir>/dataset.csv (header x_0..x_{d-1},y,split) and <dir>/spec.json.
void write_dataset(const ImbalancedDataset& dataset, const std::filesystem::path& dir);
ImbalancedDataset read_dataset(const std::filesystem::path& dir);

}  // namespace ranksim

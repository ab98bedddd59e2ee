#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ranksim {

/// Uniform label bins: bin b covers [lo + b*width, lo + (b+1)*width), the last
/// bin is closed on the right.
struct LabelBinning {
  double lo = 0.0;
  double width = 1.0;
  std::size_t count = 1;

  double left(std::size_t b) const { return lo + static_cast<double>(b) * width; }
  double right(std::size_t b) const { return lo + static_cast<double>(b + 1) * width; }
  /// Bin of a label; labels outside the covered range throw.
  std::size_t bin_of(double label) const;
};

struct BinnedLabelDensity {
  LabelBinning binning;
  std::vector<std::size_t> counts;
  std::optional<std::vector<double>> smoothed;
};

struct LdsKernel {
  std::size_t size = 5;  // odd
  double sigma = 2.0;

  void validate() const;
  /// Normalized, symmetric Gaussian taps.
  std::vector<double> weights() const;
};

struct FocalRConfig {
  double beta = 0.2;
  double gamma_exp = 1.0;

  void validate() const;
};

enum class ReweightScheme { none, inv, sqinv };

std::string to_string(ReweightScheme scheme);
ReweightScheme parse_reweight_scheme(const std::string& name);

/// Bins spanning [min label, max label] with floor((max-min)/width)+1 bins.
BinnedLabelDensity bin_labels(std::span<const double> labels, double bin_width);

/// Counts over a fixed binning (bins may be empty).
BinnedLabelDensity bin_labels(std::span<const double> labels, const LabelBinning& binning);

/// Convolves counts with the kernel. Taps that fall outside the bin range are
/// reflected back into it (half-sample symmetric), which makes the smoothing
/// operator doubly stochastic: total mass is preserved and a uniform density
/// is a fixed point.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n);

BinnedLabelDensity lds_smooth(const BinnedLabelDensity& density, const LdsKernel& kernel);

/// Per-bin weights proportional to 1/density (inv) or 1/sqrt(density)
/// (sqinv), scaled so that the mean weight over the counted training samples
/// is 1. `use_smoothed` selects the LDS density. Bins without training
/// samples get a weight only when their effective density is positive; any
/// zero-density bin holding samples throws Error("empty bin weight").
std::vector<double> reweight(const BinnedLabelDensity& density, ReweightScheme scheme,
                             bool use_smoothed);

/// sigmoid(beta * |e|)^gamma_exp per sample, used as a constant loss multiplier.
std::vector<double> focal_r_weights(std::span<const double> abs_errors, const FocalRConfig& cfg);

/// One phase of training.
struct TrainingStage {
  std::string name;
  std::size_t epochs = 0;
  bool head_only = false;
  bool ranksim = false;  // regularizer active in this stage
  ReweightScheme reweight = ReweightScheme::none;
  bool lds = false;      // weights from the smoothed density
  bool focal_r = false;
};

struct RrtConfig {
  std::size_t stage1_epochs = 90;
  std::size_t stage2_epochs = 10;
};

/// Regressor retraining: stage 1 trains everything without re-weighting
/// (the regularizer, if enabled, acts here); stage 2 freezes the hidden layers
/// and retrains the head with inverse re-weighting.
std::vector<TrainingStage> rrt_schedule(const RrtConfig& cfg, bool ranksim_enabled,
                                        bool lds_enabled);

/// CSV with columns bin_left,bin_right,count,smoothed,weight.
void write_density_csv(const BinnedLabelDensity& density, std::span<const double> weights,
                       const std::filesystem::path& path);

}  // namespace ranksim

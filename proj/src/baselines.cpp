#include "ranksim/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ranksim/error.hpp"

namespace ranksim {

std::size_t LabelBinning::bin_of(double label) const {
  if (!std::isfinite(label)) throw Error("non-finite input");
  const double hi = lo + static_cast<double>(count) * width;
  if (label < lo || label > hi) throw Error("label " + std::to_string(label) + " outside bins");
  const auto b = static_cast<std::size_t>(std::floor((label - lo) / width));
  return std::min(b, count - 1);
}

void LdsKernel::validate() const {
  if (size == 0 || size % 2 == 0) throw Error("LDS kernel size must be odd");
  if (!(sigma > 0.0)) throw Error("LDS kernel sigma must be positive");
}

std::vector<double> LdsKernel::weights() const {
  validate();
  const auto half = static_cast<double>(size / 2);
  std::vector<double> w(size);
  double total = 0.0;
  for (std::size_t k = 0; k < size; ++k) {
    const double x = static_cast<double>(k) - half;
    w[k] = std::exp(-0.5 * x * x / (sigma * sigma));
    total += w[k];
  }
  for (double& v : w) v /= total;
  return w;
}

void FocalRConfig::validate() const {
  if (!(beta > 0.0) || !(gamma_exp > 0.0)) throw Error("Focal-R beta and gamma must be positive");
}

std::string to_string(ReweightScheme scheme) {
  switch (scheme) {
    case ReweightScheme::none: return "none";
    case ReweightScheme::inv: return "inv";
    case ReweightScheme::sqinv: return "sqinv";
  }
  return "unknown";
}

ReweightScheme parse_reweight_scheme(const std::string& name) {
  if (name == "none") return ReweightScheme::none;
  if (name == "inv") return ReweightScheme::inv;
  if (name == "sqinv") return ReweightScheme::sqinv;
  throw Error("unknown reweight scheme '" + name + "'");
}

BinnedLabelDensity bin_labels(std::span<const double> labels, double bin_width) {
  if (labels.empty()) throw Error("empty labels");
  if (!(bin_width > 0.0)) throw Error("bin width must be positive");
  const auto [mn, mx] = std::minmax_element(labels.begin(), labels.end());
  if (!std::isfinite(*mn) || !std::isfinite(*mx)) throw Error("non-finite input");
  LabelBinning binning{*mn, bin_width,
                       static_cast<std::size_t>(std::floor((*mx - *mn) / bin_width)) + 1};
  return bin_labels(labels, binning);
}

BinnedLabelDensity bin_labels(std::span<const double> labels, const LabelBinning& binning) {
  if (labels.empty()) throw Error("empty labels");
  if (!(binning.width > 0.0) || binning.count == 0) throw Error("invalid binning");
  BinnedLabelDensity d{binning, std::vector<std::size_t>(binning.count, 0), std::nullopt};
  for (double y : labels) ++d.counts[binning.bin_of(y)];
  return d;
}

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  // Half-sample symmetric extension: ... c b a | a b c ... | c b a ...
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t r = i % period;
  if (r < 0) r += period;
  return r < static_cast<std::ptrdiff_t>(n) ? static_cast<std::size_t>(r)
                                            : static_cast<std::size_t>(period - 1 - r);
}

BinnedLabelDensity lds_smooth(const BinnedLabelDensity& density, const LdsKernel& kernel) {
  const auto w = kernel.weights();
  const auto half = static_cast<std::ptrdiff_t>(kernel.size / 2);
  const std::size_t n = density.counts.size();
  if (n == 0) throw Error("empty density");
  std::vector<double> smoothed(n, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    double acc = 0.0;
    for (std::ptrdiff_t k = -half; k <= half; ++k) {
      const std::size_t src = reflect_index(static_cast<std::ptrdiff_t>(b) + k, n);
      acc += w[static_cast<std::size_t>(k + half)] * static_cast<double>(density.counts[src]);
    }
    smoothed[b] = acc;
  }
  BinnedLabelDensity out = density;
  out.smoothed = std::move(smoothed);
  return out;
}

std::vector<double> reweight(const BinnedLabelDensity& density, ReweightScheme scheme,
                             bool use_smoothed) {
  const std::size_t n = density.counts.size();
  if (scheme == ReweightScheme::none) return std::vector<double>(n, 1.0);
  if (use_smoothed && !density.smoothed) throw Error("density has not been smoothed");

  std::vector<double> weights(n, 0.0);
  double weighted_total = 0.0;
  double sample_total = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    const double eff =
        use_smoothed ? (*density.smoothed)[b] : static_cast<double>(density.counts[b]);
    if (!(eff > 0.0)) {
      if (density.counts[b] > 0) throw Error("empty bin weight");
      continue;
    }
    weights[b] = scheme == ReweightScheme::inv ? 1.0 / eff : 1.0 / std::sqrt(eff);
    weighted_total += weights[b] * static_cast<double>(density.counts[b]);
    sample_total += static_cast<double>(density.counts[b]);
  }
  if (sample_total > 0.0) {
    const double scale = sample_total / weighted_total;
    for (double& w : weights) w *= scale;
  }
  return weights;
}

std::vector<double> focal_r_weights(std::span<const double> abs_errors, const FocalRConfig& cfg) {
  cfg.validate();
  std::vector<double> out(abs_errors.size());
  for (std::size_t i = 0; i < abs_errors.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-cfg.beta * std::abs(abs_errors[i])));
    out[i] = std::pow(s, cfg.gamma_exp);
  }
  return out;
}

std::vector<TrainingStage> rrt_schedule(const RrtConfig& cfg, bool ranksim_enabled,
                                        bool lds_enabled) {
  std::vector<TrainingStage> plan;
  plan.push_back({"rrt-stage1", cfg.stage1_epochs, false, ranksim_enabled, ReweightScheme::none,
                  false, false});
  plan.push_back(
      {"rrt-stage2", cfg.stage2_epochs, true, false, ReweightScheme::inv, lds_enabled, false});
  return plan;
}

void write_density_csv(const BinnedLabelDensity& density, std::span<const double> weights,
                       const std::filesystem::path& path) {
  if (!weights.empty() && weights.size() != density.counts.size()) {
    throw Error("weight table size mismatch");
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "bin_left,bin_right,count,smoothed,weight\n";
  for (std::size_t b = 0; b < density.counts.size(); ++b) {
    out << density.binning.left(b) << ',' << density.binning.right(b) << ','
        << density.counts[b] << ',';
    if (density.smoothed) out << (*density.smoothed)[b];
    out << ',';
    if (!weights.empty()) out << weights[b];
    out << '\n';
  }
}

}  // namespace ranksim

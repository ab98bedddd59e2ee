#include "ranksim/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "ranksim/error.hpp"

namespace ranksim {

void SkewSpec::validate() const {
  if (!(label_lo < label_hi)) throw Error("label range must satisfy lo < hi");
  if (!(bin_width > 0.0)) throw Error("bin width must be positive");
  const double bins = (label_hi - label_lo) / bin_width;
  if (std::abs(bins - std::round(bins)) > 1e-9 || std::round(bins) < 1.0) {
    throw Error("label range must be a whole number of bins");
  }
  if (n_train == 0) throw Error("n_train must be positive");
  if (!(noise_sigma >= 0.0)) throw Error("noise_sigma must be nonnegative");
  if (input_dim < 8) throw Error("input_dim must be at least 8");
  if (profile == SkewProfile::exponential && !(rate >= 0.0)) throw Error("rate must be >= 0");
  if (profile == SkewProfile::zipf && !(exponent > 0.0)) throw Error("exponent must be > 0");
  const std::size_t nb = binning().count;
  for (std::size_t b : zero_shot_bins) {
    if (b >= nb) throw Error("zero-shot bin " + std::to_string(b) + " outside label range");
  }
}

LabelBinning SkewSpec::binning() const {
  return {label_lo, bin_width,
          static_cast<std::size_t>(std::llround((label_hi - label_lo) / bin_width))};
}

std::vector<double> SkewSpec::bin_weights() const {
  const std::size_t nb = binning().count;
  std::vector<double> w(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const double x = static_cast<double>(b);
    switch (profile) {
      case SkewProfile::exponential:
        w[b] = std::exp(-rate * x);
        break;
      case SkewProfile::zipf:
        w[b] = std::pow(x + 1.0, -exponent);
        break;
      case SkewProfile::two_peak: {
        // Major peak at 20% of the range, minor peak at 70%, thin floor.
        const double n = static_cast<double>(nb);
        const double s = 0.08 * n;
        const double a = (x - 0.2 * n) / s;
        const double c = (x - 0.7 * n) / s;
        w[b] = std::exp(-0.5 * a * a) + 0.4 * std::exp(-0.5 * c * c) + 0.01;
        break;
      }
    }
  }
  for (std::size_t b : zero_shot_bins) w.at(b) = 0.0;
  return w;
}

std::string to_string(SkewProfile p) {
  switch (p) {
    case SkewProfile::exponential: return "exponential";
    case SkewProfile::zipf: return "zipf";
    case SkewProfile::two_peak: return "two_peak";
  }
  return "unknown";
}

SkewProfile parse_skew_profile(const std::string& name) {
  if (name == "exponential") return SkewProfile::exponential;
  if (name == "zipf") return SkewProfile::zipf;
  if (name == "two_peak") return SkewProfile::two_peak;
  throw Error("unknown skew profile '" + name + "'");
}

void to_json(nlohmann::json& j, const SkewSpec& s) {
  j = {{"label_range", {s.label_lo, s.label_hi}},
       {"bin_width", s.bin_width},
       {"n_train", s.n_train},
       {"n_val", s.n_val},
       {"n_test", s.n_test},
       {"profile", to_string(s.profile)},
       {"rate", s.rate},
       {"exponent", s.exponent},
       {"zero_shot_bins", s.zero_shot_bins},
       {"noise_sigma", s.noise_sigma},
       {"input_dim", s.input_dim},
       {"seed", s.seed},
       {"embedding_seed", s.embedding_seed},
       {"shot_thresholds", {{"many_min", s.thresholds.many_min}, {"few_max", s.thresholds.few_max}}}};
}

void from_json(const nlohmann::json& j, SkewSpec& s) {
  SkewSpec d;
  if (j.contains("label_range")) {
    d.label_lo = j.at("label_range").at(0).get<double>();
    d.label_hi = j.at("label_range").at(1).get<double>();
  }
  d.bin_width = j.value("bin_width", d.bin_width);
  d.n_train = j.value("n_train", d.n_train);
  d.n_val = j.value("n_val", d.n_val);
  d.n_test = j.value("n_test", d.n_test);
  if (j.contains("profile")) d.profile = parse_skew_profile(j.at("profile").get<std::string>());
  d.rate = j.value("rate", d.rate);
  d.exponent = j.value("exponent", d.exponent);
  d.zero_shot_bins = j.value("zero_shot_bins", d.zero_shot_bins);
  d.noise_sigma = j.value("noise_sigma", d.noise_sigma);
  d.input_dim = j.value("input_dim", d.input_dim);
  d.seed = j.value("seed", d.seed);
  d.embedding_seed = j.value("embedding_seed", d.embedding_seed);
  if (j.contains("shot_thresholds")) {
    const auto& t = j.at("shot_thresholds");
    d.thresholds.many_min = t.value("many_min", d.thresholds.many_min);
    d.thresholds.few_max = t.value("few_max", d.thresholds.few_max);
  }
  s = std::move(d);
}

std::vector<std::size_t> ImbalancedDataset::train_counts() const {
  return bin_labels(train.y, binning()).counts;
}

FourierEmbedding::FourierEmbedding(std::size_t dim, double label_lo, double label_hi,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  // Between a fifth of a cycle and three cycles across the label range.
  std::uniform_real_distribution<double> cycles(0.2, 3.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double span = label_hi - label_lo;
  for (std::size_t k = 0; k < dim; ++k) {
    omega_.push_back(2.0 * std::numbers::pi * cycles(rng) / span);
    phase_.push_back(phase(rng) - omega_.back() * label_lo);
  }
}

void FourierEmbedding::apply(double y, std::span<double> out) const {
  for (std::size_t k = 0; k < omega_.size(); ++k) out[k] = std::sin(omega_[k] * y + phase_[k]);
}

namespace {

void fill_inputs(const FourierEmbedding& phi, double noise_sigma, std::mt19937_64& rng,
                 Split& split) {
  std::normal_distribution<double> noise(0.0, 1.0);
  split.x.resize(static_cast<Eigen::Index>(split.y.size()), static_cast<Eigen::Index>(phi.dim()));
  for (std::size_t i = 0; i < split.y.size(); ++i) {
    auto row = row_span(split.x, static_cast<Eigen::Index>(i));
    phi.apply(split.y[i], row);
    if (noise_sigma > 0.0) {
      for (double& v : row) v += noise_sigma * noise(rng);
    }
  }
}

std::vector<double> balanced_labels(const LabelBinning& binning, std::size_t n) {
  std::vector<double> y;
  y.reserve(n);
  for (std::size_t i = 0; i < n; ++i) y.push_back(binning.left(i % binning.count));
  return y;
}

}  // namespace

ImbalancedDataset generate(const SkewSpec& spec) {
  spec.validate();
  const LabelBinning binning = spec.binning();
  const auto weights = spec.bin_weights();
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw Error("all bins excluded");

  ImbalancedDataset ds;
  ds.spec = spec;
  const FourierEmbedding phi(spec.input_dim, spec.label_lo, spec.label_hi, spec.embedding_seed);
  std::mt19937_64 rng(spec.seed);

  std::discrete_distribution<std::size_t> pick_bin(weights.begin(), weights.end());
  ds.train.y.reserve(spec.n_train);
  for (std::size_t i = 0; i < spec.n_train; ++i) ds.train.y.push_back(binning.left(pick_bin(rng)));
  fill_inputs(phi, spec.noise_sigma, rng, ds.train);

  ds.val.y = balanced_labels(binning, spec.n_val);
  fill_inputs(phi, spec.noise_sigma, rng, ds.val);
  ds.test.y = balanced_labels(binning, spec.n_test);
  fill_inputs(phi, spec.noise_sigma, rng, ds.test);
  return ds;
}

std::string to_string(ShotRegion r) {
  switch (r) {
    case ShotRegion::many: return "many";
    case ShotRegion::medium: return "medium";
    case ShotRegion::few: return "few";
    case ShotRegion::zero: return "zero";
  }
  return "unknown";
}

ShotRegion classify_bin(std::size_t count, const ShotThresholds& t) {
  if (count == 0) return ShotRegion::zero;
  if (count > t.many_min) return ShotRegion::many;
  if (count < t.few_max) return ShotRegion::few;
  return ShotRegion::medium;
}

ShotPartition shot_partition(const LabelBinning& binning, const std::vector<std::size_t>& counts,
                             const ShotThresholds& t) {
  if (counts.size() != binning.count) throw Error("bin count mismatch");
  ShotPartition p{binning, {}};
  p.regions.reserve(counts.size());
  for (std::size_t c : counts) p.regions.push_back(classify_bin(c, t));
  return p;
}

ShotPartition shot_partition(const ImbalancedDataset& dataset) {
  return shot_partition(dataset.binning(), dataset.train_counts(), dataset.spec.thresholds);
}

namespace {

void write_split(std::ostream& out, const Split& s, const char* name) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (Eigen::Index k = 0; k < s.x.cols(); ++k) out << s.x(static_cast<Eigen::Index>(i), k) << ',';
    out << s.y[i] << ',' << name << '\n';
  }
}

}  // namespace

void write_dataset(const ImbalancedDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "dataset.csv");
    if (!out) throw Error("cannot write " + (dir / "dataset.csv").string());
    out.precision(17);
    for (std::size_t k = 0; k < dataset.spec.input_dim; ++k) out << "x_" << k << ',';
    out << "y,split\n";
    write_split(out, dataset.train, "train");
    write_split(out, dataset.val, "val");
    write_split(out, dataset.test, "test");
  }
  std::ofstream spec(dir / "spec.json");
  if (!spec) throw Error("cannot write " + (dir / "spec.json").string());
  spec << nlohmann::json(dataset.spec).dump(2) << '\n';
}

ImbalancedDataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream spec_in(dir / "spec.json");
  if (!spec_in) throw Error("cannot read " + (dir / "spec.json").string());
  ImbalancedDataset ds;
  try {
    ds.spec = nlohmann::json::parse(spec_in).get<SkewSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed spec.json: ") + e.what());
  }

  std::ifstream in(dir / "dataset.csv");
  if (!in) throw Error("cannot read " + (dir / "dataset.csv").string());
  std::string line;
  std::getline(in, line);
  const std::size_t dim = ds.spec.input_dim;
  std::vector<std::vector<double>> rows[3];
  std::vector<double> labels[3];
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != dim + 2) throw Error("dataset.csv line " + std::to_string(line_no) + ": wrong column count");
    int which = cells.back() == "train" ? 0 : cells.back() == "val" ? 1 : cells.back() == "test" ? 2 : -1;
    if (which < 0) throw Error("dataset.csv line " + std::to_string(line_no) + ": unknown split");
    std::vector<double> x(dim);
    for (std::size_t k = 0; k < dim; ++k) x[k] = std::stod(cells[k]);
    rows[which].push_back(std::move(x));
    labels[which].push_back(std::stod(cells[dim]));
  }
  Split* splits[3] = {&ds.train, &ds.val, &ds.test};
  for (int s = 0; s < 3; ++s) {
    splits[s]->y = labels[s];
    splits[s]->x.resize(static_cast<Eigen::Index>(rows[s].size()), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < rows[s].size(); ++i) {
      for (std::size_t k = 0; k < dim; ++k) {
        splits[s]->x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[s][i][k];
      }
    }
  }
  return ds;
}

}  // namespace ranksim

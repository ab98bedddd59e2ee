#include "ranksim/model.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ranksim/error.hpp"

namespace ranksim {
namespace {

constexpr const char* kCheckpointFormat = "ranksim-checkpoint";
constexpr int kCheckpointVersion = 1;

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

// Applies x W^T + b row by row.
Matrix affine(const Matrix& x, const DenseLayer& layer) {
  Matrix out = x * layer.weight.transpose();
  out.rowwise() += layer.bias.row(0);
  return out;
}

}  // namespace

NetParameters NetParameters::zeros_like() const {
  NetParameters z;
  z.layers.reserve(layers.size());
  for (const auto& l : layers) {
    z.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()),
                        Matrix::Zero(l.bias.rows(), l.bias.cols())});
  }
  return z;
}

std::size_t NetParameters::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < tensor_count(); ++k) n += static_cast<std::size_t>(tensor(k).size());
  return n;
}

RegressorNet::RegressorNet(std::size_t input_dim, std::vector<std::size_t> hidden_widths,
                           std::uint64_t seed) {
  if (input_dim == 0) throw Error("input dimension must be positive");
  if (hidden_widths.empty()) throw Error("at least one hidden layer is required");
  std::mt19937_64 rng(seed);
  std::size_t fan_in = input_dim;
  for (std::size_t width : hidden_widths) {
    if (width == 0) throw Error("hidden width must be positive");
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    const auto out = static_cast<Eigen::Index>(width);
    params_.layers.push_back(
        {uniform_matrix(out, static_cast<Eigen::Index>(fan_in), bound, rng), Matrix::Zero(1, out)});
    fan_in = width;
  }
  const double head_bound = std::sqrt(6.0 / static_cast<double>(fan_in + 1));
  params_.layers.push_back(
      {uniform_matrix(1, static_cast<Eigen::Index>(fan_in), head_bound, rng), Matrix::Zero(1, 1)});
}

RegressorNet::RegressorNet(NetParameters params) : params_(std::move(params)) {
  if (params_.layers.size() < 2) throw Error("network needs a hidden layer and a head");
  for (std::size_t k = 0; k < params_.layers.size(); ++k) {
    const auto& l = params_.layers[k];
    if (l.bias.rows() != 1 || l.bias.cols() != l.weight.rows()) throw Error("bias shape mismatch");
    if (k > 0 && l.weight.cols() != params_.layers[k - 1].weight.rows()) {
      throw Error("layer shapes do not chain");
    }
  }
  if (params_.layers.back().weight.rows() != 1) throw Error("head must have a single output");
}

std::size_t RegressorNet::input_dim() const {
  return static_cast<std::size_t>(params_.layers.front().weight.cols());
}

std::size_t RegressorNet::feature_dim() const {
  return static_cast<std::size_t>(params_.layers.back().weight.cols());
}

std::vector<std::size_t> RegressorNet::hidden_widths() const {
  std::vector<std::size_t> w;
  for (std::size_t k = 0; k + 1 < params_.layers.size(); ++k) {
    w.push_back(static_cast<std::size_t>(params_.layers[k].weight.rows()));
  }
  return w;
}

std::vector<std::string> RegressorNet::tensor_names() const {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < params_.layers.size(); ++k) {
    names.push_back("layer" + std::to_string(k) + ".weight");
    names.push_back("layer" + std::to_string(k) + ".bias");
  }
  return names;
}

ForwardPass RegressorNet::forward(const Matrix& batch_x) const {
  if (static_cast<std::size_t>(batch_x.cols()) != input_dim()) {
    throw Error("input width " + std::to_string(batch_x.cols()) + " does not match network input " +
                std::to_string(input_dim()));
  }
  ForwardPass pass;
  pass.input = batch_x;
  const Matrix* current = &pass.input;
  for (std::size_t k = 0; k + 1 < params_.layers.size(); ++k) {
    pass.pre_activations.push_back(affine(*current, params_.layers[k]));
    pass.activations.push_back(pass.pre_activations.back().cwiseMax(0.0));
    current = &pass.activations.back();
  }
  pass.features = pass.activations.back();
  pass.predictions = affine(pass.features, params_.layers.back()).col(0);
  return pass;
}

NetParameters RegressorNet::backward(const ForwardPass& pass, const Vector& d_predictions,
                                     const Matrix& d_features) const {
  if (pass.empty()) throw Error("missing forward cache");
  if (pass.activations.size() + 1 != params_.layers.size()) {
    throw Error("forward cache does not match network");
  }
  const Eigen::Index batch = pass.features.rows();
  const Eigen::Index fdim = pass.features.cols();
  const bool has_pred = d_predictions.size() > 0;
  const bool has_feat = d_features.size() > 0;
  if (has_pred && d_predictions.size() != batch) throw Error("prediction gradient shape mismatch");
  if (has_feat && (d_features.rows() != batch || d_features.cols() != fdim)) {
    throw Error("feature gradient shape mismatch");
  }

  NetParameters grads = params_.zeros_like();
  const DenseLayer& head = params_.layers.back();

  Matrix d_act = has_feat ? d_features : Matrix::Zero(batch, fdim);
  if (has_pred) {
    DenseLayer& gh = grads.layers.back();
    gh.weight = d_predictions.transpose() * pass.features;
    gh.bias(0, 0) = d_predictions.sum();
    d_act.noalias() += d_predictions * head.weight;
  }

  for (std::size_t k = pass.activations.size(); k-- > 0;) {
    const Matrix d_pre =
        d_act.cwiseProduct((pass.pre_activations[k].array() > 0.0).cast<double>().matrix());
    const Matrix& layer_input = k == 0 ? pass.input : pass.activations[k - 1];
    grads.layers[k].weight = d_pre.transpose() * layer_input;
    grads.layers[k].bias = d_pre.colwise().sum();
    if (k > 0) d_act = d_pre * params_.layers[k].weight;
  }
  return grads;
}

std::string to_string(RegressionLossKind kind) {
  return kind == RegressionLossKind::l1 ? "l1" : "mse";
}

RegressionLossKind parse_regression_loss(const std::string& name) {
  if (name == "l1") return RegressionLossKind::l1;
  if (name == "mse") return RegressionLossKind::mse;
  throw Error("unknown regression loss '" + name + "'");
}

LossAndGrad regression_loss(const Vector& predictions, const Vector& targets,
                            const Vector& weights, RegressionLossKind kind) {
  if (predictions.size() != targets.size() || predictions.size() != weights.size()) {
    throw Error("length mismatch");
  }
  if (predictions.size() == 0) throw Error("empty vector");
  if ((weights.array() < 0.0).any()) throw Error("negative sample weight");
  const double inv_m = 1.0 / static_cast<double>(predictions.size());
  LossAndGrad out;
  out.grad.resize(predictions.size());
  for (Eigen::Index i = 0; i < predictions.size(); ++i) {
    const double e = predictions(i) - targets(i);
    if (kind == RegressionLossKind::l1) {
      out.loss += weights(i) * std::abs(e);
      out.grad(i) = weights(i) * (e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0)) * inv_m;
    } else {
      out.loss += weights(i) * e * e;
      out.grad(i) = 2.0 * weights(i) * e * inv_m;
    }
  }
  out.loss *= inv_m;
  return out;
}

AdamState::AdamState(const NetParameters& like, AdamConfig cfg)
    : config(cfg), first_moment(like.zeros_like()), second_moment(like.zeros_like()) {}

void adam_step(AdamState& state, NetParameters& params, const NetParameters& grads,
               const std::vector<bool>& trainable) {
  const std::size_t n = params.tensor_count();
  if (grads.tensor_count() != n || state.first_moment.tensor_count() != n) {
    throw Error("optimizer shape mismatch");
  }
  if (!trainable.empty() && trainable.size() != n) throw Error("trainable mask size mismatch");
  for (std::size_t k = 0; k < n; ++k) {
    if (grads.tensor(k).rows() != params.tensor(k).rows() ||
        grads.tensor(k).cols() != params.tensor(k).cols()) {
      throw Error("optimizer shape mismatch");
    }
    if (!grads.tensor(k).allFinite()) throw Error("diverged");
  }

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < n; ++k) {
    if (!trainable.empty() && !trainable[k]) continue;
    Matrix& p = params.tensor(k);
    const Matrix& g = grads.tensor(k);
    Matrix& m = state.first_moment.tensor(k);
    Matrix& v = state.second_moment.tensor(k);
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    const auto m_hat = m.array() / bc1;
    const auto v_hat = v.array() / bc2;
    p.array() -= c.lr * m_hat / (v_hat.sqrt() + c.eps) + c.lr * c.weight_decay * p.array();
  }
}

std::vector<bool> head_only_mask(const RegressorNet& net) {
  std::vector<bool> mask(net.params().tensor_count(), false);
  mask[mask.size() - 1] = true;
  mask[mask.size() - 2] = true;
  return mask;
}

std::string checkpoint_to_json(const RegressorNet& net) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["tensors"] = nlohmann::json::array();
  const auto names = net.tensor_names();
  for (std::size_t k = 0; k < net.params().tensor_count(); ++k) {
    const Matrix& t = net.params().tensor(k);
    std::vector<double> data(t.data(), t.data() + t.size());
    j["tensors"].push_back({{"name", names[k]}, {"shape", {t.rows(), t.cols()}}, {"data", data}});
  }
  return j.dump();
}

RegressorNet checkpoint_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed checkpoint: ") + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat) throw Error("not a ranksim checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) {
    throw Error("unsupported checkpoint version " + j.value("version", nlohmann::json()).dump());
  }
  const auto& tensors = j.at("tensors");
  if (tensors.size() % 2 != 0) throw Error("checkpoint tensors must come in weight/bias pairs");
  NetParameters params;
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    const auto& t = tensors[k];
    const auto rows = t.at("shape").at(0).get<Eigen::Index>();
    const auto cols = t.at("shape").at(1).get<Eigen::Index>();
    const auto data = t.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw Error("tensor " + t.value("name", std::string("?")) + " has wrong element count");
    }
    Matrix m = Eigen::Map<const Matrix>(data.data(), rows, cols);
    if (k % 2 == 0) {
      params.layers.push_back({std::move(m), Matrix()});
    } else {
      params.layers.back().bias = std::move(m);
    }
  }
  return RegressorNet(std::move(params));
}

void save_checkpoint(const RegressorNet& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << checkpoint_to_json(net) << '\n';
}

RegressorNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace ranksim

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ranksim/linalg.hpp"

namespace ranksim {

/// weight is (out x in), bias is (1 x out).
struct DenseLayer {
  Matrix weight;
  Matrix bias;
};

/// Parameters (or same-shaped gradients / optimizer moments) of a
/// RegressorNet: hidden layers first, scalar head last.
struct NetParameters {
  std::vector<DenseLayer> layers;

  std::size_t tensor_count() const { return 2 * layers.size(); }
  Matrix& tensor(std::size_t k) { return k % 2 == 0 ? layers[k / 2].weight : layers[k / 2].bias; }
  const Matrix& tensor(std::size_t k) const {
    return k % 2 == 0 ? layers[k / 2].weight : layers[k / 2].bias;
  }
  NetParameters zeros_like() const;
  std::size_t parameter_count() const;
};

/// Cached activations of one forward pass, consumed by backward().
struct ForwardPass {
  Matrix input;
  std::vector<Matrix> pre_activations;  // one per hidden layer
  std::vector<Matrix> activations;      // post-ReLU, one per hidden layer
  Matrix features;                      // = activations.back()
  Vector predictions;

  bool empty() const { return activations.empty(); }
};

/// Dense ReLU network with a scalar linear head. The last hidden layer's
/// activations are the feature vectors z handed to the regularizer.
class RegressorNet {
 public:
  RegressorNet() = default;
  /// He-uniform hidden layers, Xavier-uniform head, zero biases.
  RegressorNet(std::size_t input_dim, std::vector<std::size_t> hidden_widths,
               std::uint64_t seed);
  explicit RegressorNet(NetParameters params);

  std::size_t input_dim() const;
  std::size_t feature_dim() const;
  std::vector<std::size_t> hidden_widths() const;
  std::size_t hidden_layer_count() const { return params_.layers.size() - 1; }

  NetParameters& params() { return params_; }
  const NetParameters& params() const { return params_; }
  std::vector<std::string> tensor_names() const;

  ForwardPass forward(const Matrix& batch_x) const;

  /// Reverse-mode gradients for all parameters. Either upstream term may be
  /// empty (size 0), which is treated as zero. ReLU'(0) = 0.
  NetParameters backward(const ForwardPass& pass, const Vector& d_predictions,
                         const Matrix& d_features) const;

 private:
  NetParameters params_;
};

enum class RegressionLossKind { l1, mse };

std::string to_string(RegressionLossKind kind);
RegressionLossKind parse_regression_loss(const std::string& name);

struct LossAndGrad {
  double loss = 0.0;
  Vector grad;  // d loss / d predictions
};

/// (1/M) * sum_i weights_i * l(pred_i - target_i); l1 uses sign(0) = 0.
LossAndGrad regression_loss(const Vector& predictions, const Vector& targets,
                            const Vector& weights, RegressionLossKind kind);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

struct AdamState {
  AdamConfig config;
  NetParameters first_moment;
  NetParameters second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(const NetParameters& like, AdamConfig cfg);
};

/// Bias-corrected Adam with decoupled weight decay (p -= lr * wd * p).
/// Tensors whose `trainable` flag is false are left untouched; an empty mask
/// trains everything. Throws Error("diverged") on a non-finite gradient,
/// before anything is modified.
void adam_step(AdamState& state, NetParameters& params, const NetParameters& grads,
               const std::vector<bool>& trainable = {});

/// Trainable mask that freezes every hidden layer and keeps the head.
std::vector<bool> head_only_mask(const RegressorNet& net);

// Checkpoint format "ranksim-checkpoint" version 1: a JSON object
//   {"format": "ranksim-checkpoint", "version": 1,
//    "tensors": [{"name": "layer0.weight", "shape": [rows, cols], "data": [...]}, ...]}
// with data in row-major order. Layers are numbered from the input; the last
// one is the head.
std::string checkpoint_to_json(const RegressorNet& net);
RegressorNet checkpoint_from_json(const std::string& text);
void save_checkpoint(const RegressorNet& net, const std::filesystem::path& path);
RegressorNet load_checkpoint(const std::filesystem::path& path);

}  // namespace ranksim

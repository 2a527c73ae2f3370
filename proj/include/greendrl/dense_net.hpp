#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "greendrl/rl_core.hpp"
#include "greendrl/rng.hpp"

namespace greendrl {

// Per-layer symmetric quantization parameters; dequantized weight = scale * code.
struct QuantMeta {
  int bits = 8;
  std::vector<double> scale;
  std::vector<std::int32_t> zero_point;
};

// Fully connected value network. Hidden layers use a rectifier, the output
// layer is linear. Layer l maps layer_dims[l] -> layer_dims[l+1] with a
// row-major (out x in) weight matrix.
class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<std::size_t> layer_dims);

  // Uniform init in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static DenseNet glorot(std::vector<std::size_t> layer_dims, Rng& rng);

  const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
  std::size_t num_layers() const noexcept { return weights_.size(); }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t rows(std::size_t layer) const { return dims_.at(layer + 1); }
  std::size_t cols(std::size_t layer) const { return dims_.at(layer); }

  std::span<double> weights(std::size_t layer) { return weights_.at(layer); }
  std::span<const double> weights(std::size_t layer) const { return weights_.at(layer); }
  std::span<double> biases(std::size_t layer) { return biases_.at(layer); }
  std::span<const double> biases(std::size_t layer) const { return biases_.at(layer); }

  std::size_t weight_count() const noexcept;
  std::size_t param_count() const noexcept;

  // 1 keeps a weight, 0 forces it to zero. No mask means fully dense.
  bool has_mask() const noexcept { return !mask_.empty(); }
  std::span<const std::uint8_t> mask(std::size_t layer) const { return mask_.at(layer); }
  void set_mask(std::size_t layer, std::vector<std::uint8_t> keep);
  void clear_mask() { mask_.clear(); }
  void apply_mask();

  std::optional<QuantMeta> quant;

  // Fixed multiplier applied to raw inputs before the first layer (feature normalization).
  double input_scale = 1.0;

  // Raw storage for structural edits (neuron pruning).
  std::vector<std::vector<double>>& weight_storage() { return weights_; }
  std::vector<std::vector<double>>& bias_storage() { return biases_; }
  std::vector<std::vector<std::uint8_t>>& mask_storage() { return mask_; }
  std::vector<std::size_t>& dims_storage() { return dims_; }

  // Throws InvalidInput if shapes, mask or finiteness invariants are broken.
  void check() const;

  bool operator==(const DenseNet& other) const;

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::vector<double>> weights_;
  std::vector<std::vector<double>> biases_;
  std::vector<std::vector<std::uint8_t>> mask_;
};

// FNV-1a over dims, weights and biases.
std::uint64_t fingerprint(const DenseNet& net);

std::vector<double> forward(const DenseNet& net, std::span<const double> input);

struct TrainingSample {
  StateVec input;
  std::vector<double> target;
  // Nonzero entries select which outputs contribute to the loss.
  std::vector<std::uint8_t> output_mask;
};

struct GradientBatch {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  double loss = 0.0;
};

// Mean over samples of sum_k mask_k (out_k - target_k)^2.
double minibatch_loss(const DenseNet& net, std::span<const TrainingSample> batch);

GradientBatch backprop_minibatch(const DenseNet& net, std::span<const TrainingSample> batch);

DenseNet sgd_step(DenseNet net, const GradientBatch& grads, double lr);

inline DenseNet sync_target(const DenseNet& online) { return online; }

}  // namespace greendrl

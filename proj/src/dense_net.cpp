#include "greendrl/dense_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "greendrl/error.hpp"
#include "greendrl/kernels.hpp"

namespace greendrl {

DenseNet::DenseNet(std::vector<std::size_t> layer_dims) : dims_(std::move(layer_dims)) {
  if (dims_.size() < 2) throw InvalidInput("DenseNet needs at least an input and an output layer");
  for (std::size_t d : dims_)
    if (d == 0) throw InvalidInput("DenseNet layer width must be positive");
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    weights_.emplace_back(dims_[l] * dims_[l + 1], 0.0);
    biases_.emplace_back(dims_[l + 1], 0.0);
  }
}

DenseNet DenseNet::glorot(std::vector<std::size_t> layer_dims, Rng& rng) {
  DenseNet net(std::move(layer_dims));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(net.cols(l) + net.rows(l)));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : net.weights_[l]) w = dist(rng);
  }
  return net;
}

std::size_t DenseNet::weight_count() const noexcept {
  std::size_t n = 0;
  for (const auto& w : weights_) n += w.size();
  return n;
}

std::size_t DenseNet::param_count() const noexcept {
  std::size_t n = weight_count();
  for (const auto& b : biases_) n += b.size();
  return n;
}

void DenseNet::set_mask(std::size_t layer, std::vector<std::uint8_t> keep) {
  if (layer >= num_layers()) throw InvalidInput("mask layer out of range");
  if (keep.size() != weights_[layer].size()) throw InvalidInput("mask size does not match layer");
  if (mask_.empty()) {
    for (const auto& w : weights_) mask_.emplace_back(w.size(), std::uint8_t{1});
  }
  mask_[layer] = std::move(keep);
  apply_mask();
}

void DenseNet::apply_mask() {
  if (mask_.empty()) return;
  for (std::size_t l = 0; l < weights_.size(); ++l)
    for (std::size_t i = 0; i < weights_[l].size(); ++i)
      if (!mask_[l][i]) weights_[l][i] = 0.0;
}

void DenseNet::check() const {
  if (dims_.size() < 2 || weights_.size() + 1 != dims_.size() || biases_.size() != weights_.size())
    throw InvalidInput("DenseNet layer count mismatch");
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l].size() != dims_[l] * dims_[l + 1] || biases_[l].size() != dims_[l + 1])
      throw InvalidInput("DenseNet layer " + std::to_string(l) + " has inconsistent shape");
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(weights_[l].begin(), weights_[l].end(), finite) ||
        !std::all_of(biases_[l].begin(), biases_[l].end(), finite))
      throw InvalidInput("DenseNet layer " + std::to_string(l) + " has non-finite parameters");
  }
  if (!mask_.empty()) {
    if (mask_.size() != weights_.size()) throw InvalidInput("mask layer count mismatch");
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      if (mask_[l].size() != weights_[l].size()) throw InvalidInput("mask shape mismatch");
      for (std::size_t i = 0; i < mask_[l].size(); ++i)
        if (!mask_[l][i] && weights_[l][i] != 0.0) throw InvalidInput("masked weight is nonzero");
    }
  }
  if (!(std::isfinite(input_scale) && input_scale > 0.0)) throw InvalidInput("input scale must be positive");
  if (quant) {
    if (quant->bits < 2 || quant->bits > 16) throw InvalidInput("quantization bits out of range");
    if (quant->scale.size() != weights_.size()) throw InvalidInput("quantization scale per layer missing");
    for (double s : quant->scale)
      if (!(s > 0.0)) throw InvalidInput("quantization scale must be positive");
  }
}

bool DenseNet::operator==(const DenseNet& other) const {
  return dims_ == other.dims_ && input_scale == other.input_scale && weights_ == other.weights_ && biases_ == other.biases_ &&
         mask_ == other.mask_;
}

std::uint64_t fingerprint(const DenseNet& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t d : net.layer_dims()) {
    const std::uint64_t v = d;
    mix(&v, sizeof v);
  }
  mix(&net.input_scale, sizeof net.input_scale);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    mix(net.weights(l).data(), net.weights(l).size_bytes());
    mix(net.biases(l).data(), net.biases(l).size_bytes());
  }
  return h;
}

namespace {

// Pre-activations z[l] and activations a[l] (a[0] is the input).
struct Trace {
  std::vector<std::vector<double>> z;
  std::vector<std::vector<double>> a;
};

Trace forward_trace(const DenseNet& net, std::span<const double> input) {
  if (input.size() != net.input_dim())
    throw InvalidInput("input has " + std::to_string(input.size()) + " features, network expects " +
                       std::to_string(net.input_dim()));
  Trace tr;
  tr.a.emplace_back(input.begin(), input.end());
  if (net.input_scale != 1.0)
    for (double& v : tr.a.back()) v *= net.input_scale;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    std::vector<double> z(net.rows(l));
    kernels::affine(net.weights(l), net.rows(l), net.cols(l), tr.a.back(), net.biases(l), z);
    std::vector<double> act = z;
    if (l + 1 < net.num_layers())
      for (double& v : act) v = v > 0.0 ? v : 0.0;
    tr.z.push_back(std::move(z));
    tr.a.push_back(std::move(act));
  }
  return tr;
}

void check_sample(const DenseNet& net, const TrainingSample& s) {
  if (s.target.size() != net.output_dim() || s.output_mask.size() != net.output_dim())
    throw InvalidInput("training sample target/mask length does not match network output");
}

}  // namespace

std::vector<double> forward(const DenseNet& net, std::span<const double> input) {
  return std::move(forward_trace(net, input).a.back());
}

double minibatch_loss(const DenseNet& net, std::span<const TrainingSample> batch) {
  if (batch.empty()) throw InvalidInput("empty mini-batch");
  double total = 0.0;
  for (const auto& s : batch) {
    check_sample(net, s);
    const auto out = forward(net, s.input);
    for (std::size_t k = 0; k < out.size(); ++k)
      if (s.output_mask[k]) total += (out[k] - s.target[k]) * (out[k] - s.target[k]);
  }
  return total / static_cast<double>(batch.size());
}

GradientBatch backprop_minibatch(const DenseNet& net, std::span<const TrainingSample> batch) {
  if (batch.empty()) throw InvalidInput("empty mini-batch");
  const std::size_t layers = net.num_layers();
  GradientBatch g;
  for (std::size_t l = 0; l < layers; ++l) {
    g.weights.emplace_back(net.weights(l).size(), 0.0);
    g.biases.emplace_back(net.biases(l).size(), 0.0);
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  for (const auto& s : batch) {
    check_sample(net, s);
    const Trace tr = forward_trace(net, s.input);
    std::vector<double> delta(net.output_dim(), 0.0);
    for (std::size_t k = 0; k < delta.size(); ++k) {
      if (!s.output_mask[k]) continue;
      const double err = tr.a.back()[k] - s.target[k];
      g.loss += err * err;
      delta[k] = 2.0 * err * inv_n;
    }
    for (std::size_t l = layers; l-- > 0;) {
      const auto& in = tr.a[l];
      const std::size_t rows = net.rows(l), cols = net.cols(l);
      auto& gw = g.weights[l];
      for (std::size_t i = 0; i < rows; ++i) {
        if (delta[i] == 0.0) continue;
        g.biases[l][i] += delta[i];
        double* row = gw.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) row[j] += delta[i] * in[j];
      }
      if (l == 0) break;
      std::vector<double> prev(cols);
      kernels::matvec_transposed(net.weights(l), rows, cols, delta, prev);
      for (std::size_t j = 0; j < cols; ++j)
        if (tr.z[l - 1][j] <= 0.0) prev[j] = 0.0;
      delta = std::move(prev);
    }
  }
  g.loss *= inv_n;
  if (net.has_mask())
    for (std::size_t l = 0; l < layers; ++l)
      for (std::size_t i = 0; i < g.weights[l].size(); ++i)
        if (!net.mask(l)[i]) g.weights[l][i] = 0.0;
  return g;
}

DenseNet sgd_step(DenseNet net, const GradientBatch& grads, double lr) {
  if (!(lr > 0.0)) throw InvalidInput("learning rate must be positive");
  if (grads.weights.size() != net.num_layers() || grads.biases.size() != net.num_layers())
    throw InvalidInput("gradient layer count does not match network");
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    auto w = net.weights(l);
    auto b = net.biases(l);
    if (grads.weights[l].size() != w.size() || grads.biases[l].size() != b.size())
      throw InvalidInput("gradient shape does not match layer " + std::to_string(l));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * grads.weights[l][i];
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr * grads.biases[l][i];
  }
  net.apply_mask();
  // Weights left the quantization lattice.
  net.quant.reset();
  return net;
}

}  // namespace greendrl

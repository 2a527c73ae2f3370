#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "greendrl/dense_net.hpp"
#include "greendrl/rl_core.hpp"

namespace greendrl {

// ---- network compression -------------------------------------------------

struct SparsityReport {
  std::size_t total_weights = 0;
  std::size_t nonzero_weights = 0;
  double sparsity = 0.0;  // 1 - nonzero / total
  std::size_t mac_count_dense = 0;
  std::size_t mac_count_pruned = 0;
};

SparsityReport sparsity_report(const DenseNet& net);

struct PruneResult {
  DenseNet net;
  SparsityReport report;
};

// Masks every weight with |w| < threshold. Biases are untouched.
PruneResult prune_by_magnitude(DenseNet net, double threshold);

// Smallest threshold whose magnitude pruning reaches at least `fraction`
// sparsity over the currently nonzero weights (0 -> 0).
double threshold_for_sparsity(const DenseNet& net, double fraction);

// `layer` indexes layer_dims and must name a hidden layer.
struct NeuronRef {
  std::size_t layer = 0;
  std::size_t index = 0;
};

DenseNet prune_neurons(DenseNet net, std::span<const NeuronRef> drop);

struct QuantizedValues {
  double scale = 1.0;
  std::vector<std::int32_t> codes;
};

int max_code(int bits);

// Symmetric round-to-nearest quantization. When `lattice_scale` is given and
// every value already sits on that lattice within range, it is reused so that
// re-quantizing is exact.
QuantizedValues quantize_values(std::span<const double> values, int bits,
                                std::optional<double> lattice_scale = std::nullopt);

// Per-layer symmetric quantization of the weights; dequantized values replace
// the originals and QuantMeta is recorded. All-zero layers get scale 1.
DenseNet quantize_weights(DenseNet net, int bits);

// ---- MDP compression -----------------------------------------------------

struct DiscretizationScheme {
  double lo = 0.0;
  double hi = 1.0;
  int levels = 2;

  void check() const;
};

// Equal-width bins over [lo, hi]; values outside clamp to the end bins.
int discretize(const DiscretizationScheme& scheme, double value);

enum class SimilarityMetric { MaxQGap, BoltzmannDivergence };

struct StatePartition {
  std::map<StateId, StateId> mapping;
  std::size_t abstract_count = 0;

  StateId abstract_of(StateId s) const;  // InvalidInput when unmapped
  std::vector<StateId> members(StateId abstract_state) const;
};

double max_q_gap(std::span<const double> a, std::span<const double> b);

// Total-variation distance between softmax(row / temperature) distributions.
double boltzmann_divergence(std::span<const double> a, std::span<const double> b, double temperature);

// Greedy first-fit clustering in state-id order against each cluster's first member.
StatePartition aggregate_states(const QTable& table, double epsilon, SimilarityMetric metric,
                                double temperature = 1.0);

// Abstract rows are the mean of their member rows, keyed by abstract id.
QTable apply_partition(const QTable& table, const StatePartition& p);

}  // namespace greendrl

#include "greendrl/compression.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "greendrl/error.hpp"

namespace greendrl {

SparsityReport sparsity_report(const DenseNet& net) {
  SparsityReport r;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto w = net.weights(l);
    r.total_weights += w.size();
    r.nonzero_weights += static_cast<std::size_t>(std::count_if(w.begin(), w.end(), [](double v) { return v != 0.0; }));
  }
  r.sparsity = r.total_weights == 0
                   ? 0.0
                   : 1.0 - static_cast<double>(r.nonzero_weights) / static_cast<double>(r.total_weights);
  r.mac_count_dense = r.total_weights;
  r.mac_count_pruned = r.nonzero_weights;
  return r;
}

PruneResult prune_by_magnitude(DenseNet net, double threshold) {
  if (!std::isfinite(threshold) || threshold < 0.0) throw InvalidInput("pruning threshold must be finite and >= 0");
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto w = net.weights(l);
    std::vector<std::uint8_t> keep(w.size(), 1);
    if (net.has_mask()) keep.assign(net.mask(l).begin(), net.mask(l).end());
    for (std::size_t i = 0; i < w.size(); ++i)
      if (std::abs(w[i]) < threshold) keep[i] = 0;
    net.set_mask(l, std::move(keep));
  }
  SparsityReport report = sparsity_report(net);
  return {std::move(net), report};
}

double threshold_for_sparsity(const DenseNet& net, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw InvalidInput("sparsity fraction must lie in [0, 1]");
  std::vector<double> mags;
  std::size_t total = 0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    for (double w : net.weights(l))
      if (w != 0.0) mags.push_back(std::abs(w));
    total += net.weights(l).size();
  }
  const std::size_t already_zero = total - mags.size();
  const auto wanted = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(total)));
  if (wanted <= already_zero || mags.empty()) return 0.0;
  std::sort(mags.begin(), mags.end());
  const std::size_t k = std::min(wanted - already_zero, mags.size());
  if (k == mags.size()) return std::nextafter(mags.back(), INFINITY);
  // Prune strictly below the k-th smallest magnitude's successor.
  return std::nextafter(mags[k - 1], INFINITY);
}

DenseNet prune_neurons(DenseNet net, std::span<const NeuronRef> drop) {
  if (drop.empty()) return net;
  const std::size_t last = net.layer_dims().size() - 1;
  std::map<std::size_t, std::set<std::size_t>> by_layer;
  for (const auto& d : drop) {
    if (d.layer == 0 || d.layer >= last) throw InvalidInput("only hidden neurons can be pruned");
    if (d.index >= net.layer_dims()[d.layer]) throw InvalidInput("neuron index out of range");
    by_layer[d.layer].insert(d.index);
  }
  for (const auto& [layer, idx] : by_layer)
    if (idx.size() >= net.layer_dims()[layer])
      throw InvalidInput("pruning would remove every neuron of layer " + std::to_string(layer));

  auto& dims = net.dims_storage();
  auto& W = net.weight_storage();
  auto& B = net.bias_storage();
  auto& M = net.mask_storage();
  for (const auto& [layer, idx] : by_layer) {
    // Incoming: weight matrix layer-1 (rows = neurons of `layer`); outgoing: matrix `layer` (columns).
    const std::size_t in_l = layer - 1, out_l = layer;
    const std::size_t n = dims[layer];
    const std::size_t in_cols = dims[layer - 1];
    const std::size_t out_rows = dims[layer + 1];
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n; ++i)
      if (!idx.count(i)) keep.push_back(i);

    auto take_rows = [&](const std::vector<double>& src) {
      std::vector<double> dst;
      dst.reserve(keep.size() * in_cols);
      for (std::size_t r : keep) dst.insert(dst.end(), src.begin() + static_cast<long>(r * in_cols),
                                            src.begin() + static_cast<long>((r + 1) * in_cols));
      return dst;
    };
    auto take_cols = [&](const auto& src) {
      std::remove_cvref_t<decltype(src)> dst;
      dst.reserve(out_rows * keep.size());
      for (std::size_t r = 0; r < out_rows; ++r)
        for (std::size_t c : keep) dst.push_back(src[r * n + c]);
      return dst;
    };

    W[in_l] = take_rows(W[in_l]);
    std::vector<double> b;
    for (std::size_t r : keep) b.push_back(B[in_l][r]);
    B[in_l] = std::move(b);
    W[out_l] = take_cols(W[out_l]);
    if (!M.empty()) {
      std::vector<std::uint8_t> mrows;
      for (std::size_t r : keep)
        mrows.insert(mrows.end(), M[in_l].begin() + static_cast<long>(r * in_cols),
                     M[in_l].begin() + static_cast<long>((r + 1) * in_cols));
      M[in_l] = std::move(mrows);
      M[out_l] = take_cols(M[out_l]);
    }
    dims[layer] = keep.size();
  }
  net.check();
  return net;
}

int max_code(int bits) {
  if (bits < 2 || bits > 16) throw InvalidInput("quantization bits must lie in [2, 16]");
  return (1 << (bits - 1)) - 1;
}

QuantizedValues quantize_values(std::span<const double> values, int bits, std::optional<double> lattice_scale) {
  const int qmax = max_code(bits);
  QuantizedValues q;
  q.codes.resize(values.size());
  if (lattice_scale && *lattice_scale > 0.0) {
    bool on_lattice = true;
    for (std::size_t i = 0; i < values.size() && on_lattice; ++i) {
      const double c = std::nearbyint(values[i] / *lattice_scale);
      on_lattice = std::abs(c) <= qmax && c * *lattice_scale == values[i];
      if (on_lattice) q.codes[i] = static_cast<std::int32_t>(c);
    }
    if (on_lattice) {
      q.scale = *lattice_scale;
      return q;
    }
  }
  double max_abs = 0.0;
  for (double v : values) max_abs = std::max(max_abs, std::abs(v));
  q.scale = max_abs > 0.0 ? max_abs / qmax : 1.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double c = std::clamp(std::nearbyint(values[i] / q.scale), -static_cast<double>(qmax),
                                static_cast<double>(qmax));
    q.codes[i] = static_cast<std::int32_t>(c);
  }
  return q;
}

DenseNet quantize_weights(DenseNet net, int bits) {
  max_code(bits);
  QuantMeta meta;
  meta.bits = bits;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    std::optional<double> prior;
    if (net.quant && net.quant->bits == bits && l < net.quant->scale.size()) prior = net.quant->scale[l];
    const auto q = quantize_values(net.weights(l), bits, prior);
    auto w = net.weights(l);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = q.codes[i] * q.scale;
    meta.scale.push_back(q.scale);
    meta.zero_point.push_back(0);
  }
  net.apply_mask();
  net.quant = std::move(meta);
  return net;
}

void DiscretizationScheme::check() const {
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) throw ConfigError("discretization needs lo < hi");
  if (levels < 2) throw ConfigError("discretization needs at least 2 levels");
}

int discretize(const DiscretizationScheme& scheme, double value) {
  scheme.check();
  if (!(value > scheme.lo)) return 0;  // also catches NaN
  if (value >= scheme.hi) return scheme.levels - 1;
  const double width = (scheme.hi - scheme.lo) / scheme.levels;
  const int bin = static_cast<int>((value - scheme.lo) / width);
  return std::min(bin, scheme.levels - 1);
}

StateId StatePartition::abstract_of(StateId s) const {
  auto it = mapping.find(s);
  if (it == mapping.end()) throw InvalidInput("state " + std::to_string(s) + " is not covered by the partition");
  return it->second;
}

std::vector<StateId> StatePartition::members(StateId abstract_state) const {
  std::vector<StateId> out;
  for (const auto& [s, a] : mapping)
    if (a == abstract_state) out.push_back(s);
  return out;
}

double max_q_gap(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("Q rows differ in length");
  double gap = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) gap = std::max(gap, std::abs(a[i] - b[i]));
  return gap;
}

namespace {

std::vector<double> softmax(std::span<const double> row, double temperature) {
  const double top = *std::max_element(row.begin(), row.end());
  std::vector<double> p(row.size());
  double z = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) z += p[i] = std::exp((row[i] - top) / temperature);
  for (double& v : p) v /= z;
  return p;
}

}  // namespace

double boltzmann_divergence(std::span<const double> a, std::span<const double> b, double temperature) {
  if (a.size() != b.size() || a.empty()) throw InvalidInput("Q rows differ in length");
  if (!(temperature > 0.0)) throw InvalidInput("Boltzmann temperature must be positive");
  const auto pa = softmax(a, temperature);
  const auto pb = softmax(b, temperature);
  double tv = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) tv += std::abs(pa[i] - pb[i]);
  return 0.5 * tv;
}

StatePartition aggregate_states(const QTable& table, double epsilon, SimilarityMetric metric, double temperature) {
  if (!(epsilon >= 0.0)) throw InvalidInput("aggregation epsilon must be >= 0");
  StatePartition p;
  std::vector<const std::vector<double>*> reps;
  for (const auto& [s, row] : table.rows()) {
    std::size_t cluster = reps.size();
    for (std::size_t c = 0; c < reps.size(); ++c) {
      const double d = metric == SimilarityMetric::MaxQGap ? max_q_gap(row, *reps[c])
                                                           : boltzmann_divergence(row, *reps[c], temperature);
      if (d <= epsilon) {
        cluster = c;
        break;
      }
    }
    if (cluster == reps.size()) reps.push_back(&row);
    p.mapping[s] = static_cast<StateId>(cluster);
  }
  p.abstract_count = reps.size();
  return p;
}

QTable apply_partition(const QTable& table, const StatePartition& p) {
  QTable out(table.num_actions(), table.alpha());
  std::map<StateId, std::size_t> counts;
  for (const auto& [s, row] : table.rows()) {
    const StateId a = p.abstract_of(s);
    auto& dst = out.row(a);
    for (std::size_t i = 0; i < row.size(); ++i) dst[i] += row[i];
    ++counts[a];
  }
  for (const auto& [a, n] : counts)
    for (double& v : out.row(a)) v /= static_cast<double>(n);
  return out;
}

}  // namespace greendrl

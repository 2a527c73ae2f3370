#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "greendrl/dense_net.hpp"

namespace greendrl::energy {

struct Coefficients {
  double per_mac = 1.0;
  double per_mem_access = 1.0;
  double per_byte = 1.0;
  bool operator==(const Coefficients&) const = default;
};

enum class Direction { Down, Up };

struct InferenceEvent {
  std::uint64_t macs = 0;
};
struct TrainStepEvent {
  std::uint64_t macs_forward = 0;
  std::uint64_t nonzero_weights = 0;
  std::uint64_t batch_size = 0;
};
struct MessageEvent {
  std::uint64_t bytes = 0;
  Direction direction = Direction::Down;
};
using Event = std::variant<InferenceEvent, TrainStepEvent, MessageEvent>;

// Nonzero weights across all layers; masked weights are zero and excluded.
std::uint64_t macs_forward(const DenseNet& net);

Event inference(const DenseNet& net);
Event train_step(const DenseNet& net, std::uint64_t batch_size);
Event message(std::uint64_t bytes, Direction direction);

// Backward pass is costed at twice the forward MACs.
inline constexpr std::uint64_t kTrainMacMultiplier = 3;

struct Ledger {
  std::uint64_t macs_inference = 0;
  std::uint64_t macs_training = 0;
  std::uint64_t mem_accesses = 0;
  std::uint64_t bytes_wire = 0;
  std::uint64_t bytes_down = 0;
  std::uint64_t bytes_up = 0;
  Coefficients coefficients;

  std::uint64_t total_macs() const noexcept { return macs_inference + macs_training; }
  double energy_proxy() const noexcept;
  bool operator==(const Ledger&) const = default;
};

Ledger record_event(Ledger ledger, const Event& event);

// Recompute a ledger from scratch.
Ledger replay(std::span<const Event> events, Coefficients coefficients = {});

struct CounterComparison {
  std::string counter;
  double a = 0.0;
  double b = 0.0;
  double ratio = 1.0;  // b / a; 1 when both are zero
  double delta = 0.0;  // b - a
};

// Throws InvalidInput when the coefficient configs differ.
std::vector<CounterComparison> compare(const Ledger& a, const Ledger& b);

void write_comparison_csv(std::ostream& os, std::span<const CounterComparison> rows);

}  // namespace greendrl::energy

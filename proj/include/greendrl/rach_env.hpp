#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "greendrl/rl_core.hpp"
#include "greendrl/rng.hpp"

namespace greendrl::rach {

struct RachAction {
  int rach_channels = 1;
  int preambles_per_channel = 1;
  int repetition = 1;

  int opportunities() const noexcept { return rach_channels * preambles_per_channel; }
  bool operator==(const RachAction&) const = default;
};

enum class TrafficMode { Bernoulli, External };

struct RachConfig {
  int num_devices = 50;
  std::vector<RachAction> action_menu;
  int history_window = 4;
  TrafficMode traffic = TrafficMode::Bernoulli;
  double arrival_prob = 0.05;  // per idle device per slot (Bernoulli mode)
  int backoff_slots = 4;
  std::uint64_t seed = 0;

  void check() const;  // ConfigError on violation
  int max_opportunities() const;
};

struct SlotCounts {
  int idle = 0;
  int collided = 0;
  int successful = 0;
  bool operator==(const SlotCounts&) const = default;
};

// Sliding window of per-slot preamble counts, oldest first.
struct SlotObservation {
  std::vector<SlotCounts> window;

  // (idle, collided, successful) per slot flattened, length 3 * window.
  StateVec features() const;
  const SlotCounts& latest() const { return window.back(); }
};

struct SlotOutcome {
  int served = 0;
  int backlog = 0;
  int arrivals = 0;
  int attempts = 0;
  std::vector<int> occupancy;  // devices per preamble opportunity
};

struct StepResult {
  SlotObservation observation;
  double reward = 0.0;
  SlotOutcome outcome;
};

// Classify opportunities given each attempting device's chosen opportunity.
SlotCounts resolve_preambles(std::span<const int> choices, int opportunities, std::vector<int>* occupancy = nullptr);

// n * (1 - 1/m)^(n-1): expected singleton opportunities with n devices choosing uniformly among m.
double expected_successes(double n, int m);

double access_probability(const RachAction& a, int backoff_slots);

class RachEnv {
 public:
  explicit RachEnv(RachConfig cfg);

  // Zero backlog, zero-filled history, RNG reseeded from the config.
  SlotObservation reset();

  // `external_arrivals` is required in External traffic mode and is capped by idle devices.
  StepResult step(const RachAction& action, std::optional<int> external_arrivals = std::nullopt);
  StepResult step(ActionId action, std::optional<int> external_arrivals = std::nullopt);

  const RachConfig& config() const noexcept { return cfg_; }
  const SlotObservation& observation() const noexcept { return obs_; }
  int backlog() const noexcept { return backlog_; }
  std::size_t state_dim() const { return 3 * static_cast<std::size_t>(cfg_.history_window); }

  // Scenario injection for tests and warm starts.
  void set_backlog(int devices);

 private:
  RachConfig cfg_;
  Rng rng_;
  SlotObservation obs_;
  int backlog_ = 0;
  std::vector<int> choices_;
};

std::size_t action_index(std::span<const RachAction> menu, const RachAction& a);

// Load-estimation baseline: backlog estimate from the latest slot, then the
// menu entry maximizing estimated successes; ties go to fewer opportunities.
inline constexpr double kCollisionMultiplicity = 2.39;
RachAction le_urc_policy(const SlotObservation& obs, std::span<const RachAction> menu);

// Per-slot trace CSV.
void write_trace_header(std::ostream& os);
void write_trace_row(std::ostream& os, std::uint64_t slot, const RachAction& a, const SlotCounts& c,
                     const SlotOutcome& o);

}  // namespace greendrl::rach

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "greendrl/cloud_loop.hpp"
#include "greendrl/energy.hpp"
#include "greendrl/rach_env.hpp"
#include "greendrl/rl_core.hpp"

// Agents that act directly at the base station (no cloud loop): the tabular
// and linear Q-learners, the load-estimation heuristic and a random baseline.
namespace greendrl::agents {

enum class AgentKind { Tabular, LinearQ, Dqn, LeUrc, Random };

AgentKind parse_agent(const std::string& tag);  // ConfigError on unknown tags
std::string to_string(AgentKind kind);

using GreedyPolicy = std::function<ActionId(const StateVec&)>;

// Mean served devices per slot of a fixed policy on a fresh environment.
double evaluate_policy(rach::RachConfig cfg, const GreedyPolicy& policy, std::size_t slots, std::uint64_t seed,
                       const cloud::ArrivalSource& arrivals = {});

GreedyPolicy greedy_net_policy(DenseNet net);

struct LocalParams {
  AgentKind kind = AgentKind::LinearQ;
  double alpha = 0.01;
  double discount = 0.9;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::size_t epsilon_decay_steps = 2000;
  int tabular_levels = 3;
  std::uint64_t seed = 0;
};

struct LocalRun {
  std::vector<cloud::RoundRecord> rounds;
  energy::Ledger energy;
  std::vector<energy::Event> events;
  GreedyPolicy greedy;
  std::size_t tabular_states = 0;
};

// rounds x K slots with an update after every slot for the learners.
LocalRun run_local_agent(const rach::RachConfig& env_cfg, const LocalParams& params, std::size_t rounds,
                         std::size_t steps_per_round, const cloud::ArrivalSource& arrivals = {},
                         energy::Coefficients coefficients = {});

// Mixed-radix id of the per-feature bins.
StateId tabular_state(const StateVec& features, int levels, double max_count);

}  // namespace greendrl::agents

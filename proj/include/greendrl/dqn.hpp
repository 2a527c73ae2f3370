#pragma once

#include <cstddef>
#include <vector>

#include "greendrl/dense_net.hpp"
#include "greendrl/replay.hpp"
#include "greendrl/rl_core.hpp"

namespace greendrl {

struct DqnHyper {
  std::vector<std::size_t> hidden{32, 32};
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t replay_capacity = 10000;
  std::size_t target_sync_every = 100;  // training steps between target refreshes
  double discount = 0.9;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::size_t epsilon_decay_steps = 2000;  // interactions over which epsilon anneals linearly
};

// Linear annealing from epsilon_start to epsilon_end.
double annealed_epsilon(const DqnHyper& h, std::size_t interactions);

struct DqnStep {
  DenseNet online;
  double loss = 0.0;
};

// One mini-batch update toward r + discount * max_a' Q_target(s', a').
// Throws NotReady when the buffer holds fewer than batch_size transitions.
DqnStep dqn_train_step(DenseNet online, const DenseNet& target, const ReplayBuffer& buffer,
                       std::size_t batch_size, Discount discount, double lr, Rng& rng);

}  // namespace greendrl

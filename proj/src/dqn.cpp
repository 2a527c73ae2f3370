#include "greendrl/dqn.hpp"

#include <algorithm>

#include "greendrl/error.hpp"

namespace greendrl {

double annealed_epsilon(const DqnHyper& h, std::size_t interactions) {
  if (h.epsilon_decay_steps == 0 || interactions >= h.epsilon_decay_steps) return h.epsilon_end;
  const double frac = static_cast<double>(interactions) / static_cast<double>(h.epsilon_decay_steps);
  return h.epsilon_start + (h.epsilon_end - h.epsilon_start) * frac;
}

DqnStep dqn_train_step(DenseNet online, const DenseNet& target, const ReplayBuffer& buffer,
                       std::size_t batch_size, Discount discount, double lr, Rng& rng) {
  if (batch_size == 0) throw InvalidInput("batch size must be positive");
  if (buffer.size() < batch_size)
    throw NotReady("replay buffer holds " + std::to_string(buffer.size()) + " of " +
                   std::to_string(batch_size) + " transitions");
  const auto idx = buffer.sample_indices(batch_size, rng);
  std::vector<TrainingSample> batch;
  batch.reserve(idx.size());
  for (std::size_t i : idx) {
    const Transition& t = buffer.at(i);
    if (t.action.index >= online.output_dim()) throw InvalidInput("transition action outside network outputs");
    double y = t.reward;
    if (!t.terminal) {
      const auto next = forward(target, t.next_state);
      y += discount.value() * *std::max_element(next.begin(), next.end());
    }
    TrainingSample s;
    s.input = t.state;
    s.target.assign(online.output_dim(), 0.0);
    s.target[t.action.index] = y;
    s.output_mask.assign(online.output_dim(), 0);
    s.output_mask[t.action.index] = 1;
    batch.push_back(std::move(s));
  }
  const GradientBatch g = backprop_minibatch(online, batch);
  DqnStep out{sgd_step(std::move(online), g, lr), g.loss};
  return out;
}

}  // namespace greendrl

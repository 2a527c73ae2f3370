#include "greendrl/replay.hpp"

#include "greendrl/error.hpp"

namespace greendrl {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be at least 1");
}

void ReplayBuffer::push(Transition t) {
  validate(t);
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, Rng& rng) const {
  if (items_.empty()) throw NotReady("replay buffer is empty");
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = uniform_index(rng, items_.size());
  return idx;
}

}  // namespace greendrl

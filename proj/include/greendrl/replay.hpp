#pragma once

#include <cstddef>
#include <deque>
#include <vector>

#include "greendrl/rl_core.hpp"
#include "greendrl/rng.hpp"

namespace greendrl {

// Bounded FIFO of transitions; the oldest record is evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool empty() const noexcept { return items_.empty(); }
  const Transition& at(std::size_t i) const { return items_.at(i); }

  // Uniform draws with replacement.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

}  // namespace greendrl

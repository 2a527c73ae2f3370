#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "greendrl/rng.hpp"

namespace greendrl {

using StateVec = std::vector<double>;

struct ActionId {
  std::size_t index = 0;
  auto operator<=>(const ActionId&) const = default;
};

struct Transition {
  StateVec state;
  ActionId action;
  double reward = 0.0;
  StateVec next_state;
  bool terminal = false;
};

// Throws InvalidInput when the record violates its invariants.
void validate(const Transition& t);

class Discount {
 public:
  explicit Discount(double lambda);
  double value() const noexcept { return lambda_; }

 private:
  double lambda_;
};

double discounted_return(std::span<const double> rewards, Discount discount);

// Lowest index wins ties.
ActionId argmax(std::span<const double> q_values);

ActionId epsilon_greedy(std::span<const double> q_values, double epsilon, Rng& rng);

using StateId = std::int64_t;

// Tabular action values. Unknown states read as all-zero rows.
class QTable {
 public:
  QTable(std::size_t num_actions, double alpha);

  std::size_t num_actions() const noexcept { return num_actions_; }
  double alpha() const noexcept { return alpha_; }

  const std::vector<double>& row(StateId s) const;
  std::vector<double>& row(StateId s);
  double value(StateId s, ActionId a) const;
  void set(StateId s, ActionId a, double v);
  bool contains(StateId s) const { return values_.count(s) != 0; }
  std::size_t size() const noexcept { return values_.size(); }
  const std::map<StateId, std::vector<double>>& rows() const noexcept { return values_; }

 private:
  std::size_t num_actions_;
  double alpha_;
  std::map<StateId, std::vector<double>> values_;
  std::vector<double> zeros_;
};

struct DiscreteTransition {
  StateId state = 0;
  ActionId action;
  double reward = 0.0;
  StateId next_state = 0;
  bool terminal = false;
};

QTable tabular_q_update(QTable table, const DiscreteTransition& t, Discount discount);

// Per-action linear value over features [s; 1].
class LinearQ {
 public:
  LinearQ(std::size_t state_dim, std::size_t num_actions);

  std::size_t state_dim() const noexcept { return dim_; }
  std::size_t num_actions() const noexcept { return weights_.size(); }
  std::span<double> weights(ActionId a) { return weights_.at(a.index); }
  std::span<const double> weights(ActionId a) const { return weights_.at(a.index); }

 private:
  std::size_t dim_;
  std::vector<std::vector<double>> weights_;
};

std::vector<double> linear_q_predict(const LinearQ& lq, std::span<const double> s);

LinearQ linear_q_update(LinearQ lq, const Transition& t, Discount discount, double alpha);

}  // namespace greendrl

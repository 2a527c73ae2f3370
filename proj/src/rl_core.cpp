#include "greendrl/rl_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "greendrl/error.hpp"

namespace greendrl {

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double max_of(std::span<const double> v) { return *std::max_element(v.begin(), v.end()); }

}  // namespace

void validate(const Transition& t) {
  if (!std::isfinite(t.reward)) throw InvalidInput("transition reward is not finite");
  if (t.state.size() != t.next_state.size())
    throw InvalidInput("transition state and next_state differ in dimensionality");
  if (!all_finite(t.state) || !all_finite(t.next_state))
    throw InvalidInput("transition state has non-finite features");
}

Discount::Discount(double lambda) : lambda_(lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw ConfigError("discount must lie in (0, 1], got " + std::to_string(lambda));
}

double discounted_return(std::span<const double> rewards, Discount discount) {
  double total = 0.0;
  double weight = 1.0;
  for (double r : rewards) {
    if (!std::isfinite(r)) throw InvalidInput("non-finite reward in discounted_return");
    total += weight * r;
    weight *= discount.value();
  }
  return total;
}

ActionId argmax(std::span<const double> q_values) {
  if (q_values.empty()) throw InvalidInput("argmax over an empty action set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < q_values.size(); ++i)
    if (q_values[i] > q_values[best]) best = i;
  return ActionId{best};
}

ActionId epsilon_greedy(std::span<const double> q_values, double epsilon, Rng& rng) {
  if (q_values.empty()) throw InvalidInput("epsilon_greedy over an empty action set");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidInput("epsilon must lie in [0, 1]");
  if (!all_finite(q_values)) throw InvalidInput("non-finite action value");
  // One draw decides explore/exploit; a second picks the action only when exploring.
  if (epsilon > 0.0 && uniform01(rng) < epsilon) return ActionId{uniform_index(rng, q_values.size())};
  return argmax(q_values);
}

QTable::QTable(std::size_t num_actions, double alpha)
    : num_actions_(num_actions), alpha_(alpha), zeros_(num_actions, 0.0) {
  if (num_actions == 0) throw ConfigError("QTable needs at least one action");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("learning rate alpha must lie in (0, 1]");
}

const std::vector<double>& QTable::row(StateId s) const {
  auto it = values_.find(s);
  return it == values_.end() ? zeros_ : it->second;
}

std::vector<double>& QTable::row(StateId s) {
  auto [it, inserted] = values_.try_emplace(s, zeros_);
  return it->second;
}

double QTable::value(StateId s, ActionId a) const {
  if (a.index >= num_actions_) throw InvalidInput("action index out of range");
  return row(s)[a.index];
}

void QTable::set(StateId s, ActionId a, double v) {
  if (a.index >= num_actions_) throw InvalidInput("action index out of range");
  if (!std::isfinite(v)) throw InvalidInput("non-finite Q value");
  row(s)[a.index] = v;
}

QTable tabular_q_update(QTable table, const DiscreteTransition& t, Discount discount) {
  if (!std::isfinite(t.reward)) throw InvalidInput("non-finite reward");
  if (t.action.index >= table.num_actions()) throw InvalidInput("action index out of range");
  double target = t.reward;
  if (!t.terminal) {
    target += discount.value() * max_of(std::as_const(table).row(t.next_state));
  }
  auto& q = table.row(t.state)[t.action.index];
  q = (1.0 - table.alpha()) * q + table.alpha() * target;
  return table;
}

LinearQ::LinearQ(std::size_t state_dim, std::size_t num_actions)
    : dim_(state_dim), weights_(num_actions, std::vector<double>(state_dim + 1, 0.0)) {
  if (num_actions == 0) throw ConfigError("LinearQ needs at least one action");
}

std::vector<double> linear_q_predict(const LinearQ& lq, std::span<const double> s) {
  if (s.size() != lq.state_dim())
    throw InvalidInput("state has " + std::to_string(s.size()) + " features, LinearQ expects " +
                       std::to_string(lq.state_dim()));
  std::vector<double> out(lq.num_actions());
  for (std::size_t a = 0; a < out.size(); ++a) {
    auto w = lq.weights(ActionId{a});
    double v = w[lq.state_dim()];
    for (std::size_t i = 0; i < s.size(); ++i) v += w[i] * s[i];
    out[a] = v;
  }
  return out;
}

LinearQ linear_q_update(LinearQ lq, const Transition& t, Discount discount, double alpha) {
  validate(t);
  if (t.action.index >= lq.num_actions()) throw InvalidInput("action index out of range");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("learning rate alpha must lie in (0, 1]");
  double target = t.reward;
  if (!t.terminal) target += discount.value() * max_of(linear_q_predict(lq, t.next_state));
  const double prediction = linear_q_predict(lq, t.state)[t.action.index];
  const double step = alpha * (target - prediction);
  auto w = lq.weights(t.action);
  for (std::size_t i = 0; i < lq.state_dim(); ++i) w[i] += step * t.state[i];
  w[lq.state_dim()] += step;
  return lq;
}

}  // namespace greendrl

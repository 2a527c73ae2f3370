#include "greendrl/agents.hpp"

#include <algorithm>
#include <memory>
#include <utility>
#include <optional>

#include "greendrl/compression.hpp"
#include "greendrl/error.hpp"

namespace greendrl::agents {

AgentKind parse_agent(const std::string& tag) {
  if (tag == "tabular") return AgentKind::Tabular;
  if (tag == "la-q") return AgentKind::LinearQ;
  if (tag == "dqn") return AgentKind::Dqn;
  if (tag == "le-urc") return AgentKind::LeUrc;
  if (tag == "random") return AgentKind::Random;
  throw ConfigError("unknown agent '" + tag + "' (expected tabular, la-q, dqn, le-urc or random)", "agent");
}

std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::Tabular: return "tabular";
    case AgentKind::LinearQ: return "la-q";
    case AgentKind::Dqn: return "dqn";
    case AgentKind::LeUrc: return "le-urc";
    case AgentKind::Random: return "random";
  }
  return "unknown";
}

double evaluate_policy(rach::RachConfig cfg, const GreedyPolicy& policy, std::size_t slots, std::uint64_t seed,
                       const cloud::ArrivalSource& arrivals) {
  if (slots == 0) return 0.0;
  cfg.seed = seed;
  rach::RachEnv env(cfg);
  StateVec s = env.observation().features();
  double served = 0.0;
  for (std::size_t t = 0; t < slots; ++t) {
    std::optional<int> arr;
    if (cfg.traffic == rach::TrafficMode::External) arr = arrivals(t);
    auto res = env.step(policy(s), arr);
    served += res.reward;
    s = res.observation.features();
  }
  return served / static_cast<double>(slots);
}

GreedyPolicy greedy_net_policy(DenseNet net) {
  auto shared = std::make_shared<const DenseNet>(std::move(net));
  return [shared](const StateVec& s) { return argmax(forward(*shared, s)); };
}

StateId tabular_state(const StateVec& features, int levels, double max_count) {
  const DiscretizationScheme scheme{0.0, max_count, levels};
  StateId id = 0;
  for (double f : features) id = id * levels + discretize(scheme, f);
  return id;
}

namespace {

double epsilon_at(const LocalParams& p, std::size_t step) {
  if (p.epsilon_decay_steps == 0 || step >= p.epsilon_decay_steps) return p.epsilon_end;
  const double frac = static_cast<double>(step) / static_cast<double>(p.epsilon_decay_steps);
  return p.epsilon_start + (p.epsilon_end - p.epsilon_start) * frac;
}

StateVec scaled(const StateVec& s, double scale) {
  StateVec out(s);
  for (double& v : out) v *= scale;
  return out;
}

}  // namespace

LocalRun run_local_agent(const rach::RachConfig& env_cfg, const LocalParams& params, std::size_t rounds,
                         std::size_t steps_per_round, const cloud::ArrivalSource& arrivals,
                         energy::Coefficients coefficients) {
  if (params.kind == AgentKind::Dqn) throw InvalidInput("DQN agents run through the cloud loop");
  if (steps_per_round == 0) throw ConfigError("must be >= 1", "cloud.K");
  rach::RachEnv env(env_cfg);
  const auto& menu = env_cfg.action_menu;
  const std::size_t actions = menu.size();
  const double max_count = std::max(1, env_cfg.max_opportunities());
  const double scale = 1.0 / max_count;
  const Discount discount(params.discount);
  Rng rng(derive_seed(params.seed, 2));

  auto lq = std::make_shared<LinearQ>(env.state_dim(), actions);
  auto table = std::make_shared<QTable>(actions, params.kind == AgentKind::Tabular ? params.alpha : 1.0);
  const std::uint64_t linear_macs = actions * (env.state_dim() + 1);

  LocalRun run;
  run.energy.coefficients = coefficients;
  auto record = [&run](const energy::Event& e) {
    run.events.push_back(e);
    run.energy = energy::record_event(run.energy, e);
  };

  StateVec s = env.observation().features();
  std::size_t step = 0;
  for (std::size_t r = 0; r < rounds; ++r) {
    double reward_sum = 0.0;
    for (std::size_t k = 0; k < steps_per_round; ++k, ++step) {
      const double eps = epsilon_at(params, step);
      ActionId a;
      switch (params.kind) {
        case AgentKind::LeUrc:
          a = ActionId{rach::action_index(menu, rach::le_urc_policy(env.observation(), menu))};
          break;
        case AgentKind::Random:
          a = ActionId{uniform_index(rng, actions)};
          break;
        case AgentKind::LinearQ:
          record(energy::InferenceEvent{linear_macs});
          a = epsilon_greedy(linear_q_predict(*lq, scaled(s, scale)), eps, rng);
          break;
        case AgentKind::Tabular:
          a = epsilon_greedy(table->row(tabular_state(s, params.tabular_levels, max_count)), eps, rng);
          break;
        case AgentKind::Dqn:
          break;
      }
      std::optional<int> arr;
      if (env_cfg.traffic == rach::TrafficMode::External) arr = arrivals(step);
      auto res = env.step(a, arr);
      StateVec next = res.observation.features();
      reward_sum += res.reward;
      if (params.kind == AgentKind::LinearQ) {
        // Two predictions (target and current) plus the weight update.
        record(energy::TrainStepEvent{linear_macs, linear_macs, 1});
        *lq = linear_q_update(std::move(*lq), Transition{scaled(s, scale), a, res.reward, scaled(next, scale), false},
                              discount, params.alpha);
      } else if (params.kind == AgentKind::Tabular) {
        *table = tabular_q_update(std::move(*table),
                                  DiscreteTransition{tabular_state(s, params.tabular_levels, max_count), a, res.reward,
                                                     tabular_state(next, params.tabular_levels, max_count), false},
                                  discount);
      }
      s = std::move(next);
    }
    cloud::RoundRecord rec;
    rec.round = r + 1;
    rec.epsilon = epsilon_at(params, step);
    rec.mean_reward = reward_sum / static_cast<double>(steps_per_round);
    rec.energy = run.energy;
    run.rounds.push_back(rec);
  }

  switch (params.kind) {
    case AgentKind::LeUrc:
      run.greedy = [menu](const StateVec& s) {
        rach::SlotObservation obs;
        for (std::size_t i = 0; i + 2 < s.size(); i += 3)
          obs.window.push_back({static_cast<int>(s[i]), static_cast<int>(s[i + 1]), static_cast<int>(s[i + 2])});
        return ActionId{rach::action_index(menu, rach::le_urc_policy(obs, menu))};
      };
      break;
    case AgentKind::Random: {
      auto eval_rng = std::make_shared<Rng>(derive_seed(params.seed, 3));
      run.greedy = [eval_rng, actions](const StateVec&) { return ActionId{uniform_index(*eval_rng, actions)}; };
      break;
    }
    case AgentKind::LinearQ:
      run.greedy = [lq, scale](const StateVec& s) { return argmax(linear_q_predict(*lq, scaled(s, scale))); };
      break;
    case AgentKind::Tabular:
      run.tabular_states = table->size();
      run.greedy = [table, levels = params.tabular_levels, max_count](const StateVec& s) {
        return argmax(std::as_const(*table).row(tabular_state(s, levels, max_count)));
      };
      break;
    case AgentKind::Dqn:
      break;
  }
  return run;
}

}  // namespace greendrl::agents

#include "greendrl/rach_env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "greendrl/error.hpp"

namespace greendrl::rach {

void RachConfig::check() const {
  if (num_devices < 0) throw ConfigError("must be >= 0", "rach.num_devices");
  if (action_menu.empty()) throw ConfigError("action menu must not be empty", "rach.action_menu");
  for (const auto& a : action_menu)
    if (a.rach_channels < 1 || a.preambles_per_channel < 1 || a.repetition < 1)
      throw ConfigError("every action needs channels, preambles and repetition >= 1", "rach.action_menu");
  if (history_window < 1) throw ConfigError("must be >= 1", "rach.history_window");
  if (backoff_slots < 1) throw ConfigError("must be >= 1", "rach.backoff_slots");
  if (!(arrival_prob >= 0.0 && arrival_prob <= 1.0)) throw ConfigError("must lie in [0, 1]", "rach.arrival_prob");
}

int RachConfig::max_opportunities() const {
  int m = 0;
  for (const auto& a : action_menu) m = std::max(m, a.opportunities());
  return m;
}

StateVec SlotObservation::features() const {
  StateVec f;
  f.reserve(window.size() * 3);
  for (const auto& c : window) {
    f.push_back(c.idle);
    f.push_back(c.collided);
    f.push_back(c.successful);
  }
  return f;
}

SlotCounts resolve_preambles(std::span<const int> choices, int opportunities, std::vector<int>* occupancy) {
  if (opportunities < 1) throw InvalidInput("need at least one preamble opportunity");
  std::vector<int> local;
  std::vector<int>& occ = occupancy ? *occupancy : local;
  occ.assign(static_cast<std::size_t>(opportunities), 0);
  for (int c : choices) {
    if (c < 0 || c >= opportunities) throw InvalidInput("preamble choice out of range");
    ++occ[static_cast<std::size_t>(c)];
  }
  SlotCounts counts;
  for (int k : occ) {
    if (k == 0)
      ++counts.idle;
    else if (k == 1)
      ++counts.successful;
    else
      ++counts.collided;
  }
  return counts;
}

double expected_successes(double n, int m) {
  if (n <= 0.0) return 0.0;
  return n * std::pow(1.0 - 1.0 / m, n - 1.0);
}

double access_probability(const RachAction& a, int backoff_slots) {
  return std::min(1.0, static_cast<double>(a.repetition) / backoff_slots);
}

RachEnv::RachEnv(RachConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.check();
  reset();
}

SlotObservation RachEnv::reset() {
  rng_.seed(cfg_.seed);
  backlog_ = 0;
  obs_.window.assign(static_cast<std::size_t>(cfg_.history_window), SlotCounts{});
  return obs_;
}

void RachEnv::set_backlog(int devices) {
  if (devices < 0 || devices > cfg_.num_devices) throw InvalidInput("backlog outside [0, num_devices]");
  backlog_ = devices;
}

StepResult RachEnv::step(ActionId action, std::optional<int> external_arrivals) {
  if (action.index >= cfg_.action_menu.size()) throw InvalidInput("action index outside the menu");
  return step(cfg_.action_menu[action.index], external_arrivals);
}

StepResult RachEnv::step(const RachAction& action, std::optional<int> external_arrivals) {
  if (std::find(cfg_.action_menu.begin(), cfg_.action_menu.end(), action) == cfg_.action_menu.end())
    throw InvalidInput("action is not in the configured menu");
  StepResult res;
  SlotOutcome& out = res.outcome;

  const int idle_devices = cfg_.num_devices - backlog_;
  if (cfg_.traffic == TrafficMode::Bernoulli) {
    for (int i = 0; i < idle_devices; ++i)
      if (uniform01(rng_) < cfg_.arrival_prob) ++out.arrivals;
  } else {
    if (!external_arrivals) throw InvalidInput("external traffic mode needs an arrival count per slot");
    if (*external_arrivals < 0) throw InvalidInput("negative arrival count");
    out.arrivals = std::min(*external_arrivals, idle_devices);
  }
  backlog_ += out.arrivals;

  const int m = action.opportunities();
  const double q = access_probability(action, cfg_.backoff_slots);
  choices_.clear();
  for (int d = 0; d < backlog_; ++d) {
    if (q < 1.0 && !(uniform01(rng_) < q)) continue;
    choices_.push_back(static_cast<int>(uniform_index(rng_, static_cast<std::size_t>(m))));
  }
  out.attempts = static_cast<int>(choices_.size());
  const SlotCounts counts = resolve_preambles(choices_, m, &out.occupancy);

  out.served = counts.successful;
  backlog_ -= out.served;
  out.backlog = backlog_;

  obs_.window.erase(obs_.window.begin());
  obs_.window.push_back(counts);
  res.observation = obs_;
  res.reward = out.served;
  return res;
}

std::size_t action_index(std::span<const RachAction> menu, const RachAction& a) {
  auto it = std::find(menu.begin(), menu.end(), a);
  if (it == menu.end()) throw InvalidInput("action is not in the menu");
  return static_cast<std::size_t>(it - menu.begin());
}

RachAction le_urc_policy(const SlotObservation& obs, std::span<const RachAction> menu) {
  if (menu.empty()) throw InvalidInput("empty action menu");
  const SlotCounts& last = obs.latest();
  const double backlog_estimate = std::max(last.successful + kCollisionMultiplicity * last.collided, 1.0);
  std::size_t best = 0;
  double best_value = -1.0;
  for (std::size_t i = 0; i < menu.size(); ++i) {
    const double v = expected_successes(backlog_estimate, menu[i].opportunities());
    const bool better = v > best_value ||
                        (v == best_value && menu[i].opportunities() < menu[best].opportunities());
    if (better) {
      best = i;
      best_value = v;
    }
  }
  return menu[best];
}

void write_trace_header(std::ostream& os) {
  os << "slot,rach_channels,preambles_per_channel,repetition,idle,collided,successful,served,backlog\n";
}

void write_trace_row(std::ostream& os, std::uint64_t slot, const RachAction& a, const SlotCounts& c,
                     const SlotOutcome& o) {
  os << slot << ',' << a.rach_channels << ',' << a.preambles_per_channel << ',' << a.repetition << ','
     << c.idle << ',' << c.collided << ',' << c.successful << ',' << o.served << ',' << o.backlog << '\n';
}

}  // namespace greendrl::rach

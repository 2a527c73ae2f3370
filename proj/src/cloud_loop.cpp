#include "greendrl/cloud_loop.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <set>
#include <thread>

#include <json.hpp>

#include "greendrl/error.hpp"

namespace greendrl::cloud {

void ServiceRequest::check() const {
  if (entity_ids.empty()) throw ConfigError("a service request needs at least one entity", "cloud.entities");
  if (std::set<std::uint32_t>(entity_ids.begin(), entity_ids.end()).size() != entity_ids.size())
    throw ConfigError("entity ids must be unique", "cloud.entities");
  if (inner_steps_per_round < 1) throw ConfigError("must be >= 1", "cloud.K");
  if (algorithm.tag != "dqn") throw ConfigError("unknown DRL algorithm '" + algorithm.tag + "'", "agent");
  env.check();
  wire::NetFormat::from_bits(compression.snapshot_bits);
  const auto& h = algorithm.hyper;
  if (h.batch_size < 1) throw ConfigError("must be >= 1", "dqn.batch_size");
  if (h.replay_capacity < 1) throw ConfigError("must be >= 1", "dqn.replay_capacity");
  if (h.target_sync_every < 1) throw ConfigError("must be >= 1", "dqn.target_sync_every");
  if (!(h.learning_rate > 0.0)) throw ConfigError("must be > 0", "dqn.learning_rate");
  Discount{h.discount};
  if (env.traffic == rach::TrafficMode::External)
    for (auto id : entity_ids)
      if (!arrivals.count(id)) throw ConfigError("external traffic needs an arrival source per entity", "cloud.arrivals");
}

std::uint64_t entity_env_seed(std::uint64_t env_seed, std::size_t entity_index) {
  return derive_seed(env_seed, 1000 + entity_index);
}

MessageLedger& MessageLedger::operator+=(const MessageLedger& d) {
  rounds += d.rounds;
  bytes_down += d.bytes_down;
  bytes_up += d.bytes_up;
  for (const auto& [lag, n] : d.staleness_histogram) staleness_histogram[lag] += n;
  return *this;
}

// ---- Entity ----------------------------------------------------------------

Entity::Entity(std::uint32_t id, rach::RachConfig env_cfg, std::uint64_t explore_seed, ArrivalSource arrivals)
    : id_(id), env_(std::move(env_cfg)), explore_rng_(explore_seed), arrivals_(std::move(arrivals)) {
  state_ = env_.reset().features();
}

void Entity::install(std::span<const std::uint8_t> snapshot_bytes) {
  auto snap = wire::decode_snapshot(snapshot_bytes);
  local_ = std::move(snap.net);
  version_ = snap.version;
  epsilon_ = snap.epsilon;
}

std::vector<Transition> Entity::run_inner(std::size_t steps, std::vector<energy::Event>& events, double& reward_sum) {
  if (local_.num_layers() == 0) throw NotReady("entity has not received a parameter snapshot");
  const energy::Event inference = energy::inference(local_);
  std::vector<Transition> out;
  out.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const auto q = forward(local_, state_);
    events.push_back(inference);
    const ActionId a = epsilon_greedy(q, epsilon_, explore_rng_);
    std::optional<int> arrivals;
    if (env_.config().traffic == rach::TrafficMode::External) arrivals = arrivals_(slot_);
    auto res = env_.step(a, arrivals);
    StateVec next = res.observation.features();
    reward_sum += res.reward;
    out.push_back(Transition{state_, a, res.reward, next, false});
    state_ = std::move(next);
    ++slot_;
  }
  return out;
}

// ---- Session ---------------------------------------------------------------

Session::Session(Session&&) noexcept = default;
Session& Session::operator=(Session&&) noexcept = default;
Session::~Session() = default;

Session Session::instantiate(const ServiceRequest& req) {
  req.check();
  Session s;
  s.req_ = req;
  s.snapshot_format_ = wire::NetFormat::from_bits(req.compression.snapshot_bits);
  const auto& h = req.algorithm.hyper;

  std::vector<std::size_t> dims{3 * static_cast<std::size_t>(req.env.history_window)};
  dims.insert(dims.end(), h.hidden.begin(), h.hidden.end());
  dims.push_back(req.env.action_menu.size());
  Rng init(derive_seed(req.algorithm.seed, streams::kInit));
  s.online_ = DenseNet::glorot(dims, init);
  s.online_.input_scale = 1.0 / std::max(1, req.env.max_opportunities());
  s.target_ = sync_target(s.online_);
  s.replay_ = ReplayBuffer(h.replay_capacity);
  s.train_rng_.seed(derive_seed(req.algorithm.seed, streams::kTrain));

  for (std::size_t i = 0; i < req.entity_ids.size(); ++i) {
    const auto id = req.entity_ids[i];
    rach::RachConfig cfg = req.env;
    cfg.seed = entity_env_seed(req.env.seed, i);
    ArrivalSource src;
    if (auto it = req.arrivals.find(id); it != req.arrivals.end()) src = it->second;
    s.entities_.emplace_back(id, std::move(cfg), derive_seed(req.algorithm.seed, streams::explore(i)), std::move(src));
  }
  return s;
}

Entity& Session::entity_mut(std::uint32_t id) {
  for (auto& e : entities_)
    if (e.id() == id) return e;
  throw InvalidInput("entity " + std::to_string(id) + " is not registered in this session");
}

const Entity& Session::entity(std::uint32_t id) const { return const_cast<Session*>(this)->entity_mut(id); }

void Session::record(const energy::Event& e) {
  events_.push_back(e);
  energy_ = energy::record_event(energy_, e);
}

double Session::current_epsilon() const { return annealed_epsilon(req_.algorithm.hyper, interactions_); }

ParamSnapshot Session::publish() {
  std::lock_guard lock(*mu_);
  ParamSnapshot snap{version_, wire::encode_snapshot(online_, version_, current_epsilon(), snapshot_format_)};
  messages_.bytes_down += snap.byte_size();
  record(energy::message(snap.byte_size(), energy::Direction::Down));
  return snap;
}

RoundResult Session::outer_round(std::uint32_t entity_id) {
  Entity& ent = entity_mut(entity_id);
  const ParamSnapshot snap = publish();
  ent.install(snap.bytes);

  RoundResult res;
  std::vector<energy::Event> inference_events;
  auto transitions = ent.run_inner(req_.inner_steps_per_round, inference_events, res.reward_sum);
  wire::BatchEnvelope env{entity_id, snap.version, std::move(transitions)};
  const auto bytes = wire::encode_batch(env, req_.compression.chain_batches);
  auto decoded = wire::decode_batch(bytes);

  res.batch = SampleBatch{decoded.entity_id, decoded.snapshot_version, std::move(decoded.transitions), bytes.size()};
  res.delta.rounds = 1;
  res.delta.bytes_down = snap.byte_size();
  res.delta.bytes_up = bytes.size();

  std::lock_guard lock(*mu_);
  for (const auto& e : inference_events) record(e);
  record(energy::message(bytes.size(), energy::Direction::Up));
  messages_.rounds += 1;
  messages_.bytes_up += bytes.size();
  return res;
}

double Session::train_on_batch(const SampleBatch& batch) {
  if (batch.transitions.empty()) throw InvalidInput("sample batch must not be empty");
  std::lock_guard lock(*mu_);
  if (batch.snapshot_version > version_) throw InvalidInput("sample batch claims a future snapshot version");
  messages_.staleness_histogram[version_ - batch.snapshot_version] += 1;
  for (const auto& t : batch.transitions) replay_.push(t);
  interactions_ += batch.transitions.size();

  const auto& h = req_.algorithm.hyper;
  const std::size_t bs = std::min(h.batch_size, replay_.size());
  record(energy::train_step(online_, bs));
  auto step = dqn_train_step(std::move(online_), target_, replay_, bs, Discount{h.discount}, h.learning_rate, train_rng_);
  online_ = std::move(step.online);
  ++version_;
  ++train_steps_;
  if (train_steps_ % h.target_sync_every == 0) target_ = sync_target(online_);
  return step.loss;
}

void Session::replace_online(DenseNet net) {
  std::lock_guard lock(*mu_);
  if (net.input_dim() != online_.input_dim() || net.output_dim() != online_.output_dim())
    throw InvalidInput("replacement network changes the input/output interface");
  net.check();
  online_ = std::move(net);
  target_ = sync_target(online_);
  ++version_;
}

SessionMetrics Session::metrics() const {
  SessionMetrics m;
  m.rounds = history_;
  m.messages = messages_;
  m.energy = energy_;
  m.online = online_;
  m.target = target_;
  return m;
}

SessionMetrics Session::run_session(std::size_t rounds) {
  if (rounds < 1) throw InvalidInput("run_session needs at least one round");
  for (std::size_t r = 0; r < rounds; ++r) {
    for (const auto& ent : req_.entity_ids) {
      auto res = outer_round(ent);
      const double eps = annealed_epsilon(req_.algorithm.hyper, interactions_);
      const double loss = train_on_batch(res.batch);
      history_.push_back(RoundRecord{messages_.rounds, ent, res.batch.snapshot_version, eps,
                                     res.reward_sum / static_cast<double>(res.batch.transitions.size()), loss,
                                     energy_, messages_});
    }
  }
  return metrics();
}

SessionMetrics Session::run_concurrent(std::size_t rounds_per_entity) {
  if (rounds_per_entity < 1) throw InvalidInput("run_concurrent needs at least one round");
  std::mutex qmu;
  std::condition_variable cv;
  std::deque<std::pair<RoundResult, std::uint32_t>> queue;
  std::exception_ptr failure;

  std::vector<std::thread> workers;
  for (auto id : req_.entity_ids) {
    workers.emplace_back([&, id] {
      try {
        for (std::size_t r = 0; r < rounds_per_entity; ++r) {
          auto res = outer_round(id);
          std::lock_guard lk(qmu);
          queue.emplace_back(std::move(res), id);
          cv.notify_one();
        }
      } catch (...) {
        std::lock_guard lk(qmu);
        if (!failure) failure = std::current_exception();
        cv.notify_one();
      }
    });
  }

  const std::size_t expected = rounds_per_entity * req_.entity_ids.size();
  std::size_t trained = 0;
  while (trained < expected) {
    std::unique_lock lk(qmu);
    cv.wait(lk, [&] { return !queue.empty() || failure; });
    if (failure && queue.empty()) break;
    auto [res, id] = std::move(queue.front());
    queue.pop_front();
    lk.unlock();
    const double eps = current_epsilon();
    const double loss = train_on_batch(res.batch);
    std::lock_guard g(*mu_);
    history_.push_back(RoundRecord{history_.size() + 1, id, res.batch.snapshot_version, eps,
                                   res.reward_sum / static_cast<double>(res.batch.transitions.size()), loss, energy_,
                                   messages_});
    ++trained;
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
  return metrics();
}

std::string metrics_json(const SessionMetrics& m) {
  nlohmann::ordered_json j;
  j["rounds"] = m.messages.rounds;
  j["bytes_down"] = m.messages.bytes_down;
  j["bytes_up"] = m.messages.bytes_up;
  nlohmann::ordered_json hist = nlohmann::ordered_json::object();
  for (const auto& [lag, n] : m.messages.staleness_histogram) hist[std::to_string(lag)] = n;
  j["staleness_histogram"] = hist;
  j["energy"] = {{"macs_inference", m.energy.macs_inference}, {"macs_training", m.energy.macs_training},
                 {"mem_accesses", m.energy.mem_accesses},     {"bytes_wire", m.energy.bytes_wire},
                 {"energy_proxy", m.energy.energy_proxy()}};
  double total = 0.0;
  for (const auto& r : m.rounds) total += r.mean_reward;
  j["mean_round_reward"] = m.rounds.empty() ? 0.0 : total / static_cast<double>(m.rounds.size());
  j["online_params"] = m.online.param_count();
  return j.dump(2);
}

void write_round_csv(std::ostream& os, const std::vector<RoundRecord>& rounds) {
  os << "round,entity,snapshot_version,epsilon,mean_reward,loss,bytes_down,bytes_up,macs_inference,macs_training,"
        "mem_accesses,bytes_wire\n";
  for (const auto& r : rounds)
    os << r.round << ',' << r.entity_id << ',' << r.snapshot_version << ',' << r.epsilon << ',' << r.mean_reward << ','
       << r.loss << ',' << r.messages.bytes_down << ',' << r.messages.bytes_up << ',' << r.energy.macs_inference << ','
       << r.energy.macs_training << ',' << r.energy.mem_accesses << ',' << r.energy.bytes_wire << '\n';
}

}  // namespace greendrl::cloud

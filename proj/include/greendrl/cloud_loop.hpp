#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "greendrl/dense_net.hpp"
#include "greendrl/dqn.hpp"
#include "greendrl/energy.hpp"
#include "greendrl/rach_env.hpp"
#include "greendrl/replay.hpp"
#include "greendrl/wire.hpp"

// Cloud-side training with inference-only running entities. The coordinator
// publishes versioned parameter snapshots down; each entity runs K inner
// environment steps on its local copy and uploads the resulting sample batch.
namespace greendrl::cloud {

enum class Consumer { InfrastructureProvider, Tenant, User };

struct CompressionFlags {
  int snapshot_bits = 32;       // 32 float32, 64 float64, 2..16 quantized
  bool chain_batches = false;   // send contiguous states once
};

struct AlgorithmConfig {
  std::string tag = "dqn";
  DqnHyper hyper;
  std::uint64_t seed = 0;
};

// Supplies the external arrival count for an entity's slot (External traffic mode).
using ArrivalSource = std::function<int(std::uint64_t slot)>;

struct ServiceRequest {
  Consumer consumer = Consumer::InfrastructureProvider;
  std::vector<std::uint32_t> entity_ids;
  rach::RachConfig env;
  AlgorithmConfig algorithm;
  std::size_t inner_steps_per_round = 1;
  CompressionFlags compression;
  std::map<std::uint32_t, ArrivalSource> arrivals;  // only for External traffic

  void check() const;
};

// RNG streams derived from AlgorithmConfig::seed.
namespace streams {
inline constexpr std::uint64_t kInit = 0;
inline constexpr std::uint64_t kTrain = 1;
inline std::uint64_t explore(std::size_t entity_index) { return 16 + entity_index; }
}  // namespace streams

std::uint64_t entity_env_seed(std::uint64_t env_seed, std::size_t entity_index);

struct ParamSnapshot {
  std::uint64_t version = 0;
  std::vector<std::uint8_t> bytes;
  std::size_t byte_size() const noexcept { return bytes.size(); }
};

struct SampleBatch {
  std::uint32_t entity_id = 0;
  std::uint64_t snapshot_version = 0;
  std::vector<Transition> transitions;
  std::size_t byte_size = 0;
};

struct MessageLedger {
  std::uint64_t rounds = 0;
  std::uint64_t bytes_down = 0;
  std::uint64_t bytes_up = 0;
  std::map<std::uint64_t, std::uint64_t> staleness_histogram;

  MessageLedger& operator+=(const MessageLedger& d);
};

struct RoundResult {
  SampleBatch batch;
  MessageLedger delta;
  double reward_sum = 0.0;
};

struct RoundRecord {
  std::uint64_t round = 0;
  std::uint32_t entity_id = 0;
  std::uint64_t snapshot_version = 0;
  double epsilon = 0.0;
  double mean_reward = 0.0;
  double loss = 0.0;
  energy::Ledger energy;
  MessageLedger messages;
};

struct SessionMetrics {
  std::vector<RoundRecord> rounds;
  MessageLedger messages;
  energy::Ledger energy;
  DenseNet online;
  DenseNet target;
};

class Session;

// A running entity: environment plus an inference-only local network.
class Entity {
 public:
  Entity(std::uint32_t id, rach::RachConfig env_cfg, std::uint64_t explore_seed, ArrivalSource arrivals);

  std::uint32_t id() const noexcept { return id_; }
  const DenseNet& local_net() const noexcept { return local_; }
  std::uint64_t snapshot_version() const noexcept { return version_; }
  const rach::RachEnv& env() const noexcept { return env_; }

  void install(std::span<const std::uint8_t> snapshot_bytes);

  // K forward-pass decisions; appends one inference event per step.
  std::vector<Transition> run_inner(std::size_t steps, std::vector<energy::Event>& events, double& reward_sum);

 private:
  std::uint32_t id_;
  rach::RachEnv env_;
  Rng explore_rng_;
  ArrivalSource arrivals_;
  DenseNet local_;
  std::uint64_t version_ = 0;
  double epsilon_ = 1.0;
  std::uint64_t slot_ = 0;
  StateVec state_;
};

class Session {
 public:
  static Session instantiate(const ServiceRequest& req);

  Session(Session&&) noexcept;
  Session& operator=(Session&&) noexcept;
  ~Session();

  RoundResult outer_round(std::uint32_t entity_id);
  double train_on_batch(const SampleBatch& batch);
  SessionMetrics run_session(std::size_t rounds);

  // Entities run on their own threads; training is serialized on the caller.
  SessionMetrics run_concurrent(std::size_t rounds_per_entity);

  ParamSnapshot publish();

  const DenseNet& online() const noexcept { return online_; }
  const DenseNet& target() const noexcept { return target_; }
  // Replace the coordinator's parameters (pruning, transfer). Target follows.
  void replace_online(DenseNet net);

  std::uint64_t version() const noexcept { return version_; }
  std::size_t train_steps() const noexcept { return train_steps_; }
  std::size_t interactions() const noexcept { return interactions_; }
  double current_epsilon() const;
  const ReplayBuffer& replay() const noexcept { return replay_; }
  const MessageLedger& messages() const noexcept { return messages_; }
  const energy::Ledger& energy() const noexcept { return energy_; }
  const std::vector<energy::Event>& event_log() const noexcept { return events_; }
  const Entity& entity(std::uint32_t id) const;
  std::size_t entity_count() const noexcept { return entities_.size(); }
  const ServiceRequest& request() const noexcept { return req_; }
  const std::vector<RoundRecord>& history() const noexcept { return history_; }

 private:
  Session() = default;
  Entity& entity_mut(std::uint32_t id);
  void record(const energy::Event& e);
  SessionMetrics metrics() const;

  ServiceRequest req_;
  wire::NetFormat snapshot_format_;
  DenseNet online_;
  DenseNet target_;
  ReplayBuffer replay_{1};
  Rng train_rng_;
  std::uint64_t version_ = 0;
  std::size_t train_steps_ = 0;
  std::size_t interactions_ = 0;
  std::vector<Entity> entities_;
  MessageLedger messages_;
  energy::Ledger energy_;
  std::vector<energy::Event> events_;
  std::vector<RoundRecord> history_;
  std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
};

std::string metrics_json(const SessionMetrics& m);
void write_round_csv(std::ostream& os, const std::vector<RoundRecord>& rounds);

}  // namespace greendrl::cloud

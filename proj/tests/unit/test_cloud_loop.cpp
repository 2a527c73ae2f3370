#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "../oracles/centralized.hpp"
#include "greendrl/cloud_loop.hpp"
#include "greendrl/error.hpp"

using namespace greendrl;
using namespace greendrl::cloud;

namespace {

ServiceRequest request(std::vector<std::uint32_t> ids, std::size_t K = 1, int bits = 32) {
  ServiceRequest r;
  r.entity_ids = std::move(ids);
  r.env.num_devices = 30;
  r.env.action_menu = {{1, 12, 4}, {1, 16, 3}, {2, 12, 2}, {4, 12, 1}};
  r.env.history_window = 4;
  r.env.arrival_prob = 0.2;
  r.env.seed = 5;
  r.algorithm.seed = 9;
  r.algorithm.hyper.hidden = {16};
  r.algorithm.hyper.batch_size = 8;
  r.algorithm.hyper.replay_capacity = 500;
  r.algorithm.hyper.target_sync_every = 20;
  r.algorithm.hyper.epsilon_decay_steps = 300;
  r.inner_steps_per_round = K;
  r.compression.snapshot_bits = bits;
  return r;
}

}  // namespace

TEST_CASE("instantiate") {
  auto s = Session::instantiate(request({1, 2}));
  CHECK(s.entity_count() == 2);
  CHECK(s.version() == 0);
  CHECK(s.online().layer_dims() == std::vector<std::size_t>{12, 16, 4});
  CHECK(s.entity(1).snapshot_version() == 0);
  CHECK_THROWS_AS(s.entity(3), InvalidInput);
  CHECK_THROWS_AS(Session::instantiate(request({})), ConfigError);
  CHECK_THROWS_AS(Session::instantiate(request({1, 1})), ConfigError);
  auto bad = request({1});
  bad.algorithm.tag = "ppo";
  CHECK_THROWS_AS(Session::instantiate(bad), ConfigError);
  CHECK_THROWS_AS(Session::instantiate(request({1}, 0)), ConfigError);
  CHECK_THROWS(Session::instantiate(request({1}, 1, 1)));
}

TEST_CASE("outer round returns K transitions and charges the encoded sizes") {
  auto s = Session::instantiate(request({4}, 3));
  const auto snap_bytes = wire::snapshot_bytes(s.online(), wire::NetFormat::from_bits(32));
  CHECK(snap_bytes == wire::snapshot_header_bytes(3) + 4 * s.online().param_count());
  const auto r = s.outer_round(4);
  CHECK(r.batch.transitions.size() == 3);
  CHECK(r.batch.entity_id == 4);
  CHECK(r.batch.snapshot_version == 0);
  CHECK(r.delta.bytes_down == snap_bytes);
  CHECK(r.delta.bytes_up == wire::batch_bytes(3, 12, false));
  CHECK(r.batch.byte_size == r.delta.bytes_up);
  CHECK(s.energy().macs_inference == 3 * energy::macs_forward(s.online()));
  CHECK(s.entity(4).snapshot_version() == 0);
  CHECK_THROWS_AS(s.outer_round(7), InvalidInput);
}

TEST_CASE("greedy entity decisions replay from the snapshot they used") {
  auto req = request({0}, 5);
  req.algorithm.hyper.epsilon_start = 0.0;
  req.algorithm.hyper.epsilon_end = 0.0;
  auto s = Session::instantiate(req);
  for (int round = 0; round < 20; ++round) {
    const auto r = s.outer_round(0);
    const auto snap = wire::decode_snapshot(wire::encode_snapshot(s.online(), s.version(), 0.0, wire::NetFormat::from_bits(32)));
    CHECK(s.entity(0).local_net() == snap.net);
    for (const auto& t : r.batch.transitions) CHECK(t.action == argmax(forward(snap.net, t.state)));
    s.train_on_batch(r.batch);
  }
}

TEST_CASE("sequential sessions have zero staleness; training bumps the version") {
  auto s = Session::instantiate(request({1, 2}));
  const auto m = s.run_session(10);
  CHECK(m.messages.rounds == 20);
  CHECK(m.rounds.size() == 20);
  CHECK(s.version() == 20);
  CHECK(m.messages.staleness_histogram.size() == 1);
  CHECK(m.messages.staleness_histogram.at(0) == 20);
  CHECK(energy::replay(s.event_log(), s.energy().coefficients) == s.energy());
  CHECK(m.energy.bytes_wire == m.messages.bytes_down + m.messages.bytes_up);
}

TEST_CASE("stale batches are recorded with their lag; future versions are rejected") {
  auto s = Session::instantiate(request({1}));
  auto old = s.outer_round(1);
  s.train_on_batch(s.outer_round(1).batch);
  s.train_on_batch(s.outer_round(1).batch);
  s.train_on_batch(old.batch);
  CHECK(s.messages().staleness_histogram.at(2) == 1);
  SampleBatch future = old.batch;
  future.snapshot_version = 99;
  CHECK_THROWS_AS(s.train_on_batch(future), InvalidInput);
  CHECK_THROWS_AS(s.train_on_batch(SampleBatch{}), InvalidInput);
}

TEST_CASE("one entity, K = 1, float64 matches a centralized loop step for step") {
  auto req = request({0}, 1, 64);
  req.algorithm.hyper.batch_size = 4;
  const std::size_t steps = 400;
  const auto oracle_trace = oracle::centralized_dqn(req, steps);
  auto s = Session::instantiate(req);
  for (std::size_t t = 0; t < steps; ++t) {
    auto r = s.outer_round(0);
    REQUIRE(r.batch.transitions.size() == 1);
    CHECK(r.batch.transitions[0].action == oracle_trace.actions[t]);
    CHECK(r.batch.transitions[0].reward == oracle_trace.rewards[t]);
    s.train_on_batch(r.batch);
  }
  CHECK(s.online() == oracle_trace.online);
}

TEST_CASE("larger K sends fewer bytes per environment slot") {
  double prev = 1e300;
  for (std::size_t K : {1, 4, 16}) {
    auto s = Session::instantiate(request({0}, K));
    const auto m = s.run_session(64 / K);
    const double per_slot = static_cast<double>(m.messages.bytes_down + m.messages.bytes_up) / 64.0;
    CHECK(per_slot < prev);
    prev = per_slot;
  }
}

TEST_CASE("8-bit snapshots are about a quarter of float32") {
  auto ra = request({0}, 1, 32), rb = request({0}, 1, 8);
  ra.algorithm.hyper.hidden = rb.algorithm.hyper.hidden = {32, 32};
  auto a = Session::instantiate(ra);
  auto b = Session::instantiate(rb);
  const double r = static_cast<double>(b.publish().byte_size()) / static_cast<double>(a.publish().byte_size());
  CHECK(r > 0.2);
  CHECK(r < 0.3);
}

TEST_CASE("chained batches shrink uploads") {
  auto a = request({0}, 8);
  auto b = a;
  b.compression.chain_batches = true;
  auto sa = Session::instantiate(a), sb = Session::instantiate(b);
  CHECK(sb.outer_round(0).delta.bytes_up < sa.outer_round(0).delta.bytes_up);
}

TEST_CASE("concurrent mode trains every batch") {
  auto s = Session::instantiate(request({1, 2, 3}, 2));
  const auto m = s.run_concurrent(15);
  CHECK(m.rounds.size() == 45);
  CHECK(m.messages.rounds == 45);
  CHECK(s.train_steps() == 45);
  std::uint64_t lagged = 0;
  for (const auto& [lag, n] : m.messages.staleness_histogram) lagged += n;
  CHECK(lagged == 45);
  CHECK(energy::replay(s.event_log(), s.energy().coefficients) == s.energy());
}

TEST_CASE("replace_online keeps the interface") {
  auto s = Session::instantiate(request({0}));
  Rng rng(1);
  CHECK_THROWS_AS(s.replace_online(DenseNet::glorot({5, 4}, rng)), InvalidInput);
  auto net = s.online();
  net.weights(0)[0] = 0.0;
  s.replace_online(net);
  CHECK(s.online() == net);
  CHECK(s.target() == net);
  CHECK(s.version() == 1);
}

TEST_CASE("round csv") {
  auto s = Session::instantiate(request({0}));
  const auto m = s.run_session(2);
  std::ostringstream os;
  write_round_csv(os, m.rounds);
  const auto csv = os.str();
  CHECK(csv.rfind("round,entity,snapshot_version,epsilon,mean_reward,loss,bytes_down,bytes_up,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(metrics_json(m).find("\"rounds\": 2") != std::string::npos);
}

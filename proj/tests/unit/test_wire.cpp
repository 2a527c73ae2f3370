#include <doctest.h>

#include <cmath>
#include <vector>

#include "greendrl/compression.hpp"
#include "greendrl/error.hpp"
#include "greendrl/wire.hpp"

using namespace greendrl;
using namespace greendrl::wire;

namespace {

DenseNet rach_net(std::uint64_t seed) {
  Rng rng(seed);
  auto net = DenseNet::glorot({12, 32, 32, 4}, rng);
  for (std::size_t l = 0; l < net.num_layers(); ++l)
    for (double& b : net.biases(l)) b = 0.05 * (uniform01(rng) - 0.5);
  net.input_scale = 1.0 / 48.0;
  return net;
}

std::vector<Transition> chain(std::size_t n, std::size_t dim, Rng& rng) {
  std::vector<Transition> out;
  StateVec s(dim);
  for (auto& x : s) x = static_cast<double>(uniform_index(rng, 30));
  for (std::size_t i = 0; i < n; ++i) {
    StateVec s2(dim);
    for (auto& x : s2) x = static_cast<double>(uniform_index(rng, 30));
    out.push_back({s, ActionId{uniform_index(rng, 4)}, static_cast<double>(uniform_index(rng, 9)), s2, false});
    s = s2;
  }
  return out;
}

}  // namespace

TEST_CASE("snapshot byte accounting") {
  const auto net = rach_net(1);
  const std::size_t params = 12 * 32 + 32 + 32 * 32 + 32 + 32 * 4 + 4;
  CHECK(net.param_count() == params);
  CHECK(snapshot_header_bytes(4) == 36 + 16);
  CHECK(snapshot_bytes(net, NetFormat::from_bits(32)) == 52 + 4 * params);
  CHECK(snapshot_bytes(net, NetFormat::from_bits(64)) == 52 + 8 * params);
  for (int bits : {32, 64, 16, 8, 4, 2}) {
    const auto fmt = NetFormat::from_bits(bits);
    CHECK(encode_snapshot(net, 3, 0.5, fmt).size() == snapshot_bytes(net, fmt));
  }
  CHECK_THROWS(NetFormat::from_bits(1));
  CHECK_THROWS(NetFormat::from_bits(17));
}

TEST_CASE("snapshot sizes strictly decrease over 32, 8, 4, 2 bits") {
  const auto net = rach_net(2);
  std::size_t prev = snapshot_bytes(net, NetFormat::from_bits(32));
  for (int bits : {8, 4, 2}) {
    const auto n = snapshot_bytes(net, NetFormat::from_bits(bits));
    CHECK(n < prev);
    prev = n;
  }
}

TEST_CASE("8-bit snapshot is at most 30% of float32 (header included)") {
  const auto net = rach_net(3);
  const double ratio = static_cast<double>(snapshot_bytes(net, NetFormat::from_bits(8))) /
                       static_cast<double>(snapshot_bytes(net, NetFormat::from_bits(32)));
  CHECK(ratio <= 0.30);
}

TEST_CASE("float64 snapshots round-trip exactly") {
  const auto net = rach_net(4);
  const auto bytes = encode_snapshot(net, 17, 0.25, NetFormat::from_bits(64));
  const auto d = decode_snapshot(bytes);
  CHECK(d.version == 17);
  CHECK(d.epsilon == 0.25);
  CHECK(d.net == net);
}

TEST_CASE("float32 snapshots round through float") {
  const auto net = rach_net(5);
  const auto d = decode_snapshot(encode_snapshot(net, 1, 0.0, NetFormat::from_bits(32)));
  CHECK(d.format.encoding == NetEncoding::Float32);
  CHECK(d.net.input_scale == net.input_scale);
  for (std::size_t l = 0; l < net.num_layers(); ++l)
    for (std::size_t i = 0; i < net.weights(l).size(); ++i)
      CHECK(d.net.weights(l)[i] == static_cast<double>(static_cast<float>(net.weights(l)[i])));
}

TEST_CASE("quantized snapshots stay within half a step and re-encode identically") {
  const auto net = rach_net(6);
  for (int bits : {16, 8, 4, 2}) {
    const auto fmt = NetFormat::from_bits(bits);
    const auto d = decode_snapshot(encode_snapshot(net, 1, 0.0, fmt));
    REQUIRE(d.net.quant);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      const double scale = d.net.quant->scale[l];
      double maxw = 0.0;
      for (double w : net.weights(l)) maxw = std::max(maxw, std::abs(w));
      CHECK(scale == doctest::Approx(maxw / max_code(bits)));
      for (std::size_t i = 0; i < net.weights(l).size(); ++i)
        CHECK(std::abs(d.net.weights(l)[i] - net.weights(l)[i]) <= scale / 2 * (1 + 1e-12));
    }
    // Decoding and re-encoding at the same bits is byte-stable.
    const auto again = encode_snapshot(d.net, 1, 0.0, fmt);
    CHECK(again == encode_snapshot(decode_snapshot(again).net, 1, 0.0, fmt));
    CHECK(decode_snapshot(again).net == d.net);
  }
}

TEST_CASE("malformed snapshots are rejected") {
  const auto net = rach_net(7);
  auto bytes = encode_snapshot(net, 1, 0.0, NetFormat::from_bits(32));
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_snapshot(truncated), InvalidInput);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_snapshot(trailing), InvalidInput);
  auto bad_magic = bytes;
  bad_magic[0] ^= 0xFF;
  CHECK_THROWS_AS(decode_snapshot(bad_magic), InvalidInput);
}

TEST_CASE("batch byte accounting and round trip") {
  Rng rng(8);
  const std::size_t d = 12;
  CHECK(batch_bytes(4, d, false) == kBatchHeaderBytes + 4 * (8 * d + 9));
  CHECK(batch_bytes(4, d, true) == kBatchHeaderBytes + 4 * d + 4 * (4 * d + 9));

  BatchEnvelope env{3, 9, chain(4, d, rng)};
  const auto full = encode_batch(env, false);
  const auto chained = encode_batch(env, true);
  CHECK(full.size() == batch_bytes(4, d, false));
  CHECK(chained.size() == batch_bytes(4, d, true));
  CHECK(chained.size() < full.size());
  for (const auto& bytes : {full, chained}) {
    const auto back = decode_batch(bytes);
    CHECK(back.entity_id == 3);
    CHECK(back.snapshot_version == 9);
    REQUIRE(back.transitions.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(back.transitions[i].state == env.transitions[i].state);
      CHECK(back.transitions[i].next_state == env.transitions[i].next_state);
      CHECK(back.transitions[i].action == env.transitions[i].action);
      CHECK(back.transitions[i].reward == env.transitions[i].reward);
      CHECK(back.transitions[i].terminal == env.transitions[i].terminal);
    }
  }
}

TEST_CASE("chaining falls back to full records when the batch is not contiguous") {
  Rng rng(9);
  BatchEnvelope env{0, 0, chain(3, 6, rng)};
  env.transitions[1].state[0] += 1.0;
  const auto bytes = encode_batch(env, true);
  CHECK(bytes.size() == batch_bytes(3, 6, false));
  CHECK(decode_batch(bytes).transitions[1].state == env.transitions[1].state);
  CHECK_THROWS_AS(encode_batch(BatchEnvelope{}, true), InvalidInput);
}

#include <doctest.h>

#include <cmath>
#include <vector>

#include "greendrl/dense_net.hpp"
#include "greendrl/error.hpp"

using namespace greendrl;

namespace {

TrainingSample sample(std::vector<double> in, std::vector<double> target, std::vector<std::uint8_t> mask) {
  return {std::move(in), std::move(target), std::move(mask)};
}

std::vector<TrainingSample> random_batch(const DenseNet& net, std::size_t n, Rng& rng) {
  std::vector<TrainingSample> batch;
  for (std::size_t i = 0; i < n; ++i) {
    TrainingSample s;
    for (std::size_t k = 0; k < net.input_dim(); ++k) s.input.push_back(uniform01(rng) * 2.0 - 1.0);
    for (std::size_t k = 0; k < net.output_dim(); ++k) s.target.push_back(uniform01(rng) * 2.0 - 1.0);
    s.output_mask.assign(net.output_dim(), 0);
    s.output_mask[uniform_index(rng, net.output_dim())] = 1;
    batch.push_back(std::move(s));
  }
  return batch;
}

}  // namespace

TEST_CASE("forward examples") {
  DenseNet zero({3, 4, 2});
  for (double v : forward(zero, std::vector<double>{1, 2, 3})) CHECK(v == 0.0);

  DenseNet id({3, 3});
  for (std::size_t i = 0; i < 3; ++i) id.weights(0)[i * 3 + i] = 1.0;
  const std::vector<double> x{0.5, -2.0, 7.0};
  CHECK(forward(id, x) == x);

  // 2-2-1: h = relu([1 -1; 2 1] x + [0; -1]), y = [1 2] h + 0.5
  DenseNet n({2, 2, 1});
  const double w0[] = {1, -1, 2, 1};
  for (int i = 0; i < 4; ++i) n.weights(0)[i] = w0[i];
  n.biases(0)[1] = -1;
  n.weights(1)[0] = 1;
  n.weights(1)[1] = 2;
  n.biases(1)[0] = 0.5;
  // x = (1, 3): pre = (-2, 4), h = (0, 4), y = 8.5
  CHECK(forward(n, std::vector<double>{1, 3})[0] == doctest::Approx(8.5));
  // x = (2, 1): pre = (1, 4), h = (1, 4), y = 9.5
  CHECK(forward(n, std::vector<double>{2, 1})[0] == doctest::Approx(9.5));

  CHECK_THROWS_AS(forward(n, std::vector<double>{1}), InvalidInput);
}

TEST_CASE("input_scale multiplies raw inputs") {
  DenseNet id({2, 2});
  id.weights(0)[0] = 1.0;
  id.weights(0)[3] = 1.0;
  id.input_scale = 0.25;
  const auto y = forward(id, std::vector<double>{4.0, 8.0});
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 2.0);
}

TEST_CASE("glorot init respects the bound and is seeded") {
  Rng a(1), b(1);
  const auto n1 = DenseNet::glorot({12, 32, 4}, a);
  const auto n2 = DenseNet::glorot({12, 32, 4}, b);
  CHECK(n1 == n2);
  CHECK(fingerprint(n1) == fingerprint(n2));
  const double bound0 = std::sqrt(6.0 / (12 + 32));
  for (double w : n1.weights(0)) CHECK(std::abs(w) <= bound0);
  for (double v : n1.biases(0)) CHECK(v == 0.0);
}

TEST_CASE("masked weights contribute nothing and stay zero") {
  Rng rng(3);
  auto net = DenseNet::glorot({4, 6, 3}, rng);
  std::vector<std::uint8_t> keep(net.weights(0).size(), 1);
  for (std::size_t i = 0; i < keep.size(); i += 2) keep[i] = 0;
  net.set_mask(0, keep);
  for (std::size_t i = 0; i < keep.size(); ++i)
    if (!keep[i]) CHECK(net.weights(0)[i] == 0.0);
  auto batch = random_batch(net, 8, rng);
  for (int step = 0; step < 50; ++step) {
    auto g = backprop_minibatch(net, batch);
    for (std::size_t i = 0; i < keep.size(); ++i)
      if (!keep[i]) CHECK(g.weights[0][i] == 0.0);
    net = sgd_step(net, g, 0.05);
  }
  for (std::size_t i = 0; i < keep.size(); ++i)
    if (!keep[i]) CHECK(net.weights(0)[i] == 0.0);
}

TEST_CASE("backprop examples") {
  SUBCASE("exact fit gives zero gradients") {
    DenseNet n({2, 1});
    n.weights(0)[0] = 1.0;
    n.weights(0)[1] = -1.0;
    const std::vector<TrainingSample> batch{sample({3, 1}, {2}, {1})};
    auto g = backprop_minibatch(n, batch);
    for (double v : g.weights[0]) CHECK(v == 0.0);
    CHECK(g.biases[0][0] == 0.0);
    CHECK(g.loss == 0.0);
  }
  SUBCASE("single linear neuron: dL/dw = 2(wx+b-y)x") {
    DenseNet n({1, 1});
    n.weights(0)[0] = 0.5;
    n.biases(0)[0] = 0.25;
    const double x = 2.0, y = 3.0;
    const std::vector<TrainingSample> batch{sample({x}, {y}, {1})};
    auto g = backprop_minibatch(n, batch);
    const double err = 0.5 * x + 0.25 - y;
    CHECK(g.weights[0][0] == doctest::Approx(2 * err * x));
    CHECK(g.biases[0][0] == doctest::Approx(2 * err));
    CHECK(g.loss == doctest::Approx(err * err));
  }
  SUBCASE("unmasked outputs carry no gradient") {
    DenseNet n({1, 2});
    n.weights(0)[0] = 1.0;
    n.weights(0)[1] = 1.0;
    const std::vector<TrainingSample> batch{sample({1}, {0, 0}, {0, 1})};
    auto g = backprop_minibatch(n, batch);
    CHECK(g.weights[0][0] == 0.0);
    CHECK(g.weights[0][1] != 0.0);
  }
  CHECK_THROWS_AS(backprop_minibatch(DenseNet({1, 1}), std::vector<TrainingSample>{}), InvalidInput);
}

TEST_CASE("backprop matches central finite differences on random nets") {
  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> dims{1 + uniform_index(rng, 6)};
    const auto hidden = 1 + uniform_index(rng, 2);
    for (std::size_t h = 0; h < hidden; ++h) dims.push_back(2 + uniform_index(rng, 10));
    dims.push_back(1 + uniform_index(rng, 4));
    auto net = DenseNet::glorot(dims, rng);
    for (std::size_t l = 0; l < net.num_layers(); ++l)
      for (double& b : net.biases(l)) b = 0.1 * (uniform01(rng) - 0.5);
    const auto batch = random_batch(net, 4, rng);
    const auto g = backprop_minibatch(net, batch);
    const double h = 1e-5;
    for (std::size_t l = 0; l < net.num_layers(); ++l)
      for (std::size_t i = 0; i < net.weights(l).size(); ++i) {
        auto plus = net, minus = net;
        plus.weights(l)[i] += h;
        minus.weights(l)[i] -= h;
        const double fd = (minibatch_loss(plus, batch) - minibatch_loss(minus, batch)) / (2 * h);
        const double rel = std::abs(fd - g.weights[l][i]) / std::max({std::abs(fd), std::abs(g.weights[l][i]), 1e-6});
        worst = std::max(worst, rel);
      }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("sgd_step examples") {
  Rng rng(5);
  auto net = DenseNet::glorot({3, 4, 2}, rng);
  GradientBatch zero;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    zero.weights.emplace_back(net.weights(l).size(), 0.0);
    zero.biases.emplace_back(net.biases(l).size(), 0.0);
  }
  CHECK(sgd_step(net, zero, 0.1) == net);

  GradientBatch self = zero;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    self.weights[l].assign(net.weights(l).begin(), net.weights(l).end());
    self.biases[l].assign(net.biases(l).begin(), net.biases(l).end());
  }
  const auto cleared = sgd_step(net, self, 1.0);
  for (std::size_t l = 0; l < cleared.num_layers(); ++l)
    for (double w : cleared.weights(l)) CHECK(w == 0.0);

  const auto batch = random_batch(net, 5, rng);
  const auto g = backprop_minibatch(net, batch);
  const auto twice = sgd_step(sgd_step(net, g, 0.1), g, 0.1);
  GradientBatch doubled = g;
  for (auto& layer : doubled.weights)
    for (double& v : layer) v *= 2.0;
  for (auto& layer : doubled.biases)
    for (double& v : layer) v *= 2.0;
  const auto once = sgd_step(net, doubled, 0.1);
  for (std::size_t l = 0; l < net.num_layers(); ++l)
    for (std::size_t i = 0; i < net.weights(l).size(); ++i)
      CHECK(twice.weights(l)[i] == doctest::Approx(once.weights(l)[i]).epsilon(1e-12));

  GradientBatch wrong = zero;
  wrong.weights.pop_back();
  CHECK_THROWS_AS(sgd_step(net, wrong, 0.1), InvalidInput);
  CHECK_THROWS_AS(sgd_step(net, zero, 0.0), InvalidInput);
}

TEST_CASE("sync_target returns an independent copy") {
  Rng rng(9);
  auto online = DenseNet::glorot({4, 8, 3}, rng);
  const auto target = sync_target(online);
  const std::vector<double> s{0.1, 0.2, 0.3, 0.4};
  CHECK(forward(target, s) == forward(online, s));
  const auto before = forward(target, s);
  online.weights(0)[0] += 1.0;
  CHECK(forward(target, s) == before);
  CHECK(sync_target(sync_target(target)) == target);
}

TEST_CASE("check rejects broken invariants") {
  DenseNet n({2, 2});
  n.weights(0)[0] = std::nan("");
  CHECK_THROWS_AS(n.check(), InvalidInput);
  CHECK_THROWS_AS(DenseNet({3}), InvalidInput);
  DenseNet m({2, 2});
  CHECK_THROWS_AS(m.set_mask(0, std::vector<std::uint8_t>(3, 1)), InvalidInput);
}

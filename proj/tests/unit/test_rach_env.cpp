#include <doctest.h>

#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "greendrl/error.hpp"
#include "greendrl/rach_env.hpp"

using namespace greendrl;
using namespace greendrl::rach;

namespace {

RachConfig small_config(std::uint64_t seed = 1) {
  RachConfig c;
  c.num_devices = 30;
  c.action_menu = {{1, 12, 4}, {1, 16, 3}, {2, 12, 2}, {4, 12, 1}};
  c.history_window = 3;
  c.arrival_prob = 0.2;
  c.backoff_slots = 4;
  c.seed = seed;
  return c;
}

// Expected singleton count by brute force over all m^n assignments.
double enumerate_successes(int n, int m) {
  std::vector<int> choice(static_cast<std::size_t>(n), 0);
  double total = 0.0, count = 0.0;
  std::function<void(int)> rec = [&](int i) {
    if (i == n) {
      total += resolve_preambles(choice, m).successful;
      count += 1.0;
      return;
    }
    for (int c = 0; c < m; ++c) {
      choice[static_cast<std::size_t>(i)] = c;
      rec(i + 1);
    }
  };
  rec(0);
  return total / count;
}

}  // namespace

TEST_CASE("reset gives zero backlog and a zero-filled window") {
  RachEnv env(small_config());
  const auto obs = env.reset();
  CHECK(env.backlog() == 0);
  CHECK(obs.window.size() == 3);
  for (double f : obs.features()) CHECK(f == 0.0);
  CHECK(env.state_dim() == 9);
}

TEST_CASE("identical seeds and actions give identical trajectories") {
  RachEnv a(small_config(7)), b(small_config(7));
  for (int t = 0; t < 200; ++t) {
    const ActionId act{static_cast<std::size_t>(t % 4)};
    const auto ra = a.step(act), rb = b.step(act);
    CHECK(ra.reward == rb.reward);
    CHECK(ra.observation.features() == rb.observation.features());
  }
  a.reset();
  RachEnv c(small_config(7));
  CHECK(a.step(ActionId{0}).reward == c.step(ActionId{0}).reward);
}

TEST_CASE("counts sum to opportunities and devices are conserved") {
  RachEnv env(small_config(3));
  int prev_backlog = 0;
  for (int t = 0; t < 2000; ++t) {
    const auto& a = env.config().action_menu[static_cast<std::size_t>(t % 4)];
    const auto r = env.step(a);
    const auto& c = r.observation.latest();
    CHECK(c.idle + c.collided + c.successful == a.opportunities());
    CHECK(c.idle >= 0);
    CHECK(c.collided >= 0);
    CHECK(c.successful >= 0);
    CHECK(r.outcome.backlog == prev_backlog + r.outcome.arrivals - r.outcome.served);
    CHECK(r.outcome.backlog >= 0);
    CHECK(r.outcome.backlog <= env.config().num_devices);
    CHECK(r.reward == r.outcome.served);
    int occ = 0;
    for (int k : r.outcome.occupancy) occ += k;
    CHECK(occ == r.outcome.attempts);
    prev_backlog = r.outcome.backlog;
  }
}

TEST_CASE("resolve_preambles examples") {
  CHECK(resolve_preambles(std::vector<int>{}, 4) == SlotCounts{4, 0, 0});
  CHECK(resolve_preambles(std::vector<int>{0, 1, 2}, 4) == SlotCounts{1, 0, 3});
  CHECK(resolve_preambles(std::vector<int>{1, 1, 1}, 2) == SlotCounts{1, 1, 0});
  CHECK(resolve_preambles(std::vector<int>{0, 0, 1, 2, 2, 3}, 5) == SlotCounts{1, 2, 2});
  CHECK_THROWS_AS(resolve_preambles(std::vector<int>{4}, 4), InvalidInput);
  CHECK_THROWS_AS(resolve_preambles(std::vector<int>{}, 0), InvalidInput);
}

TEST_CASE("singleton expectation matches exhaustive enumeration") {
  for (int n = 0; n <= 6; ++n)
    for (int m = 1; m <= 6; ++m) {
      if (std::pow(m, n) > 50000) continue;
      CHECK(expected_successes(n, m) == doctest::Approx(enumerate_successes(n, m)).epsilon(1e-12));
    }
}

TEST_CASE("singleton expectation matches Monte Carlo for 10 devices on 12 preambles") {
  Rng rng(99);
  const int trials = 200000;
  double total = 0.0;
  std::vector<int> choice(10);
  for (int t = 0; t < trials; ++t) {
    for (int& c : choice) c = static_cast<int>(uniform_index(rng, 12));
    total += resolve_preambles(choice, 12).successful;
  }
  const double analytic = 10.0 * std::pow(11.0 / 12.0, 9);
  CHECK(total / trials == doctest::Approx(analytic).epsilon(0.01));
}

TEST_CASE("le_urc_policy examples") {
  const std::vector<RachAction> menu{{1, 12, 4}, {1, 16, 3}, {2, 12, 2}, {4, 12, 1}};
  SlotObservation quiet{{SlotCounts{12, 0, 0}}};
  // Estimate clamps to one device; every menu entry gives one success, so fewest opportunities wins.
  CHECK(le_urc_policy(quiet, menu) == menu[0]);
  SlotObservation busy{{SlotCounts{0, 20, 4}}};
  CHECK(le_urc_policy(busy, menu) == menu[3]);
  SlotObservation mid{{SlotCounts{10, 4, 2}}};
  // With more than one estimated device the expectation grows with opportunities.
  CHECK(expected_successes(11.56, 48) > expected_successes(11.56, 24));
  CHECK(le_urc_policy(mid, menu) == menu[3]);
  const std::vector<RachAction> narrow{{1, 12, 4}, {1, 16, 3}};
  CHECK(le_urc_policy(mid, narrow) == narrow[1]);
  CHECK_THROWS_AS(le_urc_policy(mid, std::vector<RachAction>{}), InvalidInput);
}

TEST_CASE("external traffic mode") {
  auto cfg = small_config();
  cfg.traffic = TrafficMode::External;
  RachEnv env(cfg);
  CHECK_THROWS_AS(env.step(ActionId{0}), InvalidInput);
  CHECK_THROWS_AS(env.step(ActionId{0}, -1), InvalidInput);
  const auto r = env.step(ActionId{0}, 1000);
  CHECK(r.outcome.arrivals == 30);
}

TEST_CASE("invalid configs and actions") {
  auto cfg = small_config();
  cfg.action_menu.clear();
  CHECK_THROWS_AS(RachEnv{cfg}, ConfigError);
  cfg = small_config();
  cfg.arrival_prob = 1.5;
  CHECK_THROWS_AS(RachEnv{cfg}, ConfigError);
  cfg = small_config();
  cfg.history_window = 0;
  CHECK_THROWS_AS(RachEnv{cfg}, ConfigError);
  RachEnv env(small_config());
  CHECK_THROWS_AS(env.step(ActionId{4}), InvalidInput);
  CHECK_THROWS_AS(env.step(RachAction{3, 3, 3}), InvalidInput);
  CHECK_THROWS_AS(env.set_backlog(31), InvalidInput);
}

TEST_CASE("trace csv") {
  std::ostringstream os;
  write_trace_header(os);
  write_trace_row(os, 5, {1, 12, 4}, {3, 2, 7}, SlotOutcome{7, 11, 2, 9, {}});
  CHECK(os.str() == "slot,rach_channels,preambles_per_channel,repetition,idle,collided,successful,served,backlog\n"
                    "5,1,12,4,3,2,7,7,11\n");
}

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "greendrl/agents.hpp"
#include "greendrl/cloud_loop.hpp"
#include "greendrl/compression.hpp"
#include "greendrl/energy.hpp"
#include "greendrl/rach_env.hpp"
#include "greendrl/spatial.hpp"

namespace greendrl::harness {

using Json = nlohmann::ordered_json;

// Every accepted key with its default; user configs are merged onto this and
// any key not present here is rejected.
Json default_config();

struct SpatialScenario {
  std::size_t sites = 16;
  double spacing = 1.0;
  double kernel_amplitude = 0.2112;
  double kernel_length_scale = 2.0;
  double noise_sigma = 0.2;
  spatial::Distortion distortion = spatial::Distortion::Identity;
  double base_rate = 3.0;
  std::vector<std::size_t> stations{7, 8};
  bool transfer = true;
  std::size_t transfer_every = 50;
  double beta = 0.5;
  std::size_t warmup_slots = 2000;
  std::size_t field_log_every = 0;  // 0 disables field.csv
  std::size_t eval_every = 25;      // rounds between greedy evaluations on the held-out trace
};

struct ExperimentConfig {
  std::string scenario = "rach";
  agents::AgentKind agent = agents::AgentKind::Dqn;
  std::vector<std::uint64_t> seeds{1};
  std::size_t rounds = 1250;
  std::size_t eval_slots = 2000;
  std::string output_dir = "out";
  rach::RachConfig rach;
  std::size_t inner_steps = 4;
  std::size_t entities = 1;
  bool concurrent = false;
  DqnHyper dqn;
  double local_alpha = 0.01;
  int tabular_levels = 3;
  cloud::CompressionFlags compression;
  double prune_sparsity = 0.0;
  std::size_t prune_at_round = 0;  // 0 never prunes
  energy::Coefficients coefficients;
  SpatialScenario spatial;
  double threshold_reward = 0.0;   // rounds-to-threshold target (served/slot); 0 disables
  std::size_t moving_window = 20;  // rounds in the moving average for rounds-to-threshold
  double tail_fraction = 0.2;      // share of final rounds averaged into tail_reward

  Json source;              // normalized (defaults merged) config
  std::string config_hash;  // FNV-1a of source
};

ExperimentConfig parse_config(const Json& user);
ExperimentConfig load_config(const std::filesystem::path& path);

// Replace the value at a dotted path ("cloud.K"); ConfigError if the path does not resolve.
Json set_path(Json config, const std::string& path, const Json& value);

// Greedy evaluation of one station's deployed net after `round` rounds.
struct EvalPoint {
  std::size_t round = 0;
  std::size_t station = 0;
  double reward = 0.0;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string agent;
  std::vector<cloud::RoundRecord> rounds;
  double eval_reward = 0.0;
  double tail_reward = 0.0;
  double rounds_to_threshold = 0.0;
  energy::Ledger energy;
  cloud::MessageLedger messages;
  std::size_t snapshot_bytes = 0;
  std::size_t interactions = 0;
  std::optional<SparsityReport> sparsity;
  std::optional<double> station_correlation;
  std::optional<spatial::KernelFit> kernel_fit;
  std::vector<EvalPoint> eval_curve;  // spatial scenario only
  bool ledger_reconciles = true;
};

// First round whose trailing `window`-round mean reaches `threshold`; the
// series length when it never does.
double rounds_to_threshold(const std::vector<double>& per_round, std::size_t window, double threshold);

// First evaluated round at which `station` reaches `threshold`; the last
// evaluated round when it never does.
double eval_rounds_to_threshold(const std::vector<EvalPoint>& curve, std::size_t station, double threshold);

// One seed, no file output.
RunRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

std::filesystem::path output_root();  // GREENDRL_OUTPUT_ROOT or the working directory
std::filesystem::path run_directory(const ExperimentConfig& cfg, std::uint64_t seed);

// Runs every seed (in parallel when OpenMP has threads) and, when requested,
// writes rounds.csv, summary.json and config.json per seed.
std::vector<RunRecord> run(const ExperimentConfig& cfg, bool write_outputs = true);

Json summary_json(const RunRecord& r);

struct AgentSummary {
  std::string agent;
  std::vector<double> eval_rewards;  // per seed, seed order of the config
  double mean_eval = 0.0;
  double ci95 = 0.0;
  double mean_rounds_to_threshold = 0.0;
};

struct PairwiseResult {
  std::string better;
  std::string worse;
  double mean_difference = 0.0;
  double p_value = 1.0;  // one-sided paired t-test, H1: better > worse
};

struct OrderingReport {
  std::vector<AgentSummary> ranking;  // best first
  std::vector<PairwiseResult> adjacent;
  double threshold = 0.0;
};

// Configs must share scenario, environment, rounds and seeds (InvalidInput otherwise).
OrderingReport compare_agents(const std::vector<ExperimentConfig>& configs, bool write_outputs = true);
Json ordering_json(const OrderingReport& r);

struct SweepPoint {
  Json value;
  std::vector<RunRecord> runs;
};

std::vector<SweepPoint> sweep(const ExperimentConfig& base, const std::string& param, const std::vector<Json>& values,
                              bool write_outputs = true);
void write_sweep_csv(std::ostream& os, const std::string& param, const std::vector<SweepPoint>& points);

// Atomic write (temporary file then rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace greendrl::harness

#include "greendrl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "greendrl/error.hpp"
#include "greendrl/stats.hpp"
#include "greendrl/wire.hpp"

namespace greendrl::harness {

namespace fs = std::filesystem;

// ---- configuration ---------------------------------------------------------

Json default_config() {
  return Json::parse(R"({
    "scenario": "rach",
    "agent": "dqn",
    "seeds": [1],
    "rounds": 1250,
    "eval_slots": 2000,
    "output_dir": "out",
    "rach": {
      "num_devices": 50,
      "history_window": 4,
      "arrival_prob": 0.3,
      "backoff_slots": 4,
      "traffic": "bernoulli",
      "action_menu": [
        {"rach_channels": 1, "preambles_per_channel": 12, "repetition": 4},
        {"rach_channels": 1, "preambles_per_channel": 16, "repetition": 3},
        {"rach_channels": 2, "preambles_per_channel": 12, "repetition": 2},
        {"rach_channels": 4, "preambles_per_channel": 12, "repetition": 1}
      ]
    },
    "cloud": {"K": 4, "entities": 1, "concurrent": false},
    "dqn": {
      "hidden": [32, 32],
      "learning_rate": 0.001,
      "batch_size": 32,
      "replay_capacity": 10000,
      "target_sync_every": 100,
      "discount": 0.9,
      "epsilon_start": 1.0,
      "epsilon_end": 0.05,
      "epsilon_decay_steps": 2000
    },
    "local": {"alpha": 0.01, "tabular_levels": 3},
    "compression": {"snapshot_bits": 32, "chain_batches": false, "prune_sparsity": 0.0, "prune_at_round": 0},
    "energy": {"per_mac": 1.0, "per_mem_access": 1.0, "per_byte": 1.0},
    "metrics": {"threshold_reward": 0.0, "moving_window": 20, "tail_fraction": 0.2},
    "spatial": {
      "sites": 16,
      "spacing": 1.0,
      "kernel_amplitude": 0.2112,
      "kernel_length_scale": 2.0,
      "noise_sigma": 0.2,
      "distortion": "identity",
      "base_rate": 3.0,
      "stations": [7, 8],
      "transfer": true,
      "transfer_every": 50,
      "beta": 0.5,
      "warmup_slots": 2000,
      "field_log_every": 0,
      "eval_every": 25
    }
  })");
}

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

const char* type_name(const Json& j) {
  if (j.is_boolean()) return "boolean";
  if (j.is_number()) return "number";
  if (j.is_string()) return "string";
  if (j.is_array()) return "array";
  if (j.is_object()) return "object";
  return "null";
}

bool same_kind(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) return true;
  return std::string(type_name(a)) == type_name(b);
}

void merge_into(Json& base, const Json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError("expected an object", path.empty() ? "<root>" : path);
  for (const auto& [key, value] : user.items()) {
    const std::string p = join(path, key);
    if (!base.contains(key)) throw ConfigError("unknown key", p);
    Json& slot = base[key];
    if (!same_kind(slot, value))
      throw ConfigError(std::string("expected ") + type_name(slot) + ", got " + type_name(value), p);
    if (slot.is_object())
      merge_into(slot, value, p);
    else
      slot = value;
  }
}

double num(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError("expected a number", path);
  return j.get<double>();
}

std::uint64_t count(const Json& j, const std::string& path, std::uint64_t min = 0) {
  if (!j.is_number_integer() && !(j.is_number() && std::floor(j.get<double>()) == j.get<double>()))
    throw ConfigError("expected an integer", path);
  const double v = j.get<double>();
  if (v < static_cast<double>(min)) throw ConfigError("must be >= " + std::to_string(min), path);
  return static_cast<std::uint64_t>(v);
}

double in_range(const Json& j, const std::string& path, double lo, double hi) {
  const double v = num(j, path);
  if (!(v >= lo && v <= hi)) throw ConfigError("must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]", path);
  return v;
}

std::string fnv_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace

ExperimentConfig parse_config(const Json& user) {
  Json j = default_config();
  merge_into(j, user, "");
  ExperimentConfig c;
  c.source = j;
  // Where results land is not part of the experiment.
  Json hashed = j;
  hashed.erase("output_dir");
  c.config_hash = fnv_hex(hashed.dump());

  c.scenario = j["scenario"].get<std::string>();
  if (c.scenario != "rach" && c.scenario != "spatial")
    throw ConfigError("unknown scenario '" + c.scenario + "' (expected rach or spatial)", "scenario");
  c.agent = agents::parse_agent(j["agent"].get<std::string>());
  c.seeds.clear();
  for (std::size_t i = 0; i < j["seeds"].size(); ++i) c.seeds.push_back(count(j["seeds"][i], "seeds[" + std::to_string(i) + "]"));
  if (c.seeds.empty()) throw ConfigError("at least one seed is required", "seeds");
  c.rounds = count(j["rounds"], "rounds", 1);
  c.eval_slots = count(j["eval_slots"], "eval_slots");
  c.output_dir = j["output_dir"].get<std::string>();

  const Json& r = j["rach"];
  c.rach.num_devices = static_cast<int>(count(r["num_devices"], "rach.num_devices"));
  c.rach.history_window = static_cast<int>(count(r["history_window"], "rach.history_window", 1));
  c.rach.arrival_prob = in_range(r["arrival_prob"], "rach.arrival_prob", 0.0, 1.0);
  c.rach.backoff_slots = static_cast<int>(count(r["backoff_slots"], "rach.backoff_slots", 1));
  const auto traffic = r["traffic"].get<std::string>();
  if (traffic == "bernoulli")
    c.rach.traffic = rach::TrafficMode::Bernoulli;
  else if (traffic == "external")
    c.rach.traffic = rach::TrafficMode::External;
  else
    throw ConfigError("expected bernoulli or external", "rach.traffic");
  const Json item_keys = Json::parse(R"({"rach_channels":1,"preambles_per_channel":1,"repetition":1})");
  for (std::size_t i = 0; i < r["action_menu"].size(); ++i) {
    const std::string p = "rach.action_menu[" + std::to_string(i) + "]";
    Json item = item_keys;
    merge_into(item, r["action_menu"][i], p);
    c.rach.action_menu.push_back({static_cast<int>(count(item["rach_channels"], p + ".rach_channels", 1)),
                                  static_cast<int>(count(item["preambles_per_channel"], p + ".preambles_per_channel", 1)),
                                  static_cast<int>(count(item["repetition"], p + ".repetition", 1))});
  }
  c.rach.check();

  c.inner_steps = count(j["cloud"]["K"], "cloud.K", 1);
  c.entities = count(j["cloud"]["entities"], "cloud.entities", 1);
  c.concurrent = j["cloud"]["concurrent"].get<bool>();

  const Json& d = j["dqn"];
  c.dqn.hidden.clear();
  for (std::size_t i = 0; i < d["hidden"].size(); ++i)
    c.dqn.hidden.push_back(count(d["hidden"][i], "dqn.hidden[" + std::to_string(i) + "]", 1));
  c.dqn.learning_rate = num(d["learning_rate"], "dqn.learning_rate");
  if (!(c.dqn.learning_rate > 0.0)) throw ConfigError("must be > 0", "dqn.learning_rate");
  c.dqn.batch_size = count(d["batch_size"], "dqn.batch_size", 1);
  c.dqn.replay_capacity = count(d["replay_capacity"], "dqn.replay_capacity", 1);
  c.dqn.target_sync_every = count(d["target_sync_every"], "dqn.target_sync_every", 1);
  c.dqn.discount = num(d["discount"], "dqn.discount");
  if (!(c.dqn.discount > 0.0 && c.dqn.discount <= 1.0)) throw ConfigError("must lie in (0, 1]", "dqn.discount");
  c.dqn.epsilon_start = in_range(d["epsilon_start"], "dqn.epsilon_start", 0.0, 1.0);
  c.dqn.epsilon_end = in_range(d["epsilon_end"], "dqn.epsilon_end", 0.0, 1.0);
  c.dqn.epsilon_decay_steps = count(d["epsilon_decay_steps"], "dqn.epsilon_decay_steps");

  c.local_alpha = num(j["local"]["alpha"], "local.alpha");
  if (!(c.local_alpha > 0.0 && c.local_alpha <= 1.0)) throw ConfigError("must lie in (0, 1]", "local.alpha");
  c.tabular_levels = static_cast<int>(count(j["local"]["tabular_levels"], "local.tabular_levels", 2));

  const Json& cm = j["compression"];
  c.compression.snapshot_bits = static_cast<int>(count(cm["snapshot_bits"], "compression.snapshot_bits"));
  try {
    wire::NetFormat::from_bits(c.compression.snapshot_bits);
  } catch (const std::exception&) {
    throw ConfigError("must be 32, 64 or in [2, 16]", "compression.snapshot_bits");
  }
  c.compression.chain_batches = cm["chain_batches"].get<bool>();
  c.prune_sparsity = in_range(cm["prune_sparsity"], "compression.prune_sparsity", 0.0, 1.0);
  c.prune_at_round = count(cm["prune_at_round"], "compression.prune_at_round");
  if (c.prune_at_round > c.rounds) throw ConfigError("must not exceed rounds", "compression.prune_at_round");

  c.coefficients.per_mac = num(j["energy"]["per_mac"], "energy.per_mac");
  c.coefficients.per_mem_access = num(j["energy"]["per_mem_access"], "energy.per_mem_access");
  c.coefficients.per_byte = num(j["energy"]["per_byte"], "energy.per_byte");

  c.threshold_reward = num(j["metrics"]["threshold_reward"], "metrics.threshold_reward");
  c.moving_window = count(j["metrics"]["moving_window"], "metrics.moving_window", 1);
  c.tail_fraction = in_range(j["metrics"]["tail_fraction"], "metrics.tail_fraction", 0.0, 1.0);

  const Json& s = j["spatial"];
  auto& sp = c.spatial;
  sp.sites = count(s["sites"], "spatial.sites", 1);
  sp.spacing = num(s["spacing"], "spatial.spacing");
  if (!(sp.spacing > 0.0)) throw ConfigError("must be > 0", "spatial.spacing");
  sp.kernel_amplitude = num(s["kernel_amplitude"], "spatial.kernel_amplitude");
  sp.kernel_length_scale = num(s["kernel_length_scale"], "spatial.kernel_length_scale");
  if (!(sp.kernel_length_scale > 0.0)) throw ConfigError("must be > 0", "spatial.kernel_length_scale");
  sp.noise_sigma = num(s["noise_sigma"], "spatial.noise_sigma");
  if (!(sp.noise_sigma >= 0.0)) throw ConfigError("must be >= 0", "spatial.noise_sigma");
  const auto dist = s["distortion"].get<std::string>();
  if (dist == "squash")
    sp.distortion = spatial::Distortion::Squash;
  else if (dist == "identity")
    sp.distortion = spatial::Distortion::Identity;
  else
    throw ConfigError("expected squash or identity", "spatial.distortion");
  sp.base_rate = num(s["base_rate"], "spatial.base_rate");
  if (!(sp.base_rate > 0.0)) throw ConfigError("must be > 0", "spatial.base_rate");
  sp.stations.clear();
  for (std::size_t i = 0; i < s["stations"].size(); ++i) {
    const std::string p = "spatial.stations[" + std::to_string(i) + "]";
    sp.stations.push_back(count(s["stations"][i], p));
    if (sp.stations.back() >= sp.sites) throw ConfigError("station site outside the grid", p);
  }
  sp.transfer = s["transfer"].get<bool>();
  sp.transfer_every = count(s["transfer_every"], "spatial.transfer_every", 1);
  sp.beta = in_range(s["beta"], "spatial.beta", 0.0, 1.0);
  sp.warmup_slots = count(s["warmup_slots"], "spatial.warmup_slots");
  sp.field_log_every = count(s["field_log_every"], "spatial.field_log_every");
  sp.eval_every = count(s["eval_every"], "spatial.eval_every", 1);
  if (c.scenario == "spatial") {
    if (sp.stations.size() < 2) throw ConfigError("the spatial scenario needs at least two stations", "spatial.stations");
    if (c.agent != agents::AgentKind::Dqn) throw ConfigError("the spatial scenario trains DQN agents", "agent");
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file", path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what(), path.string());
  }
  return parse_config(j);
}

Json set_path(Json config, const std::string& path, const Json& value) {
  Json full = default_config();
  merge_into(full, config, "");
  Json* node = &full;
  std::string rest = path;
  while (true) {
    const auto dot = rest.find('.');
    const std::string key = rest.substr(0, dot);
    if (!node->is_object() || !node->contains(key)) throw ConfigError("parameter path does not resolve", path);
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    rest = rest.substr(dot + 1);
  }
  if (node->is_object()) throw ConfigError("parameter path names a section, not a value", path);
  if (!same_kind(*node, value))
    throw ConfigError(std::string("expected ") + type_name(*node) + ", got " + type_name(value), path);
  *node = value;
  return full;
}

// ---- runs ------------------------------------------------------------------

double rounds_to_threshold(const std::vector<double>& per_round, std::size_t window, double threshold) {
  if (window == 0) window = 1;
  double acc = 0.0;
  for (std::size_t r = 0; r < per_round.size(); ++r) {
    acc += per_round[r];
    if (r >= window) acc -= per_round[r - window];
    if (r + 1 >= window && acc / static_cast<double>(window) >= threshold) return static_cast<double>(r + 1);
  }
  return static_cast<double>(per_round.size());
}

double eval_rounds_to_threshold(const std::vector<EvalPoint>& curve, std::size_t station, double threshold) {
  double last = 0.0;
  for (const auto& p : curve) {
    if (p.station != station) continue;
    if (p.reward >= threshold) return static_cast<double>(p.round);
    last = static_cast<double>(p.round);
  }
  return last;
}

namespace {

// Seed streams for one run.
enum Stream : std::uint64_t { kEnv = 10, kAgent = 11, kEval = 20, kField = 30, kTraffic = 31, kStationAgent = 40 };

double tail_mean(const std::vector<cloud::RoundRecord>& rounds, double fraction) {
  if (rounds.empty()) return 0.0;
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * rounds.size())));
  double s = 0.0;
  for (std::size_t i = rounds.size() - n; i < rounds.size(); ++i) s += rounds[i].mean_reward;
  return s / static_cast<double>(n);
}

std::vector<double> reward_series(const std::vector<cloud::RoundRecord>& rounds, std::optional<std::uint32_t> entity = {}) {
  std::vector<double> out;
  for (const auto& r : rounds)
    if (!entity || r.entity_id == *entity) out.push_back(r.mean_reward);
  return out;
}

cloud::ServiceRequest dqn_request(const ExperimentConfig& cfg, rach::RachConfig env, std::uint64_t agent_seed,
                                  std::size_t entities) {
  cloud::ServiceRequest req;
  for (std::size_t e = 0; e < entities; ++e) req.entity_ids.push_back(static_cast<std::uint32_t>(e));
  req.env = std::move(env);
  req.algorithm = {"dqn", cfg.dqn, agent_seed};
  req.inner_steps_per_round = cfg.inner_steps;
  req.compression = cfg.compression;
  return req;
}

DenseNet deployed(const DenseNet& online, const cloud::CompressionFlags& flags) {
  const auto fmt = wire::NetFormat::from_bits(flags.snapshot_bits);
  return wire::decode_snapshot(wire::encode_snapshot(online, 0, 0.0, fmt)).net;
}

void prune_session(cloud::Session& session, double fraction, RunRecord& rec) {
  const double threshold = threshold_for_sparsity(session.online(), fraction);
  auto pruned = prune_by_magnitude(session.online(), threshold);
  rec.sparsity = pruned.report;
  session.replace_online(std::move(pruned.net));
}

void run_session_rounds(cloud::Session& s, std::size_t rounds, bool concurrent) {
  if (rounds == 0) return;
  if (concurrent)
    s.run_concurrent(rounds);
  else
    s.run_session(rounds);
}

RunRecord run_rach_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  RunRecord rec;
  rec.seed = seed;
  rec.config_hash = cfg.config_hash;
  rec.agent = agents::to_string(cfg.agent);
  rach::RachConfig env = cfg.rach;
  env.seed = derive_seed(seed, kEnv);
  if (env.traffic != rach::TrafficMode::Bernoulli)
    throw ConfigError("the rach scenario uses bernoulli traffic", "rach.traffic");

  agents::GreedyPolicy greedy;
  if (cfg.agent == agents::AgentKind::Dqn) {
    auto session = cloud::Session::instantiate(dqn_request(cfg, env, derive_seed(seed, kAgent), cfg.entities));
    const bool prune = cfg.prune_at_round > 0 && cfg.prune_sparsity > 0.0;
    const std::size_t first = prune ? cfg.prune_at_round : cfg.rounds;
    run_session_rounds(session, first, cfg.concurrent);
    if (prune) prune_session(session, cfg.prune_sparsity, rec);
    run_session_rounds(session, cfg.rounds - first, cfg.concurrent);
    rec.rounds = session.history();
    rec.energy = session.energy();
    rec.messages = session.messages();
    rec.interactions = session.interactions();
    rec.snapshot_bytes = wire::snapshot_bytes(session.online(), wire::NetFormat::from_bits(cfg.compression.snapshot_bits));
    auto replayed = energy::replay(session.event_log(), rec.energy.coefficients);
    rec.ledger_reconciles = replayed == rec.energy;
    greedy = agents::greedy_net_policy(deployed(session.online(), cfg.compression));
  } else {
    agents::LocalParams p;
    p.kind = cfg.agent;
    p.alpha = cfg.local_alpha;
    p.discount = cfg.dqn.discount;
    p.epsilon_start = cfg.dqn.epsilon_start;
    p.epsilon_end = cfg.dqn.epsilon_end;
    p.epsilon_decay_steps = cfg.dqn.epsilon_decay_steps;
    p.tabular_levels = cfg.tabular_levels;
    p.seed = derive_seed(seed, kAgent);
    auto run = agents::run_local_agent(env, p, cfg.rounds, cfg.inner_steps, {}, cfg.coefficients);
    rec.rounds = std::move(run.rounds);
    rec.energy = run.energy;
    rec.interactions = cfg.rounds * cfg.inner_steps;
    rec.ledger_reconciles = energy::replay(run.events, cfg.coefficients) == run.energy;
    greedy = run.greedy;
  }
  rec.energy.coefficients = cfg.coefficients;
  rec.tail_reward = tail_mean(rec.rounds, cfg.tail_fraction);
  rec.eval_reward = agents::evaluate_policy(env, greedy, cfg.eval_slots, derive_seed(seed, kEval));
  rec.rounds_to_threshold = cfg.threshold_reward > 0.0
                                ? rounds_to_threshold(reward_series(rec.rounds), cfg.moving_window, cfg.threshold_reward)
                                : static_cast<double>(rec.rounds.size());
  return rec;
}

struct SpatialTrace {
  std::vector<std::shared_ptr<std::vector<int>>> station_arrivals;  // training slots
  std::vector<std::shared_ptr<std::vector<int>>> station_eval;      // held-out slots after training
  std::vector<std::vector<double>> site_round_counts;               // per site, per round
  std::string field_csv;
};

SpatialTrace simulate_field(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto& sp = cfg.spatial;
  auto field = spatial::SpatialField::grid_1d(sp.sites, sp.spacing);
  const auto mixing = spatial::mixing_matrix(field, spatial::Kernel{sp.kernel_amplitude, sp.kernel_length_scale});
  Rng field_rng(derive_seed(seed, kField));
  Rng traffic_rng(derive_seed(seed, kTraffic));
  const std::size_t slots = cfg.rounds * cfg.inner_steps;

  SpatialTrace tr;
  for (std::size_t b = 0; b < sp.stations.size(); ++b) {
    tr.station_arrivals.push_back(std::make_shared<std::vector<int>>(slots, 0));
    tr.station_eval.push_back(std::make_shared<std::vector<int>>(cfg.eval_slots, 0));
  }
  tr.site_round_counts.assign(sp.sites, std::vector<double>(cfg.rounds, 0.0));
  std::ostringstream csv;
  if (sp.field_log_every) spatial::write_field_csv_header(csv);

  for (std::size_t t = 0; t < sp.warmup_slots + slots + cfg.eval_slots; ++t) {
    field = spatial::side_step(field, mixing, sp.distortion, spatial::FieldNoise{sp.noise_sigma}, field_rng);
    if (t < sp.warmup_slots) continue;
    const std::size_t slot = t - sp.warmup_slots;
    const auto counts = spatial::sample_traffic(spatial::TrafficIntensity::from_field(field, sp.base_rate), traffic_rng);
    if (slot >= slots) {
      for (std::size_t b = 0; b < sp.stations.size(); ++b) (*tr.station_eval[b])[slot - slots] = counts[sp.stations[b]];
      continue;
    }
    for (std::size_t b = 0; b < sp.stations.size(); ++b) (*tr.station_arrivals[b])[slot] = counts[sp.stations[b]];
    for (std::size_t i = 0; i < sp.sites; ++i) tr.site_round_counts[i][slot / cfg.inner_steps] += counts[i];
    if (sp.field_log_every && slot % sp.field_log_every == 0) spatial::write_field_csv(csv, slot, field, counts);
  }
  tr.field_csv = csv.str();
  return tr;
}

std::vector<std::vector<double>> prefix(const std::vector<std::vector<double>>& series, std::size_t len,
                                        const std::vector<std::size_t>& rows) {
  std::vector<std::vector<double>> out;
  for (std::size_t r : rows) out.emplace_back(series[r].begin(), series[r].begin() + static_cast<long>(len));
  return out;
}

cloud::ArrivalSource replay_trace(std::shared_ptr<std::vector<int>> trace) {
  return [trace](std::uint64_t slot) { return (*trace)[slot]; };
}

// Stations share the network initialization (one algorithm seed) so their
// parameters live in a common basis and averaging them is meaningful.
RunRecord run_spatial_seed(const ExperimentConfig& cfg, std::uint64_t seed, std::string* field_csv = nullptr) {
  const auto& sp = cfg.spatial;
  RunRecord rec;
  rec.seed = seed;
  rec.config_hash = cfg.config_hash;
  rec.agent = agents::to_string(cfg.agent);

  SpatialTrace tr = simulate_field(cfg, seed);
  if (field_csv) *field_csv = tr.field_csv;

  std::vector<cloud::Session> sessions;
  std::vector<rach::RachConfig> envs;
  for (std::size_t b = 0; b < sp.stations.size(); ++b) {
    rach::RachConfig env = cfg.rach;
    env.traffic = rach::TrafficMode::External;
    env.seed = derive_seed(seed, kEnv + 100 * (b + 1));
    envs.push_back(env);
    auto req = dqn_request(cfg, env, derive_seed(seed, kStationAgent), 1);
    req.arrivals[0] = replay_trace(tr.station_arrivals[b]);
    sessions.push_back(cloud::Session::instantiate(req));
  }

  auto evaluate = [&](std::size_t round) {
    for (std::size_t b = 0; b < sessions.size(); ++b) {
      const auto policy = agents::greedy_net_policy(deployed(sessions[b].online(), cfg.compression));
      const double v = agents::evaluate_policy(envs[b], policy, cfg.eval_slots, derive_seed(seed, kEval + b),
                                               replay_trace(tr.station_eval[b]));
      rec.eval_curve.push_back({round, b, v});
    }
  };

  std::vector<std::vector<cloud::RoundRecord>> per_station(sessions.size());
  for (std::size_t r = 1; r <= cfg.rounds; ++r) {
    for (std::size_t b = 0; b < sessions.size(); ++b) {
      auto res = sessions[b].outer_round(0);
      const double eps = sessions[b].current_epsilon();
      const double loss = sessions[b].train_on_batch(res.batch);
      cloud::RoundRecord rr{r, static_cast<std::uint32_t>(b), res.batch.snapshot_version, eps,
                            res.reward_sum / static_cast<double>(res.batch.transitions.size()), loss,
                            sessions[b].energy(), sessions[b].messages()};
      per_station[b].push_back(rr);
      rec.rounds.push_back(rr);
    }
    if (sp.transfer && sp.beta > 0.0 && r % sp.transfer_every == 0 && r >= 2) {
      const auto corr = spatial::estimate_correlation(prefix(tr.site_round_counts, r, sp.stations));
      std::vector<DenseNet> nets;
      for (const auto& s : sessions) nets.push_back(s.online());
      auto mixed = spatial::transfer_weights(nets, corr, sp.beta);
      for (std::size_t b = 0; b < sessions.size(); ++b) sessions[b].replace_online(std::move(mixed[b]));
    }
    if (cfg.eval_slots > 0 && (r % sp.eval_every == 0 || r == cfg.rounds)) evaluate(r);
  }

  const auto corr = spatial::estimate_correlation(prefix(tr.site_round_counts, cfg.rounds, sp.stations));
  rec.station_correlation = corr.at(0, 1);
  std::vector<std::size_t> all_sites(sp.sites);
  for (std::size_t i = 0; i < sp.sites; ++i) all_sites[i] = i;
  if (sp.sites >= 2 && cfg.rounds >= 2) {
    const auto field_corr = spatial::estimate_correlation(prefix(tr.site_round_counts, cfg.rounds, all_sites));
    rec.kernel_fit = spatial::fit_kernel(field_corr, spatial::SpatialField::grid_1d(sp.sites, sp.spacing).coords, 1);
  }

  rec.energy.coefficients = cfg.coefficients;
  bool reconciles = true;
  double rtt = 0.0, tail = 0.0, final_eval = 0.0;
  for (std::size_t b = 0; b < sessions.size(); ++b) {
    const auto& s = sessions[b];
    rec.energy.macs_inference += s.energy().macs_inference;
    rec.energy.macs_training += s.energy().macs_training;
    rec.energy.mem_accesses += s.energy().mem_accesses;
    rec.energy.bytes_wire += s.energy().bytes_wire;
    rec.energy.bytes_down += s.energy().bytes_down;
    rec.energy.bytes_up += s.energy().bytes_up;
    rec.messages += s.messages();
    rec.interactions += s.interactions();
    reconciles = reconciles && energy::replay(s.event_log(), s.energy().coefficients) == s.energy();
    rtt += cfg.threshold_reward > 0.0 ? eval_rounds_to_threshold(rec.eval_curve, b, cfg.threshold_reward)
                                      : static_cast<double>(cfg.rounds);
    tail += tail_mean(per_station[b], cfg.tail_fraction);
    for (const auto& p : rec.eval_curve)
      if (p.station == b && p.round == cfg.rounds) final_eval += p.reward;
  }
  const auto stations = static_cast<double>(sessions.size());
  rec.ledger_reconciles = reconciles;
  rec.rounds_to_threshold = rtt / stations;
  rec.tail_reward = tail / stations;
  rec.eval_reward = final_eval / stations;
  rec.snapshot_bytes = wire::snapshot_bytes(sessions.front().online(), wire::NetFormat::from_bits(cfg.compression.snapshot_bits));
  return rec;
}

std::string eval_csv(const RunRecord& r) {
  std::ostringstream os;
  os << std::setprecision(17) << "round,station,eval_reward\n";
  for (const auto& p : r.eval_curve) os << p.round << ',' << p.station << ',' << p.reward << '\n';
  return os.str();
}

std::string rounds_csv(const RunRecord& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  cloud::write_round_csv(os, r.rounds);
  return os.str();
}

}  // namespace

RunRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.scenario == "spatial" ? run_spatial_seed(cfg, seed) : run_rach_seed(cfg, seed);
}

fs::path output_root() {
  if (const char* env = std::getenv("GREENDRL_OUTPUT_ROOT"); env && *env) return fs::path(env);
  return fs::current_path();
}

fs::path run_directory(const ExperimentConfig& cfg, std::uint64_t seed) {
  fs::path dir = cfg.output_dir;
  if (dir.is_relative()) dir = output_root() / dir;
  return dir / (cfg.scenario + "_" + agents::to_string(cfg.agent)) / ("seed_" + std::to_string(seed));
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

Json summary_json(const RunRecord& r) {
  Json j;
  j["seed"] = r.seed;
  j["config_hash"] = r.config_hash;
  j["agent"] = r.agent;
  j["rounds"] = r.rounds.size();
  j["interactions"] = r.interactions;
  j["eval_reward"] = r.eval_reward;
  j["tail_reward"] = r.tail_reward;
  j["rounds_to_threshold"] = r.rounds_to_threshold;
  j["snapshot_bytes"] = r.snapshot_bytes;
  j["energy"] = {{"macs_inference", r.energy.macs_inference}, {"macs_training", r.energy.macs_training},
                 {"mem_accesses", r.energy.mem_accesses},     {"bytes_wire", r.energy.bytes_wire},
                 {"bytes_down", r.energy.bytes_down},         {"bytes_up", r.energy.bytes_up},
                 {"energy_proxy", r.energy.energy_proxy()}};
  Json hist = Json::object();
  for (const auto& [lag, n] : r.messages.staleness_histogram) hist[std::to_string(lag)] = n;
  j["messages"] = {{"rounds", r.messages.rounds},
                   {"bytes_down", r.messages.bytes_down},
                   {"bytes_up", r.messages.bytes_up},
                   {"staleness_histogram", hist}};
  if (r.sparsity)
    j["sparsity"] = {{"total_weights", r.sparsity->total_weights},     {"nonzero_weights", r.sparsity->nonzero_weights},
                     {"sparsity", r.sparsity->sparsity},               {"mac_count_dense", r.sparsity->mac_count_dense},
                     {"mac_count_pruned", r.sparsity->mac_count_pruned}};
  if (r.station_correlation) j["station_correlation"] = *r.station_correlation;
  if (r.kernel_fit) j["kernel_fit"] = Json::parse(spatial::kernel_fit_json(*r.kernel_fit));
  j["ledger_reconciles"] = r.ledger_reconciles;
  return j;
}

std::vector<RunRecord> run(const ExperimentConfig& cfg, bool write_outputs) {
  const auto n = static_cast<long>(cfg.seeds.size());
  std::vector<RunRecord> records(cfg.seeds.size());
  std::vector<std::string> errors(cfg.seeds.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto seed = cfg.seeds[static_cast<std::size_t>(i)];
    const fs::path dir = run_directory(cfg, seed);
    try {
      std::string field_csv;
      records[static_cast<std::size_t>(i)] =
          cfg.scenario == "spatial" ? run_spatial_seed(cfg, seed, &field_csv) : run_rach_seed(cfg, seed);
      if (write_outputs) {
        const auto& rec = records[static_cast<std::size_t>(i)];
        write_file_atomic(dir / "config.json", cfg.source.dump(2) + "\n");
        write_file_atomic(dir / "rounds.csv", rounds_csv(rec));
        write_file_atomic(dir / "summary.json", summary_json(rec).dump(2) + "\n");
        if (!field_csv.empty()) write_file_atomic(dir / "field.csv", field_csv);
        if (!rec.eval_curve.empty()) write_file_atomic(dir / "eval.csv", eval_csv(rec));
      }
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
      if (write_outputs) {
        try {
          write_file_atomic(dir / "error.json", Json{{"seed", seed}, {"error", e.what()}}.dump(2) + "\n");
        } catch (...) {
        }
      }
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty()) throw std::runtime_error("seed " + std::to_string(cfg.seeds[i]) + ": " + errors[i]);
  return records;
}

// ---- comparisons and sweeps --------------------------------------------------

OrderingReport compare_agents(const std::vector<ExperimentConfig>& configs, bool write_outputs) {
  if (configs.size() < 2) throw InvalidInput("compare needs at least two configs");
  const auto& ref = configs.front();
  for (const auto& c : configs) {
    if (c.scenario != ref.scenario || c.source["rach"] != ref.source["rach"] || c.seeds != ref.seeds ||
        c.rounds != ref.rounds || c.inner_steps != ref.inner_steps || c.eval_slots != ref.eval_slots)
      throw InvalidInput("compared configs must share scenario, rach environment, seeds, rounds, K and eval_slots");
  }
  std::vector<std::vector<RunRecord>> runs;
  for (const auto& c : configs) runs.push_back(run(c, write_outputs));

  OrderingReport report;
  double best_tail = -INFINITY;
  for (const auto& rs : runs) {
    std::vector<double> tails;
    for (const auto& r : rs) tails.push_back(r.tail_reward);
    best_tail = std::max(best_tail, stats::mean(tails));
  }
  report.threshold = 0.9 * best_tail;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    AgentSummary s;
    s.agent = agents::to_string(configs[i].agent);
    std::vector<double> rtt;
    for (const auto& r : runs[i]) {
      s.eval_rewards.push_back(r.eval_reward);
      rtt.push_back(rounds_to_threshold(reward_series(r.rounds), configs[i].moving_window, report.threshold));
    }
    s.mean_eval = stats::mean(s.eval_rewards);
    s.ci95 = stats::ci_half_width(s.eval_rewards);
    s.mean_rounds_to_threshold = stats::mean(rtt);
    report.ranking.push_back(std::move(s));
  }
  std::stable_sort(report.ranking.begin(), report.ranking.end(),
                   [](const AgentSummary& a, const AgentSummary& b) { return a.mean_eval > b.mean_eval; });
  for (std::size_t i = 0; i + 1 < report.ranking.size(); ++i) {
    const auto& a = report.ranking[i];
    const auto& b = report.ranking[i + 1];
    PairwiseResult p{a.agent, b.agent, 0.0, 1.0};
    if (a.eval_rewards.size() >= 2) {
      const auto t = stats::paired_t_test(a.eval_rewards, b.eval_rewards);
      p.mean_difference = t.mean_difference;
      p.p_value = t.p_greater;
    } else {
      p.mean_difference = a.mean_eval - b.mean_eval;
    }
    report.adjacent.push_back(p);
  }
  if (write_outputs) {
    fs::path dir = ref.output_dir;
    if (dir.is_relative()) dir = output_root() / dir;
    write_file_atomic(dir / "compare" / "ordering.json", ordering_json(report).dump(2) + "\n");
    std::ostringstream csv;
    csv << std::setprecision(17) << "rank,agent,mean_eval_reward,ci95,mean_rounds_to_threshold\n";
    for (std::size_t i = 0; i < report.ranking.size(); ++i) {
      const auto& s = report.ranking[i];
      csv << i + 1 << ',' << s.agent << ',' << s.mean_eval << ',' << s.ci95 << ',' << s.mean_rounds_to_threshold << '\n';
    }
    write_file_atomic(dir / "compare" / "ordering.csv", csv.str());
    Json snap = Json::array();
    for (const auto& c : configs) snap.push_back(c.source);
    write_file_atomic(dir / "compare" / "configs.json", snap.dump(2) + "\n");
  }
  return report;
}

Json ordering_json(const OrderingReport& r) {
  Json j;
  j["threshold_reward"] = r.threshold;
  j["ranking"] = Json::array();
  for (const auto& s : r.ranking)
    j["ranking"].push_back({{"agent", s.agent},
                            {"mean_eval_reward", s.mean_eval},
                            {"ci95", s.ci95},
                            {"mean_rounds_to_threshold", s.mean_rounds_to_threshold},
                            {"eval_rewards", s.eval_rewards}});
  j["adjacent"] = Json::array();
  for (const auto& p : r.adjacent)
    j["adjacent"].push_back({{"better", p.better}, {"worse", p.worse}, {"mean_difference", p.mean_difference},
                             {"p_value", p.p_value}});
  return j;
}

std::vector<SweepPoint> sweep(const ExperimentConfig& base, const std::string& param, const std::vector<Json>& values,
                              bool write_outputs) {
  if (values.empty()) throw ConfigError("sweep needs at least one value", "--values");
  std::vector<SweepPoint> points;
  for (const auto& v : values) {
    Json j = set_path(base.source, param, v);
    std::string label = v.is_string() ? v.get<std::string>() : v.dump();
    j["output_dir"] = (fs::path(base.output_dir) / ("sweep_" + param) / ("value_" + label)).string();
    const auto cfg = parse_config(j);
    points.push_back({v, run(cfg, write_outputs)});
  }
  if (write_outputs) {
    fs::path dir = fs::path(base.output_dir) / ("sweep_" + param);
    if (dir.is_relative()) dir = output_root() / dir;
    std::ostringstream csv;
    write_sweep_csv(csv, param, points);
    write_file_atomic(dir / "curve.csv", csv.str());
    write_file_atomic(dir / "base_config.json", base.source.dump(2) + "\n");
  }
  return points;
}

void write_sweep_csv(std::ostream& os, const std::string& param, const std::vector<SweepPoint>& points) {
  os << std::setprecision(17);
  os << param
     << ",seeds,mean_eval_reward,mean_tail_reward,mean_rounds_to_threshold,bytes_wire,bytes_wire_per_slot,snapshot_bytes,"
        "macs_total,energy_proxy,sparsity\n";
  for (const auto& p : points) {
    const double n = static_cast<double>(p.runs.size());
    double eval = 0, tail = 0, rtt = 0, bytes = 0, per_slot = 0, snap = 0, macs = 0, proxy = 0, sparsity = 0;
    for (const auto& r : p.runs) {
      eval += r.eval_reward;
      tail += r.tail_reward;
      rtt += r.rounds_to_threshold;
      bytes += static_cast<double>(r.energy.bytes_wire);
      per_slot += r.interactions ? static_cast<double>(r.energy.bytes_wire) / static_cast<double>(r.interactions) : 0.0;
      snap += static_cast<double>(r.snapshot_bytes);
      macs += static_cast<double>(r.energy.total_macs());
      proxy += r.energy.energy_proxy();
      sparsity += r.sparsity ? r.sparsity->sparsity : 0.0;
    }
    os << (p.value.is_string() ? p.value.get<std::string>() : p.value.dump()) << ',' << p.runs.size() << ','
       << eval / n << ',' << tail / n << ',' << rtt / n << ',' << bytes / n << ',' << per_slot / n << ',' << snap / n
       << ',' << macs / n << ',' << proxy / n << ',' << sparsity / n << '\n';
  }
}

}  // namespace greendrl::harness

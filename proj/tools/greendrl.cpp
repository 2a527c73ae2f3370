// Experiment runner: run / compare / sweep / schema.
#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "greendrl/error.hpp"
#include "greendrl/harness.hpp"

namespace h = greendrl::harness;

namespace {

constexpr int kOk = 0;
constexpr int kRunError = 1;
constexpr int kConfigError = 2;

// "1,8,64" -> [1, 8, 64]; items that are not JSON literals stay strings.
std::vector<h::Json> parse_values(const std::string& list) {
  std::vector<h::Json> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(h::Json::parse(item));
    } catch (const h::Json::parse_error&) {
      out.push_back(item);
    }
  }
  return out;
}

void print_run(const std::vector<h::RunRecord>& records, const h::ExperimentConfig& cfg) {
  for (const auto& r : records)
    std::cout << "seed " << r.seed << "  eval_reward " << r.eval_reward << "  tail_reward " << r.tail_reward
              << "  bytes_wire " << r.energy.bytes_wire << "  macs " << r.energy.total_macs() << "  -> "
              << h::run_directory(cfg, r.seed).string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"greendrl experiment runner"};
  app.require_subcommand(1);

  std::string run_path;
  auto* run_cmd = app.add_subcommand("run", "run every seed of a config");
  run_cmd->add_option("config", run_path, "config JSON")->required();

  std::vector<std::string> compare_paths;
  auto* cmp_cmd = app.add_subcommand("compare", "rank agents over the shared seeds");
  cmp_cmd->add_option("configs", compare_paths, "config JSON files (one per agent)")->required()->expected(2, -1);

  std::string sweep_path, sweep_param, sweep_values;
  auto* sweep_cmd = app.add_subcommand("sweep", "run a config once per parameter value");
  sweep_cmd->add_option("config", sweep_path, "base config JSON")->required();
  sweep_cmd->add_option("--param", sweep_param, "dotted parameter path, e.g. cloud.K")->required();
  sweep_cmd->add_option("--values", sweep_values, "comma-separated values")->required();

  app.add_subcommand("schema", "print every accepted key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) {
      const auto cfg = h::load_config(run_path);
      print_run(h::run(cfg), cfg);
    } else if (*cmp_cmd) {
      std::vector<h::ExperimentConfig> cfgs;
      for (const auto& p : compare_paths) cfgs.push_back(h::load_config(p));
      std::cout << h::ordering_json(h::compare_agents(cfgs)).dump(2) << '\n';
    } else if (*sweep_cmd) {
      const auto cfg = h::load_config(sweep_path);
      const auto points = h::sweep(cfg, sweep_param, parse_values(sweep_values));
      h::write_sweep_csv(std::cout, sweep_param, points);
    } else {
      std::cout << h::default_config().dump(2) << '\n';
    }
  } catch (const greendrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const greendrl::InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "run error: " << e.what() << '\n';
    return kRunError;
  }
  return kOk;
}

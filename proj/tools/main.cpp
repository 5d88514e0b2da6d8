#include <CLI11.hpp>

#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "teamlab/config.hpp"
#include "teamlab/experiment.hpp"
#include "teamlab/incentives.hpp"

namespace {

using teamlab::cfg::KeyValues;
namespace experiment = teamlab::experiment;

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitRuntimeError = 2;

KeyValues load_config(const std::string& path, const std::vector<std::string>& sets) {
  KeyValues kv = KeyValues::from_file(path);
  for (const auto& s : sets) kv.apply_override(s);
  return kv;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    out.push_back(teamlab::cfg::parse_double(item, what));
  }
  return out;
}

std::string default_output(const std::string& leaf) {
  const char* root = std::getenv("TEAMLAB_OUTPUT_ROOT");
  return std::string(root ? root : "runs") + "/" + leaf;
}

void print_summary(const experiment::ExperimentResult& result, const std::string& dir) {
  std::cout << "wrote " << dir << " (" << result.trials.size() << " trials, config "
            << result.config.config_hash() << ")\n";
  for (const auto& f : result.output_files) std::cout << "  " << f << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"population team-reward experiments: pairwise dilemma and gridworld cleanup"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string output;

  auto* run = app.add_subcommand("run", "run one experiment (all trials) and write CSVs");
  run->add_option("-c,--config", config_path, "key=value config file")->required();
  run->add_option("-s,--set", overrides, "override a config key, key=value (repeatable)");
  run->add_option("-o,--output", output, "output directory (beats config output_dir)");

  std::string grid_structures, grid_benefits;
  auto* grid = app.add_subcommand("grid", "sweep structures x benefits from a base config");
  grid->add_option("-c,--config", config_path, "base key=value config file")->required();
  grid->add_option("-s,--set", overrides, "override a config key, key=value (repeatable)");
  grid->add_option("--structures", grid_structures,
                   "comma-separated k/m list (beats config key structures)");
  grid->add_option("--benefits", grid_benefits,
                   "comma-separated benefit list (beats config key benefits)");
  grid->add_option("-o,--output", output, "grid output directory");

  std::string inc_structures = "2/15,3/10,5/6,6/5,10/3,15/2";
  std::string inc_benefits = "10,5,2";
  double inc_cost = 1.0;
  int inc_agents = 30;
  std::optional<double> inc_nu;
  std::string inc_csv;
  auto* inc = app.add_subcommand("incentives", "closed-form stage-game incentive table");
  inc->add_option("--structures", inc_structures, "comma-separated k/m list");
  inc->add_option("--benefits", inc_benefits, "comma-separated benefit list");
  inc->add_option("--cost", inc_cost, "interaction cost c (> 0)");
  inc->add_option("--n-agents", inc_agents, "population size the structures partition");
  inc->add_option("--nu", inc_nu, "override teammate probability for every structure");
  inc->add_option("--csv", inc_csv, "also write the table as CSV to this path");

  std::string plot_dir;
  auto* plot = app.add_subcommand("plot", "render SVG charts from CSVs in a run directory");
  plot->add_option("dir", plot_dir, "directory holding summary/timeseries CSVs")->required();

  auto* validate = app.add_subcommand("validate", "parse and validate a config, print its hash");
  validate->add_option("-c,--config", config_path, "key=value config file")->required();
  validate->add_option("-s,--set", overrides, "override a config key, key=value (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      experiment::ExperimentConfig config;
      try {
        config = experiment::ExperimentConfig::from_keyvalues(
            load_config(config_path, overrides));
        if (!output.empty()) config.output_dir = output;
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
      }
      const auto result = experiment::run_experiment(config);
      print_summary(result, result.output_dir);
      return kExitOk;
    }

    if (grid->parsed()) {
      experiment::ExperimentConfig base;
      experiment::GridSpec spec;
      try {
        KeyValues kv = load_config(config_path, overrides);
        const std::string cfg_structures = kv.get_string("structures", "");
        const std::string cfg_benefits = kv.get_string("benefits", "");
        const std::string structures =
            !grid_structures.empty() ? grid_structures : cfg_structures;
        const std::string benefits = !grid_benefits.empty() ? grid_benefits : cfg_benefits;
        if (structures.empty() || benefits.empty()) {
          throw std::invalid_argument(
              "grid needs structures and benefits (flags or config keys)");
        }
        spec.structures = split_list(structures);
        spec.benefits = parse_double_list(benefits, "benefits");
        base = experiment::ExperimentConfig::from_keyvalues(kv);
        for (const auto& s : spec.structures) {
          teamlab::parse_structure(s, base.ipd.env.n_agents);
        }
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
      }
      const std::string dir = !output.empty()
                                  ? output
                                  : (!base.output_dir.empty() ? base.output_dir
                                                              : default_output("grid"));
      base.output_dir.clear();
      experiment::run_grid(base, spec, dir);
      std::cout << "wrote " << dir << " (" << spec.structures.size() << " structures x "
                << spec.benefits.size() << " benefits)\n";
      return kExitOk;
    }

    if (inc->parsed()) {
      std::vector<teamlab::incentives::IncentiveEntry> entries;
      try {
        std::vector<std::pair<double, double>> bc_pairs;
        for (double b : parse_double_list(inc_benefits, "benefits")) {
          bc_pairs.emplace_back(b, inc_cost);
        }
        entries = teamlab::incentives::incentive_table(split_list(inc_structures),
                                                       inc_agents, bc_pairs, inc_nu);
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
      }
      std::cout << teamlab::incentives::format_incentive_table(entries);
      if (!inc_csv.empty()) {
        std::ofstream out(inc_csv, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + inc_csv);
        teamlab::incentives::write_incentive_csv(out, entries);
        std::cout << "wrote " << inc_csv << '\n';
      }
      return kExitOk;
    }

    if (plot->parsed()) {
      const auto made = experiment::emit_plots(plot_dir);
      if (made.empty()) {
        std::cerr << "no plottable CSVs found in " << plot_dir << '\n';
        return kExitConfigError;
      }
      for (const auto& f : made) std::cout << "wrote " << plot_dir << "/" << f << '\n';
      return kExitOk;
    }

    if (validate->parsed()) {
      try {
        KeyValues kv = load_config(config_path, overrides);
        // Grid base configs may carry sweep lists; accept them here too.
        kv.get_string("structures", "");
        kv.get_string("benefits", "");
        const auto config = experiment::ExperimentConfig::from_keyvalues(kv);
        std::cout << "ok " << config.config_hash() << '\n';
        for (const auto& line : config.canonical_lines()) std::cout << line << '\n';
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
      }
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
  return kExitOk;
}

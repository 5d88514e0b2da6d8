#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "teamlab/cleanup.hpp"
#include "teamlab/config.hpp"
#include "teamlab/ipd.hpp"
#include "teamlab/metrics.hpp"
#include "teamlab/policy_net.hpp"
#include "teamlab/qlearn.hpp"
#include "teamlab/team.hpp"

namespace teamlab::experiment {

enum class Environment { Ipd, Cleanup };

Environment parse_environment(const std::string& text);
const char* to_string(Environment env);

struct IpdParams {
  ipd::IPDConfig env;
  double alpha = 0.1;
  double gamma = 0.9;
  double eps_start = 1.0;
  double eps_floor = 0.01;
  double eps_decay_fraction = 0.1;  // fraction of episodes spent decaying
  double q_init = 0.0;
  int coop_window = 2000;
};

struct CleanupParams {
  cleanup::CleanupConfig env;
  ppo::PPOConfig ppo;
  int hidden1 = 64;
  int hidden2 = 64;
  long timesteps = 2000000;  // per trial; episodes = timesteps / episode_length
};

struct ExperimentConfig {
  Environment environment = Environment::Ipd;
  std::string structure = "5/6";
  int trials = 5;
  std::uint64_t base_seed = 1;
  std::string output_dir;
  IpdParams ipd;
  CleanupParams cleanup;

  void validate() const;

  // Canonical key=value lines covering every setting that affects results;
  // their hash names the configuration in records and manifests.
  std::vector<std::string> canonical_lines() const;
  std::string config_hash() const;

  // Reads the schema for the configured environment, rejecting unknown keys.
  static ExperimentConfig from_keyvalues(const cfg::KeyValues& kv);
};

// Resolves the output directory: explicit config value if set, otherwise
// <root>/<name> where root comes from the TEAMLAB_OUTPUT_ROOT environment
// variable (default "runs").
std::string resolve_output_dir(const ExperimentConfig& config, const std::string& name);

metrics::IpdRecord run_ipd_trial(const IpdParams& params, const TeamPartition& partition,
                                 std::uint64_t seed, const std::string& config_hash);

metrics::CleanupRecord run_cleanup_trial(const CleanupParams& params,
                                         const TeamPartition& partition,
                                         std::uint64_t seed,
                                         const std::string& config_hash);

struct TrialSummary {
  int trial = 0;
  std::uint64_t seed = 0;
  // IPD: last-quartile statistics.
  double normalized_reward = 0.0;
  double coop_teammate = 0.0;       // NaN when no teammate interactions exist
  double coop_other = 0.0;          // NaN when no non-teammate interactions exist
  double equality = 0.0;            // NaN when undefined
  // Cleanup extras.
  double population_reward = 0.0;   // last-quartile mean per-episode population reward
  double apples_total = 0.0;
  double cleans_total = 0.0;
  double punishes_total = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::string output_dir;  // resolved absolute-or-relative directory used
  std::vector<TrialSummary> trials;
  std::vector<std::string> output_files;  // paths written, relative to output_dir
};

// Runs all trials with seeds base_seed + k and writes summary.csv,
// timeseries.csv (plus labor.csv for Cleanup) and manifest.json into the
// output directory. Identical config + seed reproduce identical CSV bytes.
ExperimentResult run_experiment(const ExperimentConfig& config);

// IPD-only sweep over structures x benefits (cost fixed): one run_experiment
// per cell into <output_dir>/<structure>_b<benefit>/, plus grid-level
// aggregate.csv, incentives.csv and an aligned text table.
struct GridSpec {
  std::vector<std::string> structures;
  std::vector<double> benefits;
};

void run_grid(const ExperimentConfig& base, const GridSpec& grid,
              const std::string& output_dir);

// Renders SVG charts from the CSV artifacts found in dir.
std::vector<std::string> emit_plots(const std::string& dir);

}  // namespace teamlab::experiment

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "teamlab/team.hpp"

namespace teamlab::metrics {

// Maps the mean per-agent per-interaction reward onto [0, 1] over the payoff
// range [-c, b]. No clamping: out-of-range output means an upstream bug.
double normalized_reward(double mean_per_agent_reward, double benefit,
                         double cost);

// Inverse Gini index: 1 - sum_ij |R_i - R_j| / (2 N^2 mean). Undefined for a
// non-positive mean; callers get an empty optional and must exclude the
// sample from aggregation.
std::optional<double> equality(const RewardVector& rewards);

struct Ci {
  double mean = 0.0;
  double half_width = 0.0;
};

// Student-t interval over trial-level means; trials are the replication unit.
Ci confidence_interval(const std::vector<double>& samples, double level = 0.95);

// Per-episode aggregates plus per-agent totals for one IPD trial.
struct IpdRecord {
  int n_agents = 0;
  long episodes = 0;
  std::uint64_t seed = 0;
  std::string config_hash;

  // Per-episode series.
  std::vector<double> pop_raw;        // population raw reward
  std::vector<int> participations;    // interaction participations (2 per pair)
  std::vector<int> coop_teammate;     // C actions toward teammates
  std::vector<int> count_teammate;    // actions toward teammates
  std::vector<int> coop_other;
  std::vector<int> count_other;

  // Per-agent totals over the whole trial.
  std::vector<long> agent_participations;
  std::vector<long> agent_focal_teammate_draws;
  std::vector<double> agent_raw_sum;
  std::vector<double> agent_team_sum;
};

struct RateSeries {
  int window = 0;
  // One entry per window; empty optional marks a window with no interactions
  // of that relation (a plot gap, not a zero).
  std::vector<std::optional<double>> teammate;
  std::vector<std::optional<double>> nonteammate;
};

// Fraction of cooperative actions per window, split by whether the
// counterpart was a teammate.
RateSeries cooperation_rates(const IpdRecord& record, int window);

// Mean per-agent per-interaction raw reward over the final quartile of
// episodes (the converged-behavior statistic).
double last_quartile_mean_reward(const IpdRecord& record);

// Overall cooperation fraction over the final quartile.
double last_quartile_cooperation(const IpdRecord& record);

// Per-episode per-agent tallies for one Cleanup trial.
struct CleanupRecord {
  int n_agents = 0;
  long episodes = 0;
  long steps_per_episode = 0;
  std::uint64_t seed = 0;
  std::string config_hash;

  // [episode][agent]
  std::vector<std::vector<double>> apples;
  std::vector<std::vector<double>> cleans;
  std::vector<std::vector<double>> punishes;
  std::vector<std::vector<double>> raw_reward;
  std::vector<std::vector<double>> team_reward;
};

struct LaborSeries {
  int smooth_window = 1;
  // [agent][episode], centered moving average of per-episode counts.
  std::vector<std::vector<double>> apples;
  std::vector<std::vector<double>> cleans;
};

LaborSeries division_of_labor(const CleanupRecord& record, int smooth_window);

// Mean population reward per episode over the whole trial.
double mean_population_reward(const CleanupRecord& record);

// Per-agent mean reward vector over the trial (team rewards by default, raw
// when use_raw is set, for labor-inequality analysis).
RewardVector per_agent_mean_rewards(const CleanupRecord& record, bool use_raw);

}  // namespace teamlab::metrics

#pragma once

#include <string>
#include <vector>

namespace teamlab {

// Per-agent real-valued rewards for one step or episode.
using RewardVector = std::vector<double>;

// How counterparts are drawn each episode. TeamFirst draws the counterpart's
// team uniformly, then a member within it; UniformMatching draws a uniform
// random perfect matching over the whole population.
enum class PairingMode { TeamFirst, UniformMatching };

PairingMode parse_pairing_mode(const std::string& text);
std::string to_string(PairingMode mode);

// Disjoint cover of agent ids [0, N) into equal-size teams, built from
// consecutive id blocks. Immutable after construction.
class TeamPartition {
 public:
  TeamPartition(int num_teams, int team_size);

  int num_agents() const { return num_teams_ * team_size_; }
  int num_teams() const { return num_teams_; }
  int team_size() const { return team_size_; }

  int team_of(int agent) const;
  const std::vector<int>& members(int team) const;

  // "k/m" text form, the same notation used in configs and CLI flags.
  std::string notation() const;

 private:
  int num_teams_;
  int team_size_;
  std::vector<int> assignment_;          // agent id -> team id
  std::vector<std::vector<int>> teams_;  // team id -> member ids
};

// Parses "k/m" notation against a population size; throws std::invalid_argument
// naming both values when k*m != n_agents or the text is malformed.
TeamPartition parse_structure(const std::string& notation, int n_agents);

// Equal-share team reward: mean of the raw rewards over the agent's team.
double team_reward(const TeamPartition& partition, const RewardVector& rewards,
                   int agent);

// Elementwise team reward for every agent. Preserves the population sum.
RewardVector apply_team_transform(const TeamPartition& partition,
                                  const RewardVector& rewards);

// Probability that a randomly assigned counterpart is a teammate. TeamFirst:
// 1/num_teams, except 0 for singleton teams (an own-team draw is re-drawn
// among the other teams, since an agent cannot be its own counterpart).
// UniformMatching: (team_size-1)/(N-1).
double teammate_probability(const TeamPartition& partition, PairingMode mode);

// Pluggable reward transform; equal-share mean is the only one shipped, but
// environments accept any transform with this shape.
using RewardTransform = RewardVector (*)(const TeamPartition&,
                                         const RewardVector&);

}  // namespace teamlab

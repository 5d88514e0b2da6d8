#include "teamlab/team.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace teamlab {

PairingMode parse_pairing_mode(const std::string& text) {
  if (text == "team_first") return PairingMode::TeamFirst;
  if (text == "uniform_matching") return PairingMode::UniformMatching;
  throw std::invalid_argument("unknown pairing mode '" + text +
                              "' (expected team_first or uniform_matching)");
}

std::string to_string(PairingMode mode) {
  return mode == PairingMode::TeamFirst ? "team_first" : "uniform_matching";
}

TeamPartition::TeamPartition(int num_teams, int team_size)
    : num_teams_(num_teams), team_size_(team_size) {
  if (num_teams <= 0 || team_size <= 0) {
    throw std::invalid_argument("team structure must have positive counts, got " +
                                std::to_string(num_teams) + "/" +
                                std::to_string(team_size));
  }
  const int n = num_teams * team_size;
  assignment_.resize(n);
  teams_.resize(num_teams);
  for (int t = 0; t < num_teams; ++t) {
    teams_[t].resize(team_size);
    for (int k = 0; k < team_size; ++k) {
      const int agent = t * team_size + k;
      teams_[t][k] = agent;
      assignment_[agent] = t;
    }
  }
}

int TeamPartition::team_of(int agent) const {
  if (agent < 0 || agent >= num_agents()) {
    throw std::out_of_range("agent id " + std::to_string(agent) +
                            " outside population of " +
                            std::to_string(num_agents()));
  }
  return assignment_[agent];
}

const std::vector<int>& TeamPartition::members(int team) const {
  if (team < 0 || team >= num_teams_) {
    throw std::out_of_range("team id " + std::to_string(team) +
                            " outside partition of " +
                            std::to_string(num_teams_) + " teams");
  }
  return teams_[team];
}

std::string TeamPartition::notation() const {
  return std::to_string(num_teams_) + "/" + std::to_string(team_size_);
}

TeamPartition parse_structure(const std::string& notation, int n_agents) {
  const auto slash = notation.find('/');
  if (slash == std::string::npos || slash == 0 || slash + 1 == notation.size()) {
    throw std::invalid_argument("team structure '" + notation +
                                "' is not of the form k/m");
  }
  int k = 0, m = 0;
  try {
    std::size_t used = 0;
    k = std::stoi(notation.substr(0, slash), &used);
    if (used != slash) throw std::invalid_argument("trailing text");
    const std::string rest = notation.substr(slash + 1);
    m = std::stoi(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("trailing text");
  } catch (const std::exception&) {
    throw std::invalid_argument("team structure '" + notation +
                                "' is not of the form k/m");
  }
  if (k <= 0 || m <= 0) {
    throw std::invalid_argument("team structure '" + notation +
                                "' must use positive integers");
  }
  if (k * m != n_agents) {
    throw std::invalid_argument(
        "team structure " + std::to_string(k) + "/" + std::to_string(m) +
        " covers " + std::to_string(k * m) + " agents but the population has " +
        std::to_string(n_agents));
  }
  return TeamPartition(k, m);
}

double team_reward(const TeamPartition& partition, const RewardVector& rewards,
                   int agent) {
  if (static_cast<int>(rewards.size()) != partition.num_agents()) {
    throw std::invalid_argument(
        "reward vector of length " + std::to_string(rewards.size()) +
        " does not match population of " +
        std::to_string(partition.num_agents()));
  }
  const auto& team = partition.members(partition.team_of(agent));
  double sum = 0.0;
  for (int member : team) sum += rewards[member];
  return sum / static_cast<double>(team.size());
}

RewardVector apply_team_transform(const TeamPartition& partition,
                                  const RewardVector& rewards) {
  if (static_cast<int>(rewards.size()) != partition.num_agents()) {
    throw std::invalid_argument(
        "reward vector of length " + std::to_string(rewards.size()) +
        " does not match population of " +
        std::to_string(partition.num_agents()));
  }
  RewardVector out(rewards.size());
  for (int t = 0; t < partition.num_teams(); ++t) {
    const auto& team = partition.members(t);
    double sum = 0.0;
    for (int member : team) sum += rewards[member];
    const double share = sum / static_cast<double>(team.size());
    for (int member : team) out[member] = share;
  }
  return out;
}

double teammate_probability(const TeamPartition& partition, PairingMode mode) {
  if (mode == PairingMode::TeamFirst) {
    if (partition.team_size() == 1) return 0.0;
    return 1.0 / static_cast<double>(partition.num_teams());
  }
  const int n = partition.num_agents();
  if (n == 1) return 0.0;
  return static_cast<double>(partition.team_size() - 1) /
         static_cast<double>(n - 1);
}

}  // namespace teamlab

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "teamlab/rng.hpp"
#include "teamlab/team.hpp"

namespace teamlab::ipd {

enum class Action : std::uint8_t { Cooperate, Defect };

inline char action_char(Action a) { return a == Action::Cooperate ? 'C' : 'D'; }

// Team id of the counterpart; the only identity information an agent sees.
using TeamSignal = int;

struct IPDConfig {
  int n_agents = 30;
  double cost = 1.0;
  double benefit = 5.0;
  PairingMode pairing_mode = PairingMode::TeamFirst;
  long episodes = 100000;

  void validate() const {
    if (!(benefit > cost) || !(cost > 0.0)) {
      throw std::invalid_argument("IPD payoffs require b > c > 0, got b=" +
                                  std::to_string(benefit) +
                                  " c=" + std::to_string(cost));
    }
    if (n_agents < 2) {
      throw std::invalid_argument("IPD needs at least 2 agents");
    }
  }
};

struct PairPayoff {
  double focal;
  double counterpart;
};

// One-shot payoffs: (C,C) -> (b-c, b-c); (C,D) -> (-c, b); (D,C) -> (b, -c);
// (D,D) -> (0, 0).
PairPayoff stage_payoff(Action focal, Action counterpart, double benefit,
                        double cost);

struct Pairing {
  int focal;
  int counterpart;
};

// TeamFirst: every agent is focal exactly once; its counterpart's team is
// drawn uniformly over all teams, then a member uniformly within that team
// (self excluded; a singleton own-team draw is re-drawn among other teams).
// UniformMatching: a uniform random perfect matching (requires even N).
std::vector<Pairing> sample_pairings(const TeamPartition& partition,
                                     PairingMode mode, Rng& rng);

// The counterpart's team id. Never exposes the counterpart's agent id.
TeamSignal observe(int focal, int counterpart, const TeamPartition& partition);

struct Interaction {
  int focal;
  int counterpart;
  Action action_focal;
  Action action_counterpart;
  double payoff_focal;
  double payoff_counterpart;
};

struct EpisodeResult {
  std::vector<Interaction> interactions;
  RewardVector raw;   // per-agent payoffs summed over all interactions joined
  RewardVector team;  // raw after the team transform
};

// One pairing round. Both sides of each interaction observe the other's team
// signal, act, and accrue the resulting payoff into their raw episode reward;
// the returned team rewards are the equal-share transform of the raw vector.
// PolicyFn: Action(int agent, TeamSignal signal, Rng& rng).
template <typename PolicyFn>
void run_episode_into(const IPDConfig& config, const TeamPartition& partition,
                      PolicyFn&& policy, Rng& rng, EpisodeResult& out) {
  config.validate();
  if (partition.num_agents() != config.n_agents) {
    throw std::invalid_argument("partition covers " +
                                std::to_string(partition.num_agents()) +
                                " agents but config expects " +
                                std::to_string(config.n_agents));
  }
  const auto pairings = sample_pairings(partition, config.pairing_mode, rng);
  out.interactions.clear();
  out.interactions.reserve(pairings.size());
  out.raw.assign(config.n_agents, 0.0);
  for (const auto& pair : pairings) {
    Interaction inter;
    inter.focal = pair.focal;
    inter.counterpart = pair.counterpart;
    const TeamSignal signal_focal = observe(pair.focal, pair.counterpart, partition);
    const TeamSignal signal_counter = observe(pair.counterpart, pair.focal, partition);
    inter.action_focal = policy(pair.focal, signal_focal, rng);
    inter.action_counterpart = policy(pair.counterpart, signal_counter, rng);
    const PairPayoff payoff = stage_payoff(inter.action_focal,
                                           inter.action_counterpart,
                                           config.benefit, config.cost);
    inter.payoff_focal = payoff.focal;
    inter.payoff_counterpart = payoff.counterpart;
    out.raw[pair.focal] += payoff.focal;
    out.raw[pair.counterpart] += payoff.counterpart;
    out.interactions.push_back(inter);
  }
  out.team = apply_team_transform(partition, out.raw);
}

template <typename PolicyFn>
EpisodeResult run_episode(const IPDConfig& config,
                          const TeamPartition& partition, PolicyFn&& policy,
                          Rng& rng) {
  EpisodeResult result;
  run_episode_into(config, partition, policy, rng, result);
  return result;
}

}  // namespace teamlab::ipd

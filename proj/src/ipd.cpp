#include "teamlab/ipd.hpp"

#include <numeric>

namespace teamlab::ipd {

PairPayoff stage_payoff(Action focal, Action counterpart, double benefit,
                        double cost) {
  // A cooperator pays the cost; its contribution benefits the pair under
  // mutual cooperation and is reaped by the other side otherwise.
  const bool fc = focal == Action::Cooperate;
  const bool cc = counterpart == Action::Cooperate;
  double f = fc ? -cost : 0.0;
  double c = cc ? -cost : 0.0;
  if (fc && cc) {
    f += benefit;
    c += benefit;
  } else if (fc) {
    c += benefit;
  } else if (cc) {
    f += benefit;
  }
  return {f, c};
}

TeamSignal observe(int /*focal*/, int counterpart,
                   const TeamPartition& partition) {
  return partition.team_of(counterpart);
}

namespace {

int draw_member(const std::vector<int>& team, int exclude, Rng& rng) {
  const int size = static_cast<int>(team.size());
  int pos = -1;
  for (int i = 0; i < size; ++i) {
    if (team[i] == exclude) {
      pos = i;
      break;
    }
  }
  if (pos < 0) return team[rng.uniform_int(static_cast<std::uint32_t>(size))];
  const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(size - 1)));
  return team[j >= pos ? j + 1 : j];
}

}  // namespace

std::vector<Pairing> sample_pairings(const TeamPartition& partition,
                                     PairingMode mode, Rng& rng) {
  const int n = partition.num_agents();
  std::vector<Pairing> pairings;
  if (mode == PairingMode::UniformMatching) {
    if (n % 2 != 0) {
      throw std::invalid_argument(
          "uniform matching needs an even population, got " +
          std::to_string(n));
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    pairings.reserve(n / 2);
    for (int i = 0; i < n; i += 2) {
      pairings.push_back({order[i], order[i + 1]});
    }
    return pairings;
  }

  const int k = partition.num_teams();
  pairings.reserve(n);
  for (int focal = 0; focal < n; ++focal) {
    int team = static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(k)));
    if (team == partition.team_of(focal) && partition.team_size() == 1) {
      // Singletons re-draw among the other teams.
      const int other = static_cast<int>(
          rng.uniform_int(static_cast<std::uint32_t>(k - 1)));
      team = other >= team ? other + 1 : other;
    }
    const int counterpart = draw_member(partition.members(team), focal, rng);
    pairings.push_back({focal, counterpart});
  }
  return pairings;
}

}  // namespace teamlab::ipd

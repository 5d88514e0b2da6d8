#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "teamlab/team.hpp"

namespace teamlab::incentives {

// Counterpart strategy seen from the focal agent: cooperation probability
// when the counterpart is a teammate vs. from any other team.
struct StrategyProfile {
  double coop_vs_teammate = 0.5;  // sigma_ji
  double coop_vs_other = 0.5;     // sigma_jj
};

// Expected stage-game utility of cooperating, given the probability nu that
// the counterpart is a teammate:
//   nu*(b-c)*(sigma_ji+1)/2 + (1-nu)*(sigma_jj*b - c)
double expected_utility_cooperate(double nu, const StrategyProfile& sigma,
                                  double benefit, double cost);

// Expected stage-game utility of defecting:
//   nu*sigma_ji*(b-c)/2 + (1-nu)*sigma_jj*b
double expected_utility_defect(double nu, const StrategyProfile& sigma,
                               double benefit, double cost);

// Teammate probability above which cooperation is the incentivized action
// regardless of either strategy profile: 2c/(b+c). Requires b > c > 0.
double cooperation_threshold(double benefit, double cost);

// nu - 2c/(b+c). Nonnegative means cooperation is incentivized.
double incentive_margin(double nu, double benefit, double cost);

enum class IncentivizedAction { Cooperate, Defect };

struct IncentiveEntry {
  std::string structure;
  double benefit = 0.0;
  double cost = 0.0;
  double nu = 0.0;
  double margin = 0.0;
  IncentivizedAction action = IncentivizedAction::Defect;
};

// One entry per (structure, benefit/cost pair). nu defaults to the team-first
// value for each parsed structure; nu_override replaces it for sensitivity
// studies. Ties (margin exactly zero) classify as Cooperate.
std::vector<IncentiveEntry> incentive_table(
    const std::vector<std::string>& structures, int n_agents,
    const std::vector<std::pair<double, double>>& bc_pairs,
    std::optional<double> nu_override = std::nullopt);

// Aligned text table, benefit columns ordered highest to lowest.
std::string format_incentive_table(const std::vector<IncentiveEntry>& entries);

void write_incentive_csv(std::ostream& out,
                         const std::vector<IncentiveEntry>& entries);

}  // namespace teamlab::incentives

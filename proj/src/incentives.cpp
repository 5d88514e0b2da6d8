#include "teamlab/incentives.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace teamlab::incentives {

namespace {

void check_payoff_domain(double benefit, double cost) {
  if (!(benefit > cost) || !(cost > 0.0)) {
    throw std::invalid_argument("payoff parameters require b > c > 0, got b=" +
                                std::to_string(benefit) +
                                " c=" + std::to_string(cost));
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

double expected_utility_cooperate(double nu, const StrategyProfile& sigma,
                                  double benefit, double cost) {
  return nu * (benefit - cost) * (sigma.coop_vs_teammate + 1.0) / 2.0 +
         (1.0 - nu) * (sigma.coop_vs_other * benefit - cost);
}

double expected_utility_defect(double nu, const StrategyProfile& sigma,
                               double benefit, double cost) {
  return nu * sigma.coop_vs_teammate * (benefit - cost) / 2.0 +
         (1.0 - nu) * sigma.coop_vs_other * benefit;
}

double cooperation_threshold(double benefit, double cost) {
  check_payoff_domain(benefit, cost);
  return 2.0 * cost / (benefit + cost);
}

double incentive_margin(double nu, double benefit, double cost) {
  return nu - cooperation_threshold(benefit, cost);
}

std::vector<IncentiveEntry> incentive_table(
    const std::vector<std::string>& structures, int n_agents,
    const std::vector<std::pair<double, double>>& bc_pairs,
    std::optional<double> nu_override) {
  std::vector<IncentiveEntry> entries;
  entries.reserve(structures.size() * bc_pairs.size());
  for (const auto& structure : structures) {
    const TeamPartition partition = parse_structure(structure, n_agents);
    const double nu = nu_override.value_or(
        teammate_probability(partition, PairingMode::TeamFirst));
    for (const auto& [benefit, cost] : bc_pairs) {
      IncentiveEntry entry;
      entry.structure = structure;
      entry.benefit = benefit;
      entry.cost = cost;
      entry.nu = nu;
      entry.margin = incentive_margin(nu, benefit, cost);
      entry.action = entry.margin >= 0.0 ? IncentivizedAction::Cooperate
                                         : IncentivizedAction::Defect;
      entries.push_back(std::move(entry));
    }
  }
  return entries;
}

std::string format_incentive_table(const std::vector<IncentiveEntry>& entries) {
  // Columns: one per (benefit, cost), highest benefit leftmost.
  std::vector<std::pair<double, double>> bcs;
  std::vector<std::string> structures;
  for (const auto& e : entries) {
    if (std::find(bcs.begin(), bcs.end(),
                  std::make_pair(e.benefit, e.cost)) == bcs.end()) {
      bcs.emplace_back(e.benefit, e.cost);
    }
    if (std::find(structures.begin(), structures.end(), e.structure) ==
        structures.end()) {
      structures.push_back(e.structure);
    }
  }
  std::sort(bcs.begin(), bcs.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  std::map<std::pair<std::string, std::pair<double, double>>,
           const IncentiveEntry*>
      lookup;
  for (const auto& e : entries) {
    lookup[{e.structure, {e.benefit, e.cost}}] = &e;
  }

  std::ostringstream out;
  out << "structure      nu    ";
  for (const auto& bc : bcs) {
    out << "| b=" << fmt(bc.first) << " c=" << fmt(bc.second)
        << " margin/action ";
  }
  out << "\n";
  for (const auto& s : structures) {
    const IncentiveEntry* any = lookup[{s, bcs.front()}];
    char row[64];
    std::snprintf(row, sizeof(row), "%-10s %8.4f ", s.c_str(),
                  any ? any->nu : 0.0);
    out << row;
    for (const auto& bc : bcs) {
      const IncentiveEntry* e = lookup[{s, bc}];
      if (e == nullptr) {
        out << "|            (none)           ";
        continue;
      }
      char cell[64];
      std::snprintf(cell, sizeof(cell), "| %+12.4f %-9s      ", e->margin,
                    e->action == IncentivizedAction::Cooperate ? "Cooperate"
                                                               : "Defect");
      out << cell;
    }
    out << "\n";
  }
  return out.str();
}

void write_incentive_csv(std::ostream& out,
                         const std::vector<IncentiveEntry>& entries) {
  out << "structure,benefit,cost,nu,margin,incentivized_action\n";
  char buf[160];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof(buf), "%s,%.12g,%.12g,%.12g,%.12g,%s\n",
                  e.structure.c_str(), e.benefit, e.cost, e.nu, e.margin,
                  e.action == IncentivizedAction::Cooperate ? "Cooperate"
                                                            : "Defect");
    out << buf;
  }
}

}  // namespace teamlab::incentives

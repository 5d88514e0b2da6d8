#include "teamlab/metrics.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace teamlab::metrics {

double normalized_reward(double mean_per_agent_reward, double benefit,
                         double cost) {
  if (!(benefit > cost) || !(cost > 0.0)) {
    throw std::invalid_argument("normalized_reward requires b > c > 0");
  }
  return (mean_per_agent_reward + cost) / (benefit + cost);
}

std::optional<double> equality(const RewardVector& rewards) {
  if (rewards.empty()) {
    throw std::invalid_argument("equality of an empty reward vector");
  }
  const std::size_t n = rewards.size();
  const double mean =
      std::accumulate(rewards.begin(), rewards.end(), 0.0) /
      static_cast<double>(n);
  if (!(mean > 0.0)) return std::nullopt;
  // Sorted-rank form of the pairwise absolute-difference sum:
  //   sum_ij |r_i - r_j| = 2 * sum_i r_(i) * (2i - n + 1).
  RewardVector sorted(rewards);
  std::sort(sorted.begin(), sorted.end());
  double weighted = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    weighted += sorted[i] * (2.0 * static_cast<double>(i) -
                             static_cast<double>(n) + 1.0);
  }
  return 1.0 - weighted / (static_cast<double>(n) * static_cast<double>(n) * mean);
}

Ci confidence_interval(const std::vector<double>& samples, double level) {
  const std::size_t n = samples.size();
  if (n < 2) {
    throw std::invalid_argument("confidence interval needs at least 2 samples");
  }
  if (!(level > 0.0) || !(level < 1.0)) {
    throw std::invalid_argument("confidence level must lie in (0, 1)");
  }
  const double mean =
      std::accumulate(samples.begin(), samples.end(), 0.0) /
      static_cast<double>(n);
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  const double stderr_ = std::sqrt(ss / static_cast<double>(n - 1)) /
                         std::sqrt(static_cast<double>(n));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  const double t = boost::math::quantile(dist, 0.5 + level / 2.0);
  return {mean, t * stderr_};
}

RateSeries cooperation_rates(const IpdRecord& record, int window) {
  if (window < 1) {
    throw std::invalid_argument("cooperation rate window must be >= 1");
  }
  RateSeries out;
  out.window = window;
  const long episodes = record.episodes;
  for (long start = 0; start < episodes; start += window) {
    const long end = std::min<long>(start + window, episodes);
    long ct = 0, nt = 0, co = 0, no = 0;
    for (long e = start; e < end; ++e) {
      ct += record.coop_teammate[e];
      nt += record.count_teammate[e];
      co += record.coop_other[e];
      no += record.count_other[e];
    }
    out.teammate.push_back(
        nt > 0 ? std::optional<double>(static_cast<double>(ct) / nt)
               : std::nullopt);
    out.nonteammate.push_back(
        no > 0 ? std::optional<double>(static_cast<double>(co) / no)
               : std::nullopt);
  }
  return out;
}

namespace {

long quartile_start(long episodes) { return episodes - episodes / 4; }

}  // namespace

double last_quartile_mean_reward(const IpdRecord& record) {
  double reward = 0.0;
  long participations = 0;
  for (long e = quartile_start(record.episodes); e < record.episodes; ++e) {
    reward += record.pop_raw[e];
    participations += record.participations[e];
  }
  if (participations == 0) return 0.0;
  return reward / static_cast<double>(participations);
}

double last_quartile_cooperation(const IpdRecord& record) {
  long coop = 0, total = 0;
  for (long e = quartile_start(record.episodes); e < record.episodes; ++e) {
    coop += record.coop_teammate[e] + record.coop_other[e];
    total += record.count_teammate[e] + record.count_other[e];
  }
  if (total == 0) return 0.0;
  return static_cast<double>(coop) / static_cast<double>(total);
}

LaborSeries division_of_labor(const CleanupRecord& record, int smooth_window) {
  if (smooth_window < 1) {
    throw std::invalid_argument("labor smoothing window must be >= 1");
  }
  LaborSeries out;
  out.smooth_window = smooth_window;
  const long episodes = record.episodes;
  const int agents = record.n_agents;
  out.apples.assign(agents, std::vector<double>(episodes, 0.0));
  out.cleans.assign(agents, std::vector<double>(episodes, 0.0));
  const long half = smooth_window / 2;
  for (int a = 0; a < agents; ++a) {
    for (long e = 0; e < episodes; ++e) {
      const long lo = std::max<long>(0, e - half);
      const long hi = std::min<long>(episodes - 1, e + half);
      double apples = 0.0, cleans = 0.0;
      for (long w = lo; w <= hi; ++w) {
        apples += record.apples[w][a];
        cleans += record.cleans[w][a];
      }
      const double span = static_cast<double>(hi - lo + 1);
      out.apples[a][e] = apples / span;
      out.cleans[a][e] = cleans / span;
    }
  }
  return out;
}

double mean_population_reward(const CleanupRecord& record) {
  if (record.episodes == 0) return 0.0;
  double total = 0.0;
  for (long e = 0; e < record.episodes; ++e) {
    for (int a = 0; a < record.n_agents; ++a) {
      total += record.raw_reward[e][a];
    }
  }
  return total / static_cast<double>(record.episodes);
}

RewardVector per_agent_mean_rewards(const CleanupRecord& record, bool use_raw) {
  RewardVector out(record.n_agents, 0.0);
  if (record.episodes == 0) return out;
  const auto& series = use_raw ? record.raw_reward : record.team_reward;
  for (long e = 0; e < record.episodes; ++e) {
    for (int a = 0; a < record.n_agents; ++a) {
      out[a] += series[e][a];
    }
  }
  for (double& v : out) v /= static_cast<double>(record.episodes);
  return out;
}

}  // namespace teamlab::metrics

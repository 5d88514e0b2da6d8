#include "teamlab/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "teamlab/csv.hpp"
#include "teamlab/hash.hpp"
#include "teamlab/incentives.hpp"
#include "teamlab/svg.hpp"

namespace fs = std::filesystem;

namespace teamlab::experiment {

namespace {

constexpr const char* kToolVersion = "0.1.0";
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string cell(double v) {
  return std::isfinite(v) ? csv::format_double(v) : std::string();
}

std::string cell(const std::optional<double>& v) {
  return v.has_value() ? csv::format_double(*v) : std::string();
}

std::string sanitize(const std::string& structure) {
  std::string out = structure;
  std::replace(out.begin(), out.end(), '/', '-');
  return out;
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? kNan : s / static_cast<double>(xs.size());
}

}  // namespace

Environment parse_environment(const std::string& text) {
  if (text == "ipd") return Environment::Ipd;
  if (text == "cleanup") return Environment::Cleanup;
  throw std::invalid_argument("environment must be \"ipd\" or \"cleanup\", got \"" +
                              text + "\"");
}

const char* to_string(Environment env) {
  return env == Environment::Ipd ? "ipd" : "cleanup";
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (environment == Environment::Ipd) {
    ipd.env.validate();
    parse_structure(structure, ipd.env.n_agents);
    if (!(ipd.alpha > 0.0 && ipd.alpha <= 1.0)) {
      throw std::invalid_argument("q_alpha must be in (0,1]");
    }
    if (!(ipd.gamma >= 0.0 && ipd.gamma < 1.0)) {
      throw std::invalid_argument("q_gamma must be in [0,1)");
    }
    if (!(ipd.eps_start >= 0.0 && ipd.eps_start <= 1.0) ||
        !(ipd.eps_floor >= 0.0 && ipd.eps_floor <= ipd.eps_start)) {
      throw std::invalid_argument(
          "epsilon schedule needs 0 <= eps_floor <= eps_start <= 1");
    }
    if (!(ipd.eps_decay_fraction >= 0.0 && ipd.eps_decay_fraction <= 1.0)) {
      throw std::invalid_argument("eps_decay_fraction must be in [0,1]");
    }
    if (ipd.coop_window < 1) throw std::invalid_argument("coop_window must be >= 1");
    if (ipd.env.episodes < 4) throw std::invalid_argument("episodes must be >= 4");
  } else {
    cleanup.env.validate();
    cleanup.ppo.validate();
    parse_structure(structure, cleanup.env.n_agents);
    if (cleanup.hidden1 < 1 || cleanup.hidden2 < 1) {
      throw std::invalid_argument("hidden layer sizes must be >= 1");
    }
    if (cleanup.timesteps < cleanup.env.episode_length) {
      throw std::invalid_argument("timesteps must cover at least one episode");
    }
  }
}

std::vector<std::string> ExperimentConfig::canonical_lines() const {
  std::vector<std::string> lines;
  auto add = [&](const std::string& k, const std::string& v) {
    lines.push_back(k + "=" + v);
  };
  auto addd = [&](const std::string& k, double v) { add(k, csv::format_double_exact(v)); };
  auto addi = [&](const std::string& k, long long v) { add(k, std::to_string(v)); };
  add("environment", to_string(environment));
  add("structure", structure);
  addi("trials", trials);
  addi("base_seed", static_cast<long long>(base_seed));
  if (environment == Environment::Ipd) {
    addi("n_agents", ipd.env.n_agents);
    addd("cost", ipd.env.cost);
    addd("benefit", ipd.env.benefit);
    add("pairing", teamlab::to_string(ipd.env.pairing_mode));
    addi("episodes", ipd.env.episodes);
    addd("q_alpha", ipd.alpha);
    addd("q_gamma", ipd.gamma);
    addd("eps_start", ipd.eps_start);
    addd("eps_floor", ipd.eps_floor);
    addd("eps_decay_fraction", ipd.eps_decay_fraction);
    addd("q_init", ipd.q_init);
    addi("coop_window", ipd.coop_window);
  } else {
    addi("n_agents", cleanup.env.n_agents);
    addi("timesteps", cleanup.timesteps);
    addi("episode_length", cleanup.env.episode_length);
    addd("waste_spawn_prob", cleanup.env.waste_spawn_prob);
    addd("apple_respawn_base", cleanup.env.apple_respawn_base);
    addd("depletion_threshold", cleanup.env.depletion_threshold);
    addd("initial_waste_density", cleanup.env.initial_waste_density);
    addi("clean_beam_length", cleanup.env.clean_beam_length);
    addi("beam_width", cleanup.env.beam_width);
    addi("view_window", cleanup.env.view_window);
    addd("punish_fine", cleanup.env.punish_fine);
    addd("punish_cost", cleanup.env.punish_cost);
    std::string map_joined;
    for (const auto& row : cleanup.env.map_rows) {
      if (!map_joined.empty()) map_joined += '|';
      map_joined += row;
    }
    add("map", map_joined);
    addi("hidden1", cleanup.hidden1);
    addi("hidden2", cleanup.hidden2);
    addd("ppo_lr", cleanup.ppo.learning_rate);
    addd("ppo_clip", cleanup.ppo.clip);
    addd("ppo_gamma", cleanup.ppo.gamma);
    addd("ppo_value_coef", cleanup.ppo.value_coef);
    addd("ppo_entropy_coef", cleanup.ppo.entropy_coef);
    addi("ppo_epochs", cleanup.ppo.epochs);
    addi("ppo_minibatch", cleanup.ppo.minibatch);
    add("ppo_normalize_advantages",
        cleanup.ppo.normalize_advantages ? "true" : "false");
  }
  return lines;
}

std::string ExperimentConfig::config_hash() const {
  std::string joined;
  for (const auto& line : canonical_lines()) {
    joined += line;
    joined += '\n';
  }
  return hex64(fnv1a(joined));
}

ExperimentConfig ExperimentConfig::from_keyvalues(const cfg::KeyValues& kv) {
  ExperimentConfig config;
  config.environment = parse_environment(kv.require_string("environment"));
  config.structure = kv.get_string("structure", "5/6");
  config.trials = static_cast<int>(
      kv.get_int("trials", config.environment == Environment::Ipd ? 5 : 8));
  config.base_seed = static_cast<std::uint64_t>(kv.get_int("base_seed", 1));
  config.output_dir = kv.get_string("output_dir", "");
  if (config.environment == Environment::Ipd) {
    IpdParams& p = config.ipd;
    p.env.n_agents = static_cast<int>(kv.get_int("n_agents", p.env.n_agents));
    p.env.cost = kv.get_double("cost", p.env.cost);
    p.env.benefit = kv.get_double("benefit", p.env.benefit);
    p.env.pairing_mode =
        parse_pairing_mode(kv.get_string("pairing", teamlab::to_string(p.env.pairing_mode)));
    p.env.episodes = kv.get_int("episodes", p.env.episodes);
    p.alpha = kv.get_double("q_alpha", p.alpha);
    p.gamma = kv.get_double("q_gamma", p.gamma);
    p.eps_start = kv.get_double("eps_start", p.eps_start);
    p.eps_floor = kv.get_double("eps_floor", p.eps_floor);
    p.eps_decay_fraction = kv.get_double("eps_decay_fraction", p.eps_decay_fraction);
    p.q_init = kv.get_double("q_init", p.q_init);
    p.coop_window = static_cast<int>(kv.get_int("coop_window", p.coop_window));
  } else {
    CleanupParams& p = config.cleanup;
    if (kv.has("map_file")) {
      p.env.map_rows = cleanup::load_map_file(kv.require_string("map_file"));
    }
    p.env.n_agents = static_cast<int>(kv.get_int("n_agents", p.env.n_agents));
    p.timesteps = kv.get_int("timesteps", p.timesteps);
    p.env.episode_length =
        static_cast<int>(kv.get_int("episode_length", p.env.episode_length));
    p.env.waste_spawn_prob = kv.get_double("waste_spawn_prob", p.env.waste_spawn_prob);
    p.env.apple_respawn_base =
        kv.get_double("apple_respawn_base", p.env.apple_respawn_base);
    p.env.depletion_threshold =
        kv.get_double("depletion_threshold", p.env.depletion_threshold);
    p.env.initial_waste_density =
        kv.get_double("initial_waste_density", p.env.initial_waste_density);
    p.env.clean_beam_length =
        static_cast<int>(kv.get_int("clean_beam_length", p.env.clean_beam_length));
    p.env.beam_width = static_cast<int>(kv.get_int("beam_width", p.env.beam_width));
    p.env.view_window = static_cast<int>(kv.get_int("view_window", p.env.view_window));
    p.env.punish_fine = kv.get_double("punish_fine", p.env.punish_fine);
    p.env.punish_cost = kv.get_double("punish_cost", p.env.punish_cost);
    p.hidden1 = static_cast<int>(kv.get_int("hidden1", p.hidden1));
    p.hidden2 = static_cast<int>(kv.get_int("hidden2", p.hidden2));
    p.ppo.learning_rate = kv.get_double("ppo_lr", p.ppo.learning_rate);
    p.ppo.clip = kv.get_double("ppo_clip", p.ppo.clip);
    p.ppo.gamma = kv.get_double("ppo_gamma", p.ppo.gamma);
    p.ppo.value_coef = kv.get_double("ppo_value_coef", p.ppo.value_coef);
    p.ppo.entropy_coef = kv.get_double("ppo_entropy_coef", p.ppo.entropy_coef);
    p.ppo.epochs = static_cast<int>(kv.get_int("ppo_epochs", p.ppo.epochs));
    p.ppo.minibatch = static_cast<int>(kv.get_int("ppo_minibatch", p.ppo.minibatch));
    p.ppo.normalize_advantages =
        kv.get_bool("ppo_normalize_advantages", p.ppo.normalize_advantages);
  }
  kv.ensure_all_consumed();
  config.validate();
  return config;
}

std::string resolve_output_dir(const ExperimentConfig& config, const std::string& name) {
  if (!config.output_dir.empty()) return config.output_dir;
  const char* root = std::getenv("TEAMLAB_OUTPUT_ROOT");
  return std::string(root ? root : "runs") + "/" + name;
}

metrics::IpdRecord run_ipd_trial(const IpdParams& params, const TeamPartition& partition,
                                 std::uint64_t seed, const std::string& config_hash) {
  const ipd::IPDConfig& env = params.env;
  env.validate();
  const int n = env.n_agents;
  const int k = partition.num_teams();
  Rng rng(seed);

  learn::EpsilonSchedule schedule;
  schedule.start = params.eps_start;
  schedule.floor = params.eps_floor;
  schedule.decay_steps =
      std::lround(params.eps_decay_fraction * static_cast<double>(env.episodes));

  std::vector<learn::QTable> tables;
  tables.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    tables.emplace_back(k, 2, params.alpha, params.gamma, schedule);
    if (params.q_init != 0.0) {
      for (int s = 0; s < k; ++s) {
        tables.back().set_value(s, 0, params.q_init);
        tables.back().set_value(s, 1, params.q_init);
      }
    }
  }

  struct Pending {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    bool live = false;
  };
  std::vector<Pending> pending(static_cast<std::size_t>(n));

  metrics::IpdRecord record;
  record.n_agents = n;
  record.episodes = env.episodes;
  record.seed = seed;
  record.config_hash = config_hash;
  record.pop_raw.reserve(static_cast<std::size_t>(env.episodes));
  record.participations.reserve(static_cast<std::size_t>(env.episodes));
  record.coop_teammate.reserve(static_cast<std::size_t>(env.episodes));
  record.count_teammate.reserve(static_cast<std::size_t>(env.episodes));
  record.coop_other.reserve(static_cast<std::size_t>(env.episodes));
  record.count_other.reserve(static_cast<std::size_t>(env.episodes));
  record.agent_participations.assign(static_cast<std::size_t>(n), 0);
  record.agent_focal_teammate_draws.assign(static_cast<std::size_t>(n), 0);
  record.agent_raw_sum.assign(static_cast<std::size_t>(n), 0.0);
  record.agent_team_sum.assign(static_cast<std::size_t>(n), 0.0);

  ipd::EpisodeResult episode;
  for (long e = 0; e < env.episodes; ++e) {
    ipd::run_episode_into(
        env, partition,
        [&](int agent, ipd::TeamSignal signal, Rng& r) {
          const int a = tables[static_cast<std::size_t>(agent)].select(signal, e, r);
          return a == 0 ? ipd::Action::Cooperate : ipd::Action::Defect;
        },
        rng, episode);

    double pop = 0.0;
    for (double v : episode.raw) pop += v;
    int coop_t = 0, count_t = 0, coop_o = 0, count_o = 0;

    auto process = [&](int agent, int counterpart, ipd::Action act) {
      const ipd::TeamSignal signal = ipd::observe(agent, counterpart, partition);
      const bool teammate = partition.team_of(agent) == partition.team_of(counterpart);
      if (teammate) {
        ++count_t;
        if (act == ipd::Action::Cooperate) ++coop_t;
      } else {
        ++count_o;
        if (act == ipd::Action::Cooperate) ++coop_o;
      }
      auto& p = pending[static_cast<std::size_t>(agent)];
      if (p.live) {
        tables[static_cast<std::size_t>(agent)].update(
            {p.state, p.action, p.reward, signal, false});
      }
      p.state = signal;
      p.action = act == ipd::Action::Cooperate ? 0 : 1;
      p.reward = episode.team[static_cast<std::size_t>(agent)];
      p.live = true;
      ++record.agent_participations[static_cast<std::size_t>(agent)];
    };

    for (const auto& inter : episode.interactions) {
      process(inter.focal, inter.counterpart, inter.action_focal);
      process(inter.counterpart, inter.focal, inter.action_counterpart);
      if (partition.team_of(inter.focal) == partition.team_of(inter.counterpart)) {
        ++record.agent_focal_teammate_draws[static_cast<std::size_t>(inter.focal)];
      }
    }

    for (int i = 0; i < n; ++i) {
      record.agent_raw_sum[static_cast<std::size_t>(i)] +=
          episode.raw[static_cast<std::size_t>(i)];
      record.agent_team_sum[static_cast<std::size_t>(i)] +=
          episode.team[static_cast<std::size_t>(i)];
    }
    record.pop_raw.push_back(pop);
    record.participations.push_back(static_cast<int>(2 * episode.interactions.size()));
    record.coop_teammate.push_back(coop_t);
    record.count_teammate.push_back(count_t);
    record.coop_other.push_back(coop_o);
    record.count_other.push_back(count_o);
  }
  return record;
}

metrics::CleanupRecord run_cleanup_trial(const CleanupParams& params,
                                         const TeamPartition& partition,
                                         std::uint64_t seed,
                                         const std::string& config_hash) {
  const cleanup::CleanupConfig& env = params.env;
  env.validate();
  params.ppo.validate();
  const int n = env.n_agents;
  const long episodes = params.timesteps / env.episode_length;
  if (episodes < 1) throw std::invalid_argument("timesteps cover no full episode");

  Rng master(seed);
  std::vector<Rng> agent_rng;
  agent_rng.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) agent_rng.push_back(master.spawn());

  ppo::NetShape shape;
  shape.obs_dim = cleanup::observation_size(env);
  shape.hidden1 = params.hidden1;
  shape.hidden2 = params.hidden2;
  shape.n_actions = cleanup::kNumActions;

  std::vector<ppo::PolicyValueNet> nets;
  std::vector<ppo::Adam> optimizers;
  nets.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    nets.emplace_back(shape);
    nets.back().init(agent_rng[static_cast<std::size_t>(i)]);
    optimizers.emplace_back(nets.back().num_params());
  }

  metrics::CleanupRecord record;
  record.n_agents = n;
  record.episodes = episodes;
  record.steps_per_episode = env.episode_length;
  record.seed = seed;
  record.config_hash = config_hash;
  auto grid2d = [&](std::vector<std::vector<double>>& v) {
    v.assign(static_cast<std::size_t>(episodes),
             std::vector<double>(static_cast<std::size_t>(n), 0.0));
  };
  grid2d(record.apples);
  grid2d(record.cleans);
  grid2d(record.punishes);
  grid2d(record.raw_reward);
  grid2d(record.team_reward);

  std::vector<std::vector<ppo::Transition>> rollouts(static_cast<std::size_t>(n));
  std::vector<cleanup::CleanupAction> actions(static_cast<std::size_t>(n));
  std::vector<double> log_probs(static_cast<std::size_t>(n));
  std::vector<double> values(static_cast<std::size_t>(n));
  std::vector<std::vector<double>> observations(static_cast<std::size_t>(n));

  for (long ep = 0; ep < episodes; ++ep) {
    cleanup::GridState state = cleanup::initial_state(env, master);
    for (auto& r : rollouts) {
      r.clear();
      r.reserve(static_cast<std::size_t>(env.episode_length));
    }
    auto& ep_apples = record.apples[static_cast<std::size_t>(ep)];
    auto& ep_cleans = record.cleans[static_cast<std::size_t>(ep)];
    auto& ep_punish = record.punishes[static_cast<std::size_t>(ep)];
    auto& ep_raw = record.raw_reward[static_cast<std::size_t>(ep)];
    auto& ep_team = record.team_reward[static_cast<std::size_t>(ep)];

    for (int t = 0; t < env.episode_length; ++t) {
      for (int i = 0; i < n; ++i) {
        const auto si = static_cast<std::size_t>(i);
        observations[si] = cleanup::observe(state, i, env, partition);
        const auto fw = nets[si].forward(observations[si]);
        const int a = ppo::sample_action(fw, agent_rng[si]);
        actions[si] = static_cast<cleanup::CleanupAction>(a);
        log_probs[si] = ppo::log_prob_of(fw, a);
        values[si] = fw.value;
      }
      const cleanup::StepResult res = cleanup::step(state, actions, env, master);
      const RewardVector team = apply_team_transform(partition, res.raw);
      const bool last = t + 1 == env.episode_length;
      for (int i = 0; i < n; ++i) {
        const auto si = static_cast<std::size_t>(i);
        ppo::Transition tr;
        tr.obs = std::move(observations[si]);
        tr.action = static_cast<int>(actions[si]);
        tr.reward = team[si];
        tr.done = last;
        tr.log_prob = log_probs[si];
        tr.value = values[si];
        rollouts[si].push_back(std::move(tr));
        ep_apples[si] += res.apples[si];
        ep_cleans[si] += res.cleaned[si];
        ep_punish[si] += res.punished[si];
        ep_raw[si] += res.raw[si];
        ep_team[si] += team[si];
      }
    }
    for (int i = 0; i < n; ++i) {
      const auto si = static_cast<std::size_t>(i);
      ppo::ppo_update(nets[si], rollouts[si], params.ppo, optimizers[si], agent_rng[si]);
    }
  }
  return record;
}

namespace {

struct IpdTrialArtifacts {
  TrialSummary summary;
  metrics::RateSeries rates;
  std::vector<double> window_reward;  // normalized reward per window
};

IpdTrialArtifacts summarize_ipd(const metrics::IpdRecord& record,
                                const IpdParams& params, int trial,
                                std::uint64_t seed) {
  IpdTrialArtifacts art;
  art.summary.trial = trial;
  art.summary.seed = seed;
  art.summary.normalized_reward = metrics::normalized_reward(
      metrics::last_quartile_mean_reward(record), params.env.benefit, params.env.cost);

  const long episodes = record.episodes;
  const std::size_t start = static_cast<std::size_t>(episodes - episodes / 4);
  long coop_t = 0, count_t = 0, coop_o = 0, count_o = 0;
  for (std::size_t e = start; e < static_cast<std::size_t>(episodes); ++e) {
    coop_t += record.coop_teammate[e];
    count_t += record.count_teammate[e];
    coop_o += record.coop_other[e];
    count_o += record.count_other[e];
  }
  art.summary.coop_teammate =
      count_t > 0 ? static_cast<double>(coop_t) / static_cast<double>(count_t) : kNan;
  art.summary.coop_other =
      count_o > 0 ? static_cast<double>(coop_o) / static_cast<double>(count_o) : kNan;

  // Equality over per-agent mean per-interaction team rewards, shifted up by
  // the cost floor so the Gini denominator stays positive.
  RewardVector shifted(static_cast<std::size_t>(record.n_agents), 0.0);
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    const double parts = static_cast<double>(record.agent_participations[i]);
    const double mean = parts > 0.0 ? record.agent_team_sum[i] / parts : 0.0;
    shifted[i] = mean + params.env.cost;
  }
  const auto eq = metrics::equality(shifted);
  art.summary.equality = eq.has_value() ? *eq : kNan;

  art.rates = metrics::cooperation_rates(record, params.coop_window);
  const std::size_t windows = art.rates.teammate.size();
  art.window_reward.resize(windows, kNan);
  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t lo = w * static_cast<std::size_t>(params.coop_window);
    const std::size_t hi = std::min(static_cast<std::size_t>(episodes),
                                    lo + static_cast<std::size_t>(params.coop_window));
    double raw = 0.0;
    long parts = 0;
    for (std::size_t e = lo; e < hi; ++e) {
      raw += record.pop_raw[e];
      parts += record.participations[e];
    }
    if (parts > 0) {
      art.window_reward[w] = metrics::normalized_reward(
          raw / static_cast<double>(parts), params.env.benefit, params.env.cost);
    }
  }
  return art;
}

TrialSummary summarize_cleanup(const metrics::CleanupRecord& record, int trial,
                               std::uint64_t seed) {
  TrialSummary s;
  s.trial = trial;
  s.seed = seed;
  const long episodes = record.episodes;
  const std::size_t start = static_cast<std::size_t>(episodes - episodes / 4);
  double pop = 0.0;
  RewardVector team_totals(static_cast<std::size_t>(record.n_agents), 0.0);
  for (std::size_t e = start; e < static_cast<std::size_t>(episodes); ++e) {
    for (std::size_t i = 0; i < team_totals.size(); ++i) {
      pop += record.raw_reward[e][i];
      team_totals[i] += record.team_reward[e][i];
    }
  }
  const double quartile_eps = static_cast<double>(episodes - static_cast<long>(start));
  s.population_reward = quartile_eps > 0 ? pop / quartile_eps : kNan;
  const auto eq = metrics::equality(team_totals);
  s.equality = eq.has_value() ? *eq : kNan;
  for (std::size_t e = 0; e < static_cast<std::size_t>(episodes); ++e) {
    for (std::size_t i = 0; i < team_totals.size(); ++i) {
      s.apples_total += record.apples[e][i];
      s.cleans_total += record.cleans[e][i];
      s.punishes_total += record.punishes[e][i];
    }
  }
  s.normalized_reward = kNan;
  s.coop_teammate = kNan;
  s.coop_other = kNan;
  return s;
}

void write_aggregate(const std::string& path, const ExperimentConfig& config,
                     const std::vector<TrialSummary>& trials) {
  csv::Writer w(path, {"environment", "structure", "benefit", "cost", "trials",
                       "metric", "mean", "ci_half"});
  const bool is_ipd = config.environment == Environment::Ipd;
  const std::string b = is_ipd ? csv::format_double(config.ipd.env.benefit) : "";
  const std::string c = is_ipd ? csv::format_double(config.ipd.env.cost) : "";

  auto emit = [&](const std::string& metric, auto getter) {
    std::vector<double> xs;
    for (const auto& t : trials) {
      const double v = getter(t);
      if (std::isfinite(v)) xs.push_back(v);
    }
    if (xs.empty()) return;
    std::string mean, half;
    if (xs.size() >= 2) {
      const auto ci = metrics::confidence_interval(xs, 0.95);
      mean = csv::format_double(ci.mean);
      half = csv::format_double(ci.half_width);
    } else {
      mean = csv::format_double(mean_of(xs));
    }
    w.row({to_string(config.environment), config.structure, b, c,
           std::to_string(xs.size()), metric, mean, half});
  };

  if (is_ipd) {
    emit("normalized_reward", [](const TrialSummary& t) { return t.normalized_reward; });
    emit("coop_teammate", [](const TrialSummary& t) { return t.coop_teammate; });
    emit("coop_other", [](const TrialSummary& t) { return t.coop_other; });
    emit("equality", [](const TrialSummary& t) { return t.equality; });
  } else {
    emit("population_reward", [](const TrialSummary& t) { return t.population_reward; });
    emit("equality", [](const TrialSummary& t) { return t.equality; });
    emit("apples_total", [](const TrialSummary& t) { return t.apples_total; });
    emit("cleans_total", [](const TrialSummary& t) { return t.cleans_total; });
    emit("punishes_total", [](const TrialSummary& t) { return t.punishes_total; });
  }
  w.close();
}

void write_manifest(const std::string& dir, const ExperimentConfig& config,
                    const std::vector<std::string>& files, double wall_seconds) {
  nlohmann::json j;
  j["tool"] = "teamlab";
  j["version"] = kToolVersion;
  j["compiler"] = __VERSION__;
  j["config"] = config.canonical_lines();
  j["config_hash"] = config.config_hash();
  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < config.trials; ++k) seeds.push_back(config.base_seed + k);
  j["seeds"] = seeds;
  nlohmann::json outputs = nlohmann::json::object();
  for (const auto& f : files) {
    outputs[f] = hex64(fnv1a_file(dir + "/" + f));
  }
  j["outputs"] = outputs;
  j["wall_clock_seconds"] = wall_seconds;
  std::ofstream out(dir + "/manifest.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest in " + dir);
  out << j.dump(2) << '\n';
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  std::string leaf =
      std::string(to_string(config.environment)) + "_" + sanitize(config.structure);
  if (config.environment == Environment::Ipd) {
    leaf += "_b" + csv::format_double(config.ipd.env.benefit);
  }
  const std::string dir = resolve_output_dir(config, leaf);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory: " + dir);
  }

  ExperimentResult result;
  result.config = config;
  result.output_dir = dir;
  const std::string hash = config.config_hash();

  if (config.environment == Environment::Ipd) {
    const TeamPartition partition =
        parse_structure(config.structure, config.ipd.env.n_agents);
    csv::Writer summary(dir + "/summary.csv",
                        {"environment", "structure", "benefit", "cost", "trial",
                         "seed", "episodes", "normalized_reward", "coop_teammate",
                         "coop_other", "equality"});
    csv::Writer series(dir + "/timeseries.csv",
                       {"structure", "benefit", "cost", "trial", "window_start",
                        "window_end", "coop_teammate", "coop_other",
                        "window_normalized_reward"});
    for (int k = 0; k < config.trials; ++k) {
      const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(k);
      const auto record = run_ipd_trial(config.ipd, partition, seed, hash);
      const auto art = summarize_ipd(record, config.ipd, k, seed);
      result.trials.push_back(art.summary);
      summary.row({to_string(config.environment), config.structure,
                   csv::format_double(config.ipd.env.benefit),
                   csv::format_double(config.ipd.env.cost), std::to_string(k),
                   std::to_string(seed), std::to_string(record.episodes),
                   csv::format_double(art.summary.normalized_reward),
                   cell(art.summary.coop_teammate), cell(art.summary.coop_other),
                   cell(art.summary.equality)});
      for (std::size_t w = 0; w < art.rates.teammate.size(); ++w) {
        const long lo = static_cast<long>(w) * config.ipd.coop_window;
        const long hi = std::min(record.episodes,
                                 lo + static_cast<long>(config.ipd.coop_window));
        series.row({config.structure, csv::format_double(config.ipd.env.benefit),
                    csv::format_double(config.ipd.env.cost), std::to_string(k),
                    std::to_string(lo), std::to_string(hi),
                    cell(art.rates.teammate[w]), cell(art.rates.nonteammate[w]),
                    cell(art.window_reward[w])});
      }
    }
    summary.close();
    series.close();
    result.output_files = {"summary.csv", "timeseries.csv", "aggregate.csv"};
  } else {
    const TeamPartition partition =
        parse_structure(config.structure, config.cleanup.env.n_agents);
    csv::Writer summary(dir + "/summary.csv",
                        {"environment", "structure", "trial", "seed", "episodes",
                         "steps_per_episode", "population_reward", "equality",
                         "apples_total", "cleans_total", "punishes_total"});
    csv::Writer series(dir + "/timeseries.csv",
                       {"structure", "trial", "episode", "population_reward",
                        "apples", "cleans", "punishes"});
    csv::Writer labor(dir + "/labor.csv",
                      {"structure", "trial", "episode", "agent", "apples", "cleans"});
    for (int k = 0; k < config.trials; ++k) {
      const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(k);
      const auto record = run_cleanup_trial(config.cleanup, partition, seed, hash);
      const auto s = summarize_cleanup(record, k, seed);
      result.trials.push_back(s);
      summary.row({to_string(config.environment), config.structure, std::to_string(k),
                   std::to_string(seed), std::to_string(record.episodes),
                   std::to_string(record.steps_per_episode),
                   cell(s.population_reward), cell(s.equality),
                   csv::format_double(s.apples_total),
                   csv::format_double(s.cleans_total),
                   csv::format_double(s.punishes_total)});
      for (long e = 0; e < record.episodes; ++e) {
        const auto se = static_cast<std::size_t>(e);
        double pop = 0.0, apples = 0.0, cleans = 0.0, punishes = 0.0;
        for (int i = 0; i < record.n_agents; ++i) {
          const auto si = static_cast<std::size_t>(i);
          pop += record.raw_reward[se][si];
          apples += record.apples[se][si];
          cleans += record.cleans[se][si];
          punishes += record.punishes[se][si];
        }
        series.row({config.structure, std::to_string(k), std::to_string(e),
                    csv::format_double(pop), csv::format_double(apples),
                    csv::format_double(cleans), csv::format_double(punishes)});
        for (int i = 0; i < record.n_agents; ++i) {
          const auto si = static_cast<std::size_t>(i);
          labor.row({config.structure, std::to_string(k), std::to_string(e),
                     std::to_string(i), csv::format_double(record.apples[se][si]),
                     csv::format_double(record.cleans[se][si])});
        }
      }
    }
    summary.close();
    series.close();
    labor.close();
    result.output_files = {"summary.csv", "timeseries.csv", "labor.csv",
                           "aggregate.csv"};
  }

  write_aggregate(dir + "/aggregate.csv", config, result.trials);
  const auto t1 = std::chrono::steady_clock::now();
  write_manifest(dir, config, result.output_files,
                 std::chrono::duration<double>(t1 - t0).count());
  return result;
}

void run_grid(const ExperimentConfig& base, const GridSpec& grid,
              const std::string& output_dir) {
  if (base.environment != Environment::Ipd) {
    throw std::invalid_argument("grid sweeps are defined for the ipd environment");
  }
  if (grid.benefits.empty() && !grid.structures.empty()) {
    throw std::invalid_argument("grid needs at least one benefit value");
  }
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec || !fs::is_directory(output_dir)) {
    throw std::runtime_error("cannot create output directory: " + output_dir);
  }

  struct CellResult {
    std::string structure;
    double benefit;
    std::vector<TrialSummary> trials;
  };
  std::vector<CellResult> cells;
  for (const auto& s : grid.structures) {
    for (double b : grid.benefits) {
      ExperimentConfig sub = base;
      sub.structure = s;
      sub.ipd.env.benefit = b;
      sub.output_dir = output_dir + "/" + sanitize(s) + "_b" + csv::format_double(b);
      sub.validate();
      const auto res = run_experiment(sub);
      cells.push_back({s, b, res.trials});
    }
  }

  csv::Writer w(output_dir + "/grid_summary.csv",
                {"structure", "benefit", "cost", "trials", "normalized_reward_mean",
                 "normalized_reward_ci", "coop_teammate_mean", "coop_teammate_ci",
                 "coop_other_mean", "coop_other_ci", "equality_mean", "equality_ci"});
  auto ci_cells = [&](const std::vector<TrialSummary>& trials, auto getter,
                      std::string& mean, std::string& half) {
    std::vector<double> xs;
    for (const auto& t : trials) {
      const double v = getter(t);
      if (std::isfinite(v)) xs.push_back(v);
    }
    if (xs.empty()) {
      mean.clear();
      half.clear();
    } else if (xs.size() == 1) {
      mean = csv::format_double(xs[0]);
      half.clear();
    } else {
      const auto ci = metrics::confidence_interval(xs, 0.95);
      mean = csv::format_double(ci.mean);
      half = csv::format_double(ci.half_width);
    }
  };
  for (const auto& cellr : cells) {
    std::string rm, rh, tm, th, om, oh, em, eh;
    ci_cells(cellr.trials, [](const TrialSummary& t) { return t.normalized_reward; }, rm, rh);
    ci_cells(cellr.trials, [](const TrialSummary& t) { return t.coop_teammate; }, tm, th);
    ci_cells(cellr.trials, [](const TrialSummary& t) { return t.coop_other; }, om, oh);
    ci_cells(cellr.trials, [](const TrialSummary& t) { return t.equality; }, em, eh);
    w.row({cellr.structure, csv::format_double(cellr.benefit),
           csv::format_double(base.ipd.env.cost),
           std::to_string(cellr.trials.size()), rm, rh, tm, th, om, oh, em, eh});
  }
  w.close();

  std::vector<std::pair<double, double>> bc_pairs;
  for (double b : grid.benefits) bc_pairs.emplace_back(b, base.ipd.env.cost);
  const auto entries =
      incentives::incentive_table(grid.structures, base.ipd.env.n_agents, bc_pairs);
  {
    std::ofstream inc(output_dir + "/incentives.csv", std::ios::binary);
    if (!inc) throw std::runtime_error("cannot write incentives.csv in " + output_dir);
    incentives::write_incentive_csv(inc, entries);
  }

  std::ofstream table(output_dir + "/grid_table.txt", std::ios::binary);
  if (!table) throw std::runtime_error("cannot write grid_table.txt in " + output_dir);
  std::vector<double> benefits_desc = grid.benefits;
  std::sort(benefits_desc.rbegin(), benefits_desc.rend());
  table << "normalized reward by structure (mean over trials, final quartile)\n";
  table << "         ";
  for (const auto& s : grid.structures) {
    char buf[16];
    std::snprintf(buf, sizeof buf, " %8s", s.c_str());
    table << buf;
  }
  table << '\n';
  for (double b : benefits_desc) {
    char head[16];
    std::snprintf(head, sizeof head, "b=%-7g", b);
    table << head;
    for (const auto& s : grid.structures) {
      std::vector<double> xs;
      for (const auto& cellr : cells) {
        if (cellr.structure == s && cellr.benefit == b) {
          for (const auto& t : cellr.trials) {
            if (std::isfinite(t.normalized_reward)) xs.push_back(t.normalized_reward);
          }
        }
      }
      char buf[16];
      if (xs.empty()) {
        std::snprintf(buf, sizeof buf, " %8s", "-");
      } else {
        std::snprintf(buf, sizeof buf, " %8.3f", mean_of(xs));
      }
      table << buf;
    }
    table << '\n';
  }
  table << '\n' << incentives::format_incentive_table(entries);
}

namespace {

double to_number(const std::string& text) {
  if (text.empty()) return kNan;
  return std::stod(text);
}

std::vector<double> smooth(const std::vector<double>& xs, int window) {
  if (window <= 1) return xs;
  std::vector<double> out(xs.size(), kNan);
  const int half = window / 2;
  for (int i = 0; i < static_cast<int>(xs.size()); ++i) {
    double sum = 0.0;
    int count = 0;
    for (int j = std::max(0, i - half);
         j <= std::min(static_cast<int>(xs.size()) - 1, i + half); ++j) {
      if (std::isfinite(xs[static_cast<std::size_t>(j)])) {
        sum += xs[static_cast<std::size_t>(j)];
        ++count;
      }
    }
    if (count > 0) out[static_cast<std::size_t>(i)] = sum / count;
  }
  return out;
}

}  // namespace

std::vector<std::string> emit_plots(const std::string& dir) {
  std::vector<std::string> made;
  auto have = [&](const char* name) { return fs::exists(dir + "/" + name); };

  if (have("grid_summary.csv")) {
    const auto t = csv::read(dir + "/grid_summary.csv");
    const int cs = t.require_column("structure");
    const int cb = t.require_column("benefit");
    const int cm = t.require_column("normalized_reward_mean");
    const int cw = t.require_column("normalized_reward_ci");
    std::vector<std::string> structures;
    std::vector<double> benefits;
    for (const auto& r : t.rows) {
      if (std::find(structures.begin(), structures.end(), r[cs]) == structures.end()) {
        structures.push_back(r[cs]);
      }
      const double b = to_number(r[cb]);
      if (std::find(benefits.begin(), benefits.end(), b) == benefits.end()) {
        benefits.push_back(b);
      }
    }
    std::sort(benefits.rbegin(), benefits.rend());
    std::vector<svg::BarSeries> series;
    for (double b : benefits) {
      svg::BarSeries s;
      s.label = "b=" + csv::format_double(b);
      s.values.assign(structures.size(), kNan);
      s.half_widths.assign(structures.size(), 0.0);
      for (const auto& r : t.rows) {
        if (to_number(r[cb]) != b) continue;
        const auto it = std::find(structures.begin(), structures.end(), r[cs]);
        const auto idx = static_cast<std::size_t>(it - structures.begin());
        s.values[idx] = to_number(r[cm]);
        const double hw = to_number(r[cw]);
        s.half_widths[idx] = std::isfinite(hw) ? hw : 0.0;
      }
      series.push_back(std::move(s));
    }
    svg::bar_chart(dir + "/reward_by_structure.svg",
                   "Normalized population reward by team structure",
                   "normalized reward", structures, series);
    made.push_back("reward_by_structure.svg");
  }

  if (have("incentives.csv")) {
    const auto t = csv::read(dir + "/incentives.csv");
    const int cs = t.require_column("structure");
    const int cb = t.require_column("benefit");
    const int cm = t.require_column("margin");
    std::vector<std::string> structures;
    std::vector<double> benefits;
    for (const auto& r : t.rows) {
      if (std::find(structures.begin(), structures.end(), r[cs]) == structures.end()) {
        structures.push_back(r[cs]);
      }
      const double b = to_number(r[cb]);
      if (std::find(benefits.begin(), benefits.end(), b) == benefits.end()) {
        benefits.push_back(b);
      }
    }
    std::sort(benefits.rbegin(), benefits.rend());
    std::vector<svg::BarSeries> series;
    for (double b : benefits) {
      svg::BarSeries s;
      s.label = "b=" + csv::format_double(b);
      s.values.assign(structures.size(), kNan);
      for (const auto& r : t.rows) {
        if (to_number(r[cb]) != b) continue;
        const auto it = std::find(structures.begin(), structures.end(), r[cs]);
        s.values[static_cast<std::size_t>(it - structures.begin())] = to_number(r[cm]);
      }
      series.push_back(std::move(s));
    }
    svg::bar_chart(dir + "/incentive_margins.svg",
                   "Stage-game incentive margin by team structure",
                   "margin (>= 0 favors cooperation)", structures, series);
    made.push_back("incentive_margins.svg");
  }

  if (have("timeseries.csv")) {
    const auto t = csv::read(dir + "/timeseries.csv");
    if (t.column("window_start") >= 0) {
      const int cs = t.require_column("structure");
      const int cb = t.require_column("benefit");
      const int ct = t.require_column("trial");
      const int cw = t.require_column("window_start");
      const int cmt = t.require_column("coop_teammate");
      const int cmo = t.require_column("coop_other");
      std::map<std::pair<std::string, std::string>,
               std::map<long, std::pair<std::vector<double>, std::vector<double>>>>
          groups;
      for (const auto& r : t.rows) {
        auto& per_window = groups[{r[cs], r[cb]}][std::stol(r[cw])];
        const double mt = to_number(r[cmt]);
        const double mo = to_number(r[cmo]);
        if (std::isfinite(mt)) per_window.first.push_back(mt);
        if (std::isfinite(mo)) per_window.second.push_back(mo);
        (void)ct;
      }
      for (const auto& [key, windows] : groups) {
        svg::Series teammate{"teammates", {}, {}};
        svg::Series other{"non-teammates", {}, {}};
        for (const auto& [start, pair] : windows) {
          teammate.xs.push_back(static_cast<double>(start));
          teammate.ys.push_back(pair.first.empty() ? kNan : mean_of(pair.first));
          other.xs.push_back(static_cast<double>(start));
          other.ys.push_back(pair.second.empty() ? kNan : mean_of(pair.second));
        }
        const std::string name =
            "cooperation_" + sanitize(key.first) + "_b" + key.second + ".svg";
        svg::line_chart(dir + "/" + name,
                        "Cooperation rates, structure " + key.first + ", b=" +
                            key.second,
                        "episode", "cooperation rate", {teammate, other});
        made.push_back(name);
      }
    } else if (t.column("episode") >= 0) {
      const int ct = t.require_column("trial");
      const int ce = t.require_column("episode");
      const int cp = t.require_column("population_reward");
      std::map<long, std::vector<double>> per_episode;
      for (const auto& r : t.rows) {
        per_episode[std::stol(r[ce])].push_back(to_number(r[cp]));
        (void)ct;
      }
      svg::Series pop{"population reward", {}, {}};
      for (const auto& [e, xs] : per_episode) {
        pop.xs.push_back(static_cast<double>(e));
        pop.ys.push_back(mean_of(xs));
      }
      pop.ys = smooth(pop.ys, 25);
      svg::line_chart(dir + "/population_reward.svg",
                      "Population reward per episode (mean over trials)", "episode",
                      "population reward", {pop});
      made.push_back("population_reward.svg");
    }
  }

  if (have("labor.csv")) {
    const auto t = csv::read(dir + "/labor.csv");
    const int ct = t.require_column("trial");
    const int ce = t.require_column("episode");
    const int ca = t.require_column("agent");
    const int cap = t.require_column("apples");
    const int ccl = t.require_column("cleans");
    std::map<int, std::map<long, std::pair<double, double>>> per_agent;
    for (const auto& r : t.rows) {
      if (r[ct] != "0") continue;  // one representative trial keeps lines readable
      per_agent[std::stoi(r[ca])][std::stol(r[ce])] = {to_number(r[cap]),
                                                       to_number(r[ccl])};
    }
    std::vector<svg::Series> apples, cleans;
    for (const auto& [agent, series] : per_agent) {
      svg::Series sa{"agent " + std::to_string(agent), {}, {}};
      svg::Series sc = sa;
      for (const auto& [e, v] : series) {
        sa.xs.push_back(static_cast<double>(e));
        sa.ys.push_back(v.first);
        sc.xs.push_back(static_cast<double>(e));
        sc.ys.push_back(v.second);
      }
      sa.ys = smooth(sa.ys, 25);
      sc.ys = smooth(sc.ys, 25);
      apples.push_back(std::move(sa));
      cleans.push_back(std::move(sc));
    }
    svg::line_chart(dir + "/labor_apples.svg", "Apples per episode by agent (trial 0)",
                    "episode", "apples", apples);
    svg::line_chart(dir + "/labor_cleans.svg",
                    "Cleaning beams per episode by agent (trial 0)", "episode",
                    "clean beams", cleans);
    made.push_back("labor_apples.svg");
    made.push_back("labor_cleans.svg");
  }

  return made;
}

}  // namespace teamlab::experiment

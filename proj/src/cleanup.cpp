#include "teamlab/cleanup.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace teamlab::cleanup {

namespace {

struct Delta {
  int row;
  int col;
};

Delta forward(Orientation o) {
  switch (o) {
    case Orientation::North: return {-1, 0};
    case Orientation::East: return {0, 1};
    case Orientation::South: return {1, 0};
    case Orientation::West: return {0, -1};
  }
  throw std::logic_error("bad orientation");
}

Delta rightward(Orientation o) {
  Delta f = forward(o);
  return {f.col, -f.row};
}

Orientation turn_left(Orientation o) {
  return static_cast<Orientation>((static_cast<int>(o) + 3) % 4);
}

Orientation turn_right(Orientation o) {
  return static_cast<Orientation>((static_cast<int>(o) + 1) % 4);
}

}  // namespace

const char* to_string(CleanupAction a) {
  switch (a) {
    case CleanupAction::MoveUp: return "move_up";
    case CleanupAction::MoveDown: return "move_down";
    case CleanupAction::MoveLeft: return "move_left";
    case CleanupAction::MoveRight: return "move_right";
    case CleanupAction::Stay: return "stay";
    case CleanupAction::TurnLeft: return "turn_left";
    case CleanupAction::TurnRight: return "turn_right";
    case CleanupAction::FireClean: return "fire_clean";
    case CleanupAction::FirePunish: return "fire_punish";
  }
  throw std::logic_error("bad cleanup action");
}

std::vector<std::string> default_map() {
  std::vector<std::string> rows;
  for (int r = 0; r < 9; ++r) {
    rows.push_back("RRRRRRR    OOOOOOO");
  }
  return rows;
}

std::vector<std::string> parse_map(const std::string& text) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    rows.push_back(line);
  }
  while (!rows.empty() && rows.back().empty()) rows.pop_back();
  if (rows.empty()) throw std::invalid_argument("map text has no rows");
  const std::size_t width = rows.front().size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      throw std::invalid_argument("map row " + std::to_string(r) + " has width " +
                                  std::to_string(rows[r].size()) +
                                  " but row 0 has width " + std::to_string(width));
    }
    for (char ch : rows[r]) {
      if (ch != 'R' && ch != 'O' && ch != 'W' && ch != ' ') {
        throw std::invalid_argument(std::string("map contains invalid cell '") +
                                    ch + "' (allowed: R, O, W, space)");
      }
    }
  }
  if (width == 0) throw std::invalid_argument("map rows are empty");
  return rows;
}

std::vector<std::string> load_map_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open map file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_map(buf.str());
}

CleanupConfig::CleanupConfig() : map_rows(default_map()) {}

int CleanupConfig::width() const {
  return map_rows.empty() ? 0 : static_cast<int>(map_rows.front().size());
}

int CleanupConfig::height() const { return static_cast<int>(map_rows.size()); }

void CleanupConfig::validate() const {
  if (map_rows.empty()) throw std::invalid_argument("cleanup map is empty");
  const std::size_t w = map_rows.front().size();
  for (const auto& row : map_rows) {
    if (row.size() != w) throw std::invalid_argument("cleanup map is not rectangular");
  }
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument(std::string(name) + " must be in [0,1]");
    }
  };
  prob(waste_spawn_prob, "waste_spawn_prob");
  prob(apple_respawn_base, "apple_respawn_base");
  prob(depletion_threshold, "depletion_threshold");
  prob(initial_waste_density, "initial_waste_density");
  if (n_agents < 1) throw std::invalid_argument("n_agents must be >= 1");
  if (clean_beam_length < 1) throw std::invalid_argument("clean_beam_length must be >= 1");
  if (beam_width < 1 || beam_width % 2 == 0) {
    throw std::invalid_argument("beam_width must be a positive odd integer");
  }
  if (view_window < 1 || view_window % 2 == 0) {
    throw std::invalid_argument("view_window must be a positive odd integer");
  }
  if (episode_length < 1) throw std::invalid_argument("episode_length must be >= 1");
  if (punish_fine > 0.0 || punish_cost > 0.0) {
    throw std::invalid_argument("punish_fine and punish_cost are penalties and must be <= 0");
  }
  int walkable = 0;
  for (const auto& row : map_rows) {
    for (char ch : row) {
      if (ch != 'W') ++walkable;
    }
  }
  if (walkable < n_agents) {
    throw std::invalid_argument("map has " + std::to_string(walkable) +
                                " walkable cells for " + std::to_string(n_agents) +
                                " agents");
  }
}

int GridState::river_capacity() const {
  int n = 0;
  for (Region r : region) {
    if (r == Region::River) ++n;
  }
  return n;
}

int GridState::waste_count() const {
  int n = 0;
  for (Content c : content) {
    if (c == Content::Waste) ++n;
  }
  return n;
}

int GridState::apple_count() const {
  int n = 0;
  for (Content c : content) {
    if (c == Content::Apple) ++n;
  }
  return n;
}

double GridState::waste_density() const {
  const int cap = river_capacity();
  if (cap == 0) return 0.0;
  return static_cast<double>(waste_count()) / static_cast<double>(cap);
}

namespace {

bool occupied(const GridState& state, int row, int col) {
  for (const auto& a : state.agents) {
    if (a.row == row && a.col == col) return true;
  }
  return false;
}

}  // namespace

GridState initial_state(const CleanupConfig& config, Rng& rng) {
  config.validate();
  GridState state;
  state.width = config.width();
  state.height = config.height();
  state.region.resize(static_cast<std::size_t>(state.width) * state.height);
  state.content.assign(state.region.size(), Content::Empty);
  std::vector<std::size_t> river_cells;
  std::vector<std::pair<int, int>> open_cells;
  std::vector<std::pair<int, int>> walkable_cells;
  for (int r = 0; r < state.height; ++r) {
    for (int c = 0; c < state.width; ++c) {
      const std::size_t i = state.idx(r, c);
      switch (config.map_rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]) {
        case 'R':
          state.region[i] = Region::River;
          river_cells.push_back(i);
          break;
        case 'O':
          state.region[i] = Region::Orchard;
          break;
        case 'W':
          state.region[i] = Region::Wall;
          break;
        default:
          state.region[i] = Region::Open;
          open_cells.emplace_back(r, c);
          break;
      }
      if (state.region[i] != Region::Wall) walkable_cells.emplace_back(r, c);
    }
  }

  std::vector<std::size_t> shuffled = river_cells;
  rng.shuffle(shuffled);
  const int initial_waste = static_cast<int>(
      std::lround(config.initial_waste_density * static_cast<double>(river_cells.size())));
  for (int k = 0; k < initial_waste; ++k) {
    state.content[shuffled[static_cast<std::size_t>(k)]] = Content::Waste;
  }

  // Agents go on evenly spaced open cells; if the map lacks enough open
  // cells, fall back to evenly spaced walkable cells.
  const auto& sites =
      open_cells.size() >= static_cast<std::size_t>(config.n_agents) ? open_cells
                                                                     : walkable_cells;
  const int m = static_cast<int>(sites.size());
  state.agents.resize(static_cast<std::size_t>(config.n_agents));
  for (int i = 0; i < config.n_agents; ++i) {
    const int pick =
        config.n_agents == 1 ? 0 : i * (m - 1) / (config.n_agents - 1);
    auto [row, col] = sites[static_cast<std::size_t>(pick)];
    state.agents[static_cast<std::size_t>(i)] = {row, col, Orientation::North};
  }
  state.timestep = 0;
  return state;
}

void spawn_waste(GridState& state, const CleanupConfig& config, Rng& rng) {
  for (int r = 0; r < state.height; ++r) {
    for (int c = 0; c < state.width; ++c) {
      const std::size_t i = state.idx(r, c);
      if (state.region[i] != Region::River) continue;
      if (state.content[i] != Content::Empty) continue;
      if (occupied(state, r, c)) continue;
      if (rng.bernoulli(config.waste_spawn_prob)) state.content[i] = Content::Waste;
    }
  }
}

void spawn_apples(GridState& state, const CleanupConfig& config, Rng& rng) {
  const double density = state.waste_density();
  if (density > config.depletion_threshold) return;
  const double p = config.apple_respawn_base * (1.0 - density);
  if (p <= 0.0) return;
  for (int r = 0; r < state.height; ++r) {
    for (int c = 0; c < state.width; ++c) {
      const std::size_t i = state.idx(r, c);
      if (state.region[i] != Region::Orchard) continue;
      if (state.content[i] != Content::Empty) continue;
      if (occupied(state, r, c)) continue;
      if (rng.bernoulli(p)) state.content[i] = Content::Apple;
    }
  }
}

namespace {

// Applies one beam over a clean_beam_length x beam_width swath in front of
// the firing agent; each lateral line stops at the first wall it meets.
// visit is called for every reachable cell.
template <typename Visit>
void trace_beam(const GridState& state, const AgentPose& firer,
                const CleanupConfig& config, Visit&& visit) {
  const Delta f = forward(firer.facing);
  const Delta rt = rightward(firer.facing);
  const int half = config.beam_width / 2;
  for (int w = -half; w <= half; ++w) {
    for (int d = 1; d <= config.clean_beam_length; ++d) {
      const int row = firer.row + d * f.row + w * rt.row;
      const int col = firer.col + d * f.col + w * rt.col;
      if (!state.in_bounds(row, col)) break;
      if (state.region_at(row, col) == Region::Wall) break;
      visit(row, col);
    }
  }
}

}  // namespace

StepResult step(GridState& state, const std::vector<CleanupAction>& actions,
                const CleanupConfig& config, Rng& rng) {
  const int n = config.n_agents;
  if (static_cast<int>(actions.size()) != n) {
    throw std::invalid_argument("expected " + std::to_string(n) + " actions, got " +
                                std::to_string(actions.size()));
  }
  if (static_cast<int>(state.agents.size()) != n) {
    throw std::invalid_argument("state holds " + std::to_string(state.agents.size()) +
                                " agents but the config expects " + std::to_string(n));
  }
  if (state.timestep >= config.episode_length) {
    throw std::logic_error("stepping a finished episode (timestep " +
                           std::to_string(state.timestep) + " of " +
                           std::to_string(config.episode_length) + ")");
  }

  StepResult result;
  result.raw.assign(static_cast<std::size_t>(n), 0.0);
  result.apples.assign(static_cast<std::size_t>(n), 0);
  result.cleaned.assign(static_cast<std::size_t>(n), 0);
  result.punished.assign(static_cast<std::size_t>(n), 0);

  // 1. Turns.
  for (int i = 0; i < n; ++i) {
    auto& pose = state.agents[static_cast<std::size_t>(i)];
    if (actions[static_cast<std::size_t>(i)] == CleanupAction::TurnLeft) {
      pose.facing = turn_left(pose.facing);
    } else if (actions[static_cast<std::size_t>(i)] == CleanupAction::TurnRight) {
      pose.facing = turn_right(pose.facing);
    }
  }

  // 2. Moves.
  std::vector<std::pair<int, int>> cur(static_cast<std::size_t>(n));
  std::vector<std::pair<int, int>> prop(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& pose = state.agents[static_cast<std::size_t>(i)];
    cur[static_cast<std::size_t>(i)] = {pose.row, pose.col};
    int dr = 0, dc = 0;
    switch (actions[static_cast<std::size_t>(i)]) {
      case CleanupAction::MoveUp: dr = -1; break;
      case CleanupAction::MoveDown: dr = 1; break;
      case CleanupAction::MoveLeft: dc = -1; break;
      case CleanupAction::MoveRight: dc = 1; break;
      default: break;
    }
    const int tr = pose.row + dr;
    const int tc = pose.col + dc;
    if (state.in_bounds(tr, tc) && state.region_at(tr, tc) != Region::Wall) {
      prop[static_cast<std::size_t>(i)] = {tr, tc};
    } else {
      prop[static_cast<std::size_t>(i)] = cur[static_cast<std::size_t>(i)];
    }
  }

  bool changed = true;
  while (changed) {
    changed = false;
    // Contested cells: a stationary claimant keeps its cell, otherwise a
    // uniformly random mover wins and the rest bounce back.
    std::map<std::pair<int, int>, std::vector<int>> claims;
    for (int i = 0; i < n; ++i) claims[prop[static_cast<std::size_t>(i)]].push_back(i);
    for (auto& [cell, who] : claims) {
      if (who.size() < 2) continue;
      int winner = -1;
      for (int i : who) {
        if (prop[static_cast<std::size_t>(i)] == cur[static_cast<std::size_t>(i)]) {
          winner = i;
          break;
        }
      }
      if (winner < 0) {
        winner = who[static_cast<std::size_t>(rng.uniform_int(who.size()))];
      }
      for (int i : who) {
        if (i == winner) continue;
        if (prop[static_cast<std::size_t>(i)] != cur[static_cast<std::size_t>(i)]) {
          prop[static_cast<std::size_t>(i)] = cur[static_cast<std::size_t>(i)];
          changed = true;
        }
      }
    }
    if (changed) continue;
    // Swaps pass through each other, which is not allowed: both bounce.
    for (int i = 0; i < n && !changed; ++i) {
      for (int j = i + 1; j < n && !changed; ++j) {
        const auto si = static_cast<std::size_t>(i);
        const auto sj = static_cast<std::size_t>(j);
        if (prop[si] != cur[si] && prop[sj] != cur[sj] && prop[si] == cur[sj] &&
            prop[sj] == cur[si]) {
          prop[si] = cur[si];
          prop[sj] = cur[sj];
          changed = true;
        }
      }
    }
    if (changed) continue;
    // A mover cannot enter a cell whose occupant is staying put.
    for (int i = 0; i < n; ++i) {
      const auto si = static_cast<std::size_t>(i);
      if (prop[si] == cur[si]) continue;
      for (int j = 0; j < n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (j != i && cur[sj] == prop[si] && prop[sj] == cur[sj]) {
          prop[si] = cur[si];
          changed = true;
          break;
        }
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    auto& pose = state.agents[static_cast<std::size_t>(i)];
    pose.row = prop[static_cast<std::size_t>(i)].first;
    pose.col = prop[static_cast<std::size_t>(i)].second;
  }

  // 3. Beams.
  for (int i = 0; i < n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    const auto& pose = state.agents[si];
    if (actions[si] == CleanupAction::FireClean) {
      trace_beam(state, pose, config, [&](int row, int col) {
        const std::size_t cell = state.idx(row, col);
        if (state.content[cell] == Content::Waste) {
          state.content[cell] = Content::Empty;
          ++result.cleaned[si];
        }
      });
    } else if (actions[si] == CleanupAction::FirePunish) {
      result.raw[si] += config.punish_cost;
      trace_beam(state, pose, config, [&](int row, int col) {
        for (int j = 0; j < n; ++j) {
          const auto sj = static_cast<std::size_t>(j);
          if (j != i && state.agents[sj].row == row && state.agents[sj].col == col) {
            result.raw[sj] += config.punish_fine;
            ++result.punished[sj];
          }
        }
      });
    }
  }

  // 4. Consumption.
  for (int i = 0; i < n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    const auto& pose = state.agents[si];
    const std::size_t cell = state.idx(pose.row, pose.col);
    if (state.content[cell] == Content::Apple) {
      state.content[cell] = Content::Empty;
      result.raw[si] += 1.0;
      ++result.apples[si];
    }
  }

  // 5. Regrowth.
  spawn_waste(state, config, rng);
  spawn_apples(state, config, rng);

  // 6. Clock.
  ++state.timestep;
  return result;
}

void check_invariants(const GridState& state) {
  for (int r = 0; r < state.height; ++r) {
    for (int c = 0; c < state.width; ++c) {
      const std::size_t i = state.idx(r, c);
      if (state.content[i] == Content::Waste && state.region[i] != Region::River) {
        throw std::logic_error("waste outside the river at (" + std::to_string(r) +
                               "," + std::to_string(c) + ")");
      }
      if (state.content[i] == Content::Apple && state.region[i] != Region::Orchard) {
        throw std::logic_error("apple outside the orchard at (" + std::to_string(r) +
                               "," + std::to_string(c) + ")");
      }
      if (state.region[i] == Region::Wall && state.content[i] != Content::Empty) {
        throw std::logic_error("content on a wall cell");
      }
    }
  }
  for (std::size_t i = 0; i < state.agents.size(); ++i) {
    const auto& a = state.agents[i];
    if (!state.in_bounds(a.row, a.col)) {
      throw std::logic_error("agent " + std::to_string(i) + " out of bounds");
    }
    if (state.region_at(a.row, a.col) == Region::Wall) {
      throw std::logic_error("agent " + std::to_string(i) + " standing on a wall");
    }
    for (std::size_t j = i + 1; j < state.agents.size(); ++j) {
      if (state.agents[j].row == a.row && state.agents[j].col == a.col) {
        throw std::logic_error("agents " + std::to_string(i) + " and " +
                               std::to_string(j) + " share a cell");
      }
    }
  }
}

int observation_size(const CleanupConfig& config) {
  return config.view_window * config.view_window * kObsChannels;
}

std::vector<double> observe(const GridState& state, int agent,
                            const CleanupConfig& config,
                            const TeamPartition& partition) {
  if (agent < 0 || agent >= static_cast<int>(state.agents.size())) {
    throw std::out_of_range("observe: no agent " + std::to_string(agent));
  }
  const int view = config.view_window;
  const int half = view / 2;
  const std::size_t plane = static_cast<std::size_t>(view) * static_cast<std::size_t>(view);
  std::vector<double> obs(plane * kObsChannels, 0.0);

  const auto& me = state.agents[static_cast<std::size_t>(agent)];
  const Delta f = forward(me.facing);
  const Delta rt = rightward(me.facing);
  const int my_team = partition.team_of(agent);

  // Occupancy lookup for this frame.
  std::vector<int> occupant(static_cast<std::size_t>(state.width) * state.height, -1);
  for (std::size_t j = 0; j < state.agents.size(); ++j) {
    occupant[state.idx(state.agents[j].row, state.agents[j].col)] = static_cast<int>(j);
  }

  for (int ur = 0; ur < view; ++ur) {
    for (int uc = 0; uc < view; ++uc) {
      const int u = ur - half;  // negative = in front of the agent
      const int v = uc - half;  // positive = to the agent's right
      const int row = me.row + (-u) * f.row + v * rt.row;
      const int col = me.col + (-u) * f.col + v * rt.col;
      const std::size_t at = static_cast<std::size_t>(ur) * view + uc;
      if (!state.in_bounds(row, col) || state.region_at(row, col) == Region::Wall) {
        obs[at] = 1.0;  // wall channel
        continue;
      }
      const std::size_t cell = state.idx(row, col);
      if (state.content[cell] == Content::Waste) {
        obs[2 * plane + at] = 1.0;
      } else if (state.content[cell] == Content::Apple) {
        obs[3 * plane + at] = 1.0;
      } else if (state.region[cell] == Region::River) {
        obs[plane + at] = 1.0;  // clean river
      }
      const int who = occupant[cell];
      if (who >= 0) {
        if (partition.team_of(who) == my_team) {
          obs[4 * plane + at] = 1.0;
        } else {
          obs[5 * plane + at] = 1.0;
        }
      }
    }
  }
  return obs;
}

}  // namespace teamlab::cleanup

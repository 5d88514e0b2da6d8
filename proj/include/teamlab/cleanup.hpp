#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "teamlab/rng.hpp"
#include "teamlab/team.hpp"

namespace teamlab::cleanup {

enum class Region : std::uint8_t { Open, River, Orchard, Wall };
enum class Content : std::uint8_t { Empty, Waste, Apple };
enum class Orientation : std::uint8_t { North, East, South, West };

enum class CleanupAction : int {
  MoveUp = 0,
  MoveDown = 1,
  MoveLeft = 2,
  MoveRight = 3,
  Stay = 4,
  TurnLeft = 5,
  TurnRight = 6,
  FireClean = 7,
  FirePunish = 8,
};
inline constexpr int kNumActions = 9;

const char* to_string(CleanupAction a);

struct CleanupConfig {
  // Map rows, one character per cell: R river, O orchard, W wall, space open.
  std::vector<std::string> map_rows;

  int n_agents = 6;
  double waste_spawn_prob = 0.05;
  double apple_respawn_base = 0.05;
  double depletion_threshold = 0.4;
  double initial_waste_density = 0.5;
  int clean_beam_length = 5;
  int beam_width = 3;
  int view_window = 15;
  int episode_length = 1000;
  double punish_fine = -50.0;
  double punish_cost = -1.0;

  CleanupConfig();
  void validate() const;
  int width() const;
  int height() const;
};

// Built-in desk-scale map: river on the left, orchard on the right,
// an open corridor between them.
std::vector<std::string> default_map();

// Parses map text into rows, validating shape and characters.
std::vector<std::string> parse_map(const std::string& text);
std::vector<std::string> load_map_file(const std::string& path);

struct AgentPose {
  int row = 0;
  int col = 0;
  Orientation facing = Orientation::North;
};

struct GridState {
  int width = 0;
  int height = 0;
  std::vector<Region> region;    // row-major, fixed for the episode
  std::vector<Content> content;  // row-major, mutated every step
  std::vector<AgentPose> agents;
  int timestep = 0;

  std::size_t idx(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(col);
  }
  bool in_bounds(int row, int col) const {
    return row >= 0 && row < height && col >= 0 && col < width;
  }
  Region region_at(int row, int col) const { return region[idx(row, col)]; }
  Content content_at(int row, int col) const { return content[idx(row, col)]; }

  int river_capacity() const;
  int waste_count() const;
  int apple_count() const;
  double waste_density() const;
};

// Builds the initial state: map decoded, initial waste laid down, agents
// placed on evenly spaced open cells facing north.
GridState initial_state(const CleanupConfig& config, Rng& rng);

// Each empty river cell independently becomes waste with probability
// waste_spawn_prob.
void spawn_waste(GridState& state, const CleanupConfig& config, Rng& rng);

// Each empty orchard cell spawns an apple with probability
// apple_respawn_base * (1 - waste_density), unless waste_density exceeds
// depletion_threshold, in which case nothing spawns.
void spawn_apples(GridState& state, const CleanupConfig& config, Rng& rng);

struct StepResult {
  RewardVector raw;             // per-agent reward this step
  std::vector<int> apples;      // apples consumed per agent this step
  std::vector<int> cleaned;     // waste cells converted per agent this step
  std::vector<int> punished;    // punish-beam hits received per agent
};

// One synchronous transition:
//   turns -> moves (contested cells: uniformly random winner) -> beams ->
//   apple consumption -> spawn_waste -> spawn_apples -> timestep++.
StepResult step(GridState& state, const std::vector<CleanupAction>& actions,
                const CleanupConfig& config, Rng& rng);

// Throws std::logic_error if a structural invariant is violated: waste
// outside the river, apples outside the orchard, agents overlapping or on
// walls. Intended for test-time verification after every step.
void check_invariants(const GridState& state);

inline constexpr int kObsChannels = 6;

// Egocentric view_window x view_window window rotated so the agent's facing
// direction points up, flattened channel-major. Channels: wall, river, waste,
// apple, teammate (self included), non-teammate. Out-of-bounds reads as wall.
std::vector<double> observe(const GridState& state, int agent,
                            const CleanupConfig& config,
                            const TeamPartition& partition);

int observation_size(const CleanupConfig& config);

}  // namespace teamlab::cleanup

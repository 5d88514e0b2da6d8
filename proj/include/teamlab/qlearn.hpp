#pragma once

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "teamlab/rng.hpp"

namespace teamlab::learn {

// Linear decay from start to floor over the first decay_steps, then flat.
struct EpsilonSchedule {
  double start = 1.0;
  double floor = 0.01;
  long decay_steps = 10000;

  double at(long step) const {
    if (decay_steps <= 0 || step >= decay_steps) return floor;
    const double frac = static_cast<double>(step) / static_cast<double>(decay_steps);
    return start + (floor - start) * frac;
  }
};

struct QTransition {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
  bool done = false;
};

// Tabular action-value function over a small discrete state space.
class QTable {
 public:
  QTable(int n_states, int n_actions, double alpha, double gamma,
         EpsilonSchedule schedule)
      : n_states_(n_states),
        n_actions_(n_actions),
        alpha_(alpha),
        gamma_(gamma),
        schedule_(schedule),
        values_(static_cast<std::size_t>(n_states) * n_actions, 0.0) {
    if (n_states <= 0 || n_actions <= 0) {
      throw std::invalid_argument("QTable needs positive state/action counts");
    }
    if (!(alpha > 0.0) || alpha > 1.0) {
      throw std::invalid_argument("learning rate must be in (0, 1], got " +
                                  std::to_string(alpha));
    }
    if (gamma < 0.0 || gamma >= 1.0) {
      throw std::invalid_argument("discount must be in [0, 1), got " +
                                  std::to_string(gamma));
    }
  }

  double value(int state, int action) const {
    return values_[index(state, action)];
  }
  void set_value(int state, int action, double v) {
    values_[index(state, action)] = v;
  }

  double max_value(int state) const {
    const double* row = &values_[index(state, 0)];
    return *std::max_element(row, row + n_actions_);
  }

  int greedy_action(int state, Rng& rng) const {
    // Ties broken uniformly at random (reservoir over maximal entries).
    const double* row = &values_[index(state, 0)];
    double best = row[0];
    int chosen = 0;
    int ties = 1;
    for (int a = 1; a < n_actions_; ++a) {
      if (row[a] > best) {
        best = row[a];
        chosen = a;
        ties = 1;
      } else if (row[a] == best) {
        ++ties;
        if (rng.uniform_int(static_cast<std::uint32_t>(ties)) == 0) chosen = a;
      }
    }
    return chosen;
  }

  // Epsilon-greedy selection at the given schedule step.
  int select(int state, long step, Rng& rng) const {
    const double eps = schedule_.at(step);
    if (rng.uniform() < eps) {
      return static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(n_actions_)));
    }
    return greedy_action(state, rng);
  }

  void update(const QTransition& t) {
    double& q = values_[index(t.state, t.action)];
    const double bootstrap = t.done ? 0.0 : gamma_ * max_value(t.next_state);
    q += alpha_ * (t.reward + bootstrap - q);
  }

  int num_states() const { return n_states_; }
  int num_actions() const { return n_actions_; }
  double alpha() const { return alpha_; }
  double gamma() const { return gamma_; }
  const EpsilonSchedule& schedule() const { return schedule_; }

  // CSV dump: state, action, value.
  void write_csv(std::ostream& out) const;

 private:
  std::size_t index(int state, int action) const {
    if (state < 0 || state >= n_states_ || action < 0 || action >= n_actions_) {
      throw std::out_of_range("Q lookup (" + std::to_string(state) + ", " +
                              std::to_string(action) + ") outside table of " +
                              std::to_string(n_states_) + "x" +
                              std::to_string(n_actions_));
    }
    return static_cast<std::size_t>(state) * n_actions_ + action;
  }

  int n_states_;
  int n_actions_;
  double alpha_;
  double gamma_;
  EpsilonSchedule schedule_;
  std::vector<double> values_;
};

}  // namespace teamlab::learn

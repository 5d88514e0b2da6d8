#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "teamlab/rng.hpp"

namespace teamlab::ppo {

struct NetShape {
  int obs_dim = 0;
  int hidden1 = 64;
  int hidden2 = 64;
  int n_actions = 9;

  void validate() const;
};

// Two tanh hidden layers feeding a softmax policy head and a scalar value
// head. Parameters live in one flat vector so the optimizer and the
// finite-difference harness can treat the net as a plain function of theta.
class PolicyValueNet {
 public:
  explicit PolicyValueNet(NetShape shape);

  const NetShape& shape() const { return shape_; }
  std::size_t num_params() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  // Hidden layers get symmetric uniform fan-based init; both output heads
  // start at zero, so the initial policy is uniform and the initial value 0.
  void init(Rng& rng);

  struct Forward {
    std::vector<double> h1;      // post-tanh
    std::vector<double> h2;      // post-tanh
    std::vector<double> logits;  // n_actions
    std::vector<double> probs;   // softmax(logits)
    double value = 0.0;
  };

  Forward forward(const std::vector<double>& obs) const;

  // Accumulates dLoss/dtheta into grad (same length as params) given the
  // upstream gradients on the logits and the value output for one sample.
  void backward(const std::vector<double>& obs, const Forward& fw,
                const std::vector<double>& dlogits, double dvalue,
                std::vector<double>& grad) const;

  void save(const std::string& path) const;
  static PolicyValueNet load(const std::string& path);

 private:
  NetShape shape_;
  std::vector<double> params_;

  // Offsets into the flat parameter vector.
  std::size_t w1_, b1_, w2_, b2_, wp_, bp_, wv_, bv_;
};

struct PPOConfig {
  double clip = 0.2;
  double gamma = 0.99;
  double learning_rate = 1e-3;
  double value_coef = 0.5;
  // 0.01 lets policies pin to a single action and never recover; punish-spam
  // absorbing states showed up roughly once per eight cleanup trainings.
  double entropy_coef = 0.03;
  int epochs = 4;
  int minibatch = 256;
  bool normalize_advantages = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct Transition {
  std::vector<double> obs;
  int action = 0;
  double reward = 0.0;  // the team-transformed reward handed to the learner
  bool done = false;
  // Recorded at collection time under the behavior policy.
  double log_prob = 0.0;
  double value = 0.0;
};

struct Batch {
  std::vector<double> returns;     // discounted return-to-go per sample
  std::vector<double> advantages;  // return minus behavior value, optionally normalized
};

// Reverse-scans the rollout; done flags cut the discounting chain, so a
// buffer may hold several completed episodes back to back.
Batch prepare_batch(const std::vector<Transition>& rollout, const PPOConfig& config);

class Adam {
 public:
  explicit Adam(std::size_t n);
  void step(std::vector<double>& params, const std::vector<double>& grad,
            const PPOConfig& config);

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  std::vector<double> policy_grad_norms;  // one entry per inner epoch
  int minibatches = 0;
};

// Clipped-surrogate update: gradient steps on
//   mean(-min(rho*A, clip(rho, 1-clip, 1+clip)*A)
//        + value_coef*(V - G)^2 - entropy_coef*H(pi))
// over `epochs` shuffled minibatch passes. Throws std::runtime_error with
// diagnostics if a non-finite gradient appears.
UpdateStats ppo_update(PolicyValueNet& net, const std::vector<Transition>& rollout,
                       const PPOConfig& config, Adam& optimizer, Rng& rng);

// Compares the analytic gradient of the full PPO loss (behavior policy ==
// current parameters) against central finite differences with step h.
// Returns the maximum relative error across all parameters.
double finite_difference_check(PolicyValueNet& net,
                               const std::vector<Transition>& rollout,
                               const PPOConfig& config, double h);

// Draws an action from the forward pass's softmax distribution.
int sample_action(const PolicyValueNet::Forward& fw, Rng& rng);

// Numerically stable log pi(action) from the logits.
double log_prob_of(const PolicyValueNet::Forward& fw, int action);

}  // namespace teamlab::ppo

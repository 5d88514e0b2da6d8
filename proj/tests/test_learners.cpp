#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "teamlab/policy_net.hpp"
#include "teamlab/qlearn.hpp"

using namespace teamlab;
using learn::EpsilonSchedule;
using learn::QTable;
using learn::QTransition;

TEST_CASE("epsilon schedule decays linearly then holds the floor") {
  EpsilonSchedule s{1.0, 0.01, 100};
  CHECK(s.at(0) == doctest::Approx(1.0));
  CHECK(s.at(50) == doctest::Approx(0.505));
  CHECK(s.at(100) == doctest::Approx(0.01));
  CHECK(s.at(100000) == doctest::Approx(0.01));
  EpsilonSchedule flat{0.7, 0.1, 0};
  CHECK(flat.at(0) == doctest::Approx(0.1));
}

TEST_CASE("schedule is monotone nonincreasing") {
  EpsilonSchedule s{0.9, 0.05, 1234};
  double prev = s.at(0);
  for (long t = 1; t < 2000; t += 7) {
    const double e = s.at(t);
    CHECK(e <= prev + 1e-15);
    prev = e;
  }
}

TEST_CASE("q table constructor validates hyperparameters") {
  EpsilonSchedule s;
  CHECK_THROWS_AS(QTable(0, 2, 0.1, 0.9, s), std::invalid_argument);
  CHECK_THROWS_AS(QTable(2, 0, 0.1, 0.9, s), std::invalid_argument);
  CHECK_THROWS_AS(QTable(2, 2, 0.0, 0.9, s), std::invalid_argument);
  CHECK_THROWS_AS(QTable(2, 2, 1.5, 0.9, s), std::invalid_argument);
  CHECK_THROWS_AS(QTable(2, 2, 0.1, 1.0, s), std::invalid_argument);
  CHECK_THROWS_AS(QTable(2, 2, 0.1, -0.1, s), std::invalid_argument);
}

TEST_CASE("q update implements the tabular bellman step") {
  QTable q(2, 2, 0.5, 0.9, EpsilonSchedule{0.0, 0.0, 0});
  q.set_value(0, 0, 1.0);
  q.set_value(1, 0, 1.0);
  q.set_value(1, 1, 0.25);
  // Q <- Q + alpha*(r + gamma*max_next - Q) = 1 + 0.5*(0.5 + 0.9 - 1) = 1.2
  q.update({0, 0, 0.5, 1, false});
  CHECK(q.value(0, 0) == doctest::Approx(1.2).epsilon(1e-12));
  // Terminal: no bootstrap. 1.2 + 0.5*(0.5 - 1.2) = 0.85
  q.update({0, 0, 0.5, 1, true});
  CHECK(q.value(0, 0) == doctest::Approx(0.85).epsilon(1e-12));
}

TEST_CASE("q values stay inside the discounted reward envelope") {
  QTable q(3, 2, 0.2, 0.9, EpsilonSchedule{1.0, 0.1, 100});
  Rng rng(8);
  const double rmax = 1.0;
  const double bound = rmax / (1.0 - 0.9) + 1e-9;
  for (int t = 0; t < 20000; ++t) {
    QTransition tr;
    tr.state = static_cast<int>(rng.uniform_int(3));
    tr.action = static_cast<int>(rng.uniform_int(2));
    tr.reward = rng.uniform();
    tr.next_state = static_cast<int>(rng.uniform_int(3));
    tr.done = rng.bernoulli(0.05);
    q.update(tr);
  }
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 2; ++a) {
      CHECK(q.value(s, a) >= 0.0);
      CHECK(q.value(s, a) <= bound);
    }
  }
}

TEST_CASE("greedy action follows the argmax and breaks ties uniformly") {
  QTable q(1, 3, 0.1, 0.9, EpsilonSchedule{0.0, 0.0, 0});
  q.set_value(0, 1, 2.0);
  Rng rng(9);
  for (int i = 0; i < 50; ++i) CHECK(q.greedy_action(0, rng) == 1);
  q.set_value(0, 1, 0.0);
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 9000; ++i) ++counts[q.greedy_action(0, rng)];
  for (int c : counts) CHECK(c == doctest::Approx(3000).epsilon(0.1));
}

TEST_CASE("selection is greedy at epsilon zero and uniform at epsilon one") {
  QTable greedy(1, 2, 0.1, 0.9, EpsilonSchedule{0.0, 0.0, 0});
  greedy.set_value(0, 1, 1.0);
  Rng rng(10);
  for (int i = 0; i < 100; ++i) CHECK(greedy.select(0, 12345, rng) == 1);

  QTable uniform(1, 2, 0.1, 0.9, EpsilonSchedule{1.0, 1.0, 0});
  uniform.set_value(0, 1, 1.0);
  int explore = 0;
  for (int i = 0; i < 10000; ++i) explore += uniform.select(0, 0, rng) == 0 ? 1 : 0;
  CHECK(explore == doctest::Approx(5000).epsilon(0.06));
}

TEST_CASE("q lookups outside the table throw") {
  QTable q(2, 2, 0.1, 0.9, EpsilonSchedule{});
  CHECK_THROWS_AS(q.value(2, 0), std::out_of_range);
  CHECK_THROWS_AS(q.value(0, -1), std::out_of_range);
  CHECK_THROWS_AS(q.set_value(-1, 0, 1.0), std::out_of_range);
}

TEST_CASE("q table csv dump is state,action,value") {
  QTable q(2, 2, 0.1, 0.9, EpsilonSchedule{});
  q.set_value(1, 0, 0.5);
  std::ostringstream out;
  q.write_csv(out);
  std::istringstream in(out.str());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "state,action,value");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 4);
  CHECK(out.str().find("1,0,0.5") != std::string::npos);
}

// ---------------------------------------------------------------------------
// Policy/value network and PPO machinery.

using namespace teamlab::ppo;

namespace {

PolicyValueNet tiny_oracle_net() {
  NetShape shape{2, 2, 2, 2};
  PolicyValueNet net(shape);
  net.params() = {0.1, -0.2, 0.3, 0.4,   // w1
                  0.05, -0.05,           // b1
                  0.2, 0.1, -0.3, 0.25,  // w2
                  0.0, 0.1,              // b2
                  1.0, -1.0, 0.5, 0.25,  // wp
                  0.1, -0.1,             // bp
                  0.7, -0.4,             // wv
                  0.2};                  // bv
  return net;
}

std::vector<Transition> random_rollout(PolicyValueNet& net, int steps, Rng& rng,
                                       double done_prob = 0.2) {
  std::vector<Transition> rollout;
  const int obs_dim = net.shape().obs_dim;
  for (int t = 0; t < steps; ++t) {
    Transition tr;
    tr.obs.resize(static_cast<std::size_t>(obs_dim));
    for (auto& x : tr.obs) x = rng.uniform() * 2.0 - 1.0;
    const auto fw = net.forward(tr.obs);
    tr.action = sample_action(fw, rng);
    tr.log_prob = log_prob_of(fw, tr.action);
    tr.value = fw.value;
    tr.reward = rng.uniform() * 2.0 - 1.0;
    tr.done = t + 1 == steps || rng.bernoulli(done_prob);
    rollout.push_back(std::move(tr));
  }
  return rollout;
}

}  // namespace

TEST_CASE("net shape and parameter count") {
  NetShape shape{2, 2, 2, 2};
  PolicyValueNet net(shape);
  CHECK(net.num_params() == 21);
  CHECK_THROWS_AS(PolicyValueNet(NetShape{0, 2, 2, 2}), std::invalid_argument);
  CHECK_THROWS_AS(PolicyValueNet(NetShape{2, 2, 2, 1}), std::invalid_argument);
}

TEST_CASE("forward pass matches a hand-computed reference") {
  PolicyValueNet net = tiny_oracle_net();
  const auto fw = net.forward({0.5, -1.0});
  CHECK(fw.h1[0] == doctest::Approx(0.2913126124515909).epsilon(1e-12));
  CHECK(fw.h1[1] == doctest::Approx(-0.2913126124515909).epsilon(1e-12));
  CHECK(fw.h2[0] == doctest::Approx(0.029123023483690034).epsilon(1e-12));
  CHECK(fw.h2[1] == doctest::Approx(-0.060149240373687192).epsilon(1e-12));
  CHECK(fw.logits[0] == doctest::Approx(0.18927226385737722).epsilon(1e-12));
  CHECK(fw.logits[1] == doctest::Approx(-0.10047579835157679).epsilon(1e-12));
  CHECK(fw.probs[0] == doctest::Approx(0.57193445327052295).epsilon(1e-12));
  CHECK(fw.probs[1] == doctest::Approx(0.428065546729477).epsilon(1e-12));
  CHECK(fw.value == doctest::Approx(0.24444581258805792).epsilon(1e-12));
  CHECK(log_prob_of(fw, 0) == doctest::Approx(-0.55873088635292556).epsilon(1e-12));
}

TEST_CASE("softmax output is a probability distribution") {
  NetShape shape{4, 8, 8, 5};
  PolicyValueNet net(shape);
  Rng rng(21);
  net.init(rng);
  for (int it = 0; it < 50; ++it) {
    std::vector<double> obs(4);
    for (auto& x : obs) x = rng.uniform() * 4.0 - 2.0;
    const auto fw = net.forward(obs);
    double sum = 0.0;
    for (double p : fw.probs) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("fresh nets start with a uniform policy and zero value") {
  NetShape shape{6, 8, 8, 9};
  PolicyValueNet net(shape);
  Rng rng(22);
  net.init(rng);
  std::vector<double> obs(6, 0.37);
  const auto fw = net.forward(obs);
  for (double p : fw.probs) CHECK(p == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
  CHECK(fw.value == 0.0);
}

TEST_CASE("checkpoints round trip exactly") {
  NetShape shape{3, 4, 4, 3};
  PolicyValueNet net(shape);
  Rng rng(23);
  net.init(rng);
  const std::string path = "test_net_checkpoint.txt";
  net.save(path);
  const PolicyValueNet loaded = PolicyValueNet::load(path);
  CHECK(loaded.shape().obs_dim == 3);
  CHECK(loaded.params() == net.params());
  std::remove(path.c_str());
  CHECK_THROWS_AS(PolicyValueNet::load("no_such_checkpoint.txt"), std::runtime_error);
}

TEST_CASE("corrupt checkpoint headers are rejected") {
  const std::string path = "test_net_bad_header.txt";
  {
    std::ofstream out(path);
    out << "something_else 1\n2 2 2 2\n";
  }
  CHECK_THROWS_AS(PolicyValueNet::load(path), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("returns and advantages: discounting with episode cuts") {
  PPOConfig config;
  config.gamma = 0.5;
  config.normalize_advantages = false;
  std::vector<Transition> rollout(3);
  rollout[0].reward = 1.0;
  rollout[0].value = 0.5;
  rollout[1].reward = 2.0;
  rollout[1].value = 1.0;
  rollout[2].reward = 3.0;
  rollout[2].value = 2.0;
  rollout[2].done = true;
  const Batch batch = prepare_batch(rollout, config);
  CHECK(batch.returns == std::vector<double>{2.75, 3.5, 3.0});
  CHECK(batch.advantages == std::vector<double>{2.25, 2.5, 1.0});

  rollout[0].done = true;  // cut after the first transition
  const Batch cut = prepare_batch(rollout, config);
  CHECK(cut.returns == std::vector<double>{1.0, 3.5, 3.0});
}

TEST_CASE("advantage normalization centers and scales") {
  PPOConfig config;
  config.gamma = 0.9;
  config.normalize_advantages = true;
  Rng rng(24);
  std::vector<Transition> rollout(32);
  for (auto& tr : rollout) {
    tr.reward = rng.uniform() * 4.0 - 2.0;
    tr.value = rng.uniform();
  }
  rollout.back().done = true;
  const Batch batch = prepare_batch(rollout, config);
  const double mean =
      std::accumulate(batch.advantages.begin(), batch.advantages.end(), 0.0) / 32.0;
  double var = 0.0;
  for (double a : batch.advantages) var += (a - mean) * (a - mean);
  var /= 32.0;
  CHECK(std::abs(mean) < 1e-9);
  CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("empty rollouts are rejected") {
  PPOConfig config;
  CHECK_THROWS_AS(prepare_batch({}, config), std::invalid_argument);
}

TEST_CASE("adam follows the bias-corrected update") {
  PPOConfig config;
  config.learning_rate = 1e-3;
  Adam opt(1);
  std::vector<double> params{0.0};
  std::vector<double> grad{2.0};
  opt.step(params, grad, config);
  // mhat = g, vhat = g^2 -> step = -lr * g / (|g| + eps)
  CHECK(params[0] == doctest::Approx(-1e-3 * 2.0 / (2.0 + 1e-8)).epsilon(1e-12));
  opt.step(params, grad, config);
  CHECK(params[0] == doctest::Approx(-2.0 * 1e-3 * 2.0 / (2.0 + 1e-8)).epsilon(1e-6));
}

TEST_CASE("analytic gradients agree with finite differences") {
  Rng rng(25);
  for (int trial = 0; trial < 5; ++trial) {
    NetShape shape{6, 8, 8, 4};
    PolicyValueNet net(shape);
    net.init(rng);
    auto rollout = random_rollout(net, 12, rng);
    PPOConfig config;
    config.normalize_advantages = trial % 2 == 0;
    const double err = finite_difference_check(net, rollout, config, 1e-5);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("update runs, reports stats, and keeps parameters finite") {
  Rng rng(26);
  NetShape shape{5, 8, 8, 4};
  PolicyValueNet net(shape);
  net.init(rng);
  auto rollout = random_rollout(net, 10, rng);
  PPOConfig config;
  config.epochs = 2;
  config.minibatch = 4;
  Adam opt(net.num_params());
  const UpdateStats stats = ppo_update(net, rollout, config, opt, rng);
  CHECK(stats.minibatches == 6);
  CHECK(stats.policy_grad_norms.size() == 2);
  CHECK(std::isfinite(stats.policy_loss));
  CHECK(std::isfinite(stats.value_loss));
  for (double p : net.params()) CHECK(std::isfinite(p));
}

TEST_CASE("first-pass entropy of a fresh net is log n_actions") {
  Rng rng(27);
  NetShape shape{3, 4, 4, 4};
  PolicyValueNet net(shape);
  net.init(rng);
  auto rollout = random_rollout(net, 8, rng);
  PPOConfig config;
  config.epochs = 1;
  config.minibatch = 1024;
  Adam opt(net.num_params());
  const UpdateStats stats = ppo_update(net, rollout, config, opt, rng);
  CHECK(stats.entropy == doctest::Approx(std::log(4.0)).epsilon(1e-9));
}

TEST_CASE("zero clip freezes the policy gradient after the first epoch") {
  Rng rng(28);
  NetShape shape{3, 4, 4, 3};
  PolicyValueNet net(shape);
  net.init(rng);
  std::vector<Transition> rollout(1);
  rollout[0].obs = {0.2, -0.4, 0.9};
  const auto fw = net.forward(rollout[0].obs);
  rollout[0].action = 1;
  rollout[0].log_prob = log_prob_of(fw, 1);
  rollout[0].value = fw.value;
  rollout[0].reward = 1.0;
  rollout[0].done = true;
  PPOConfig config;
  config.clip = 0.0;
  config.value_coef = 0.0;
  config.entropy_coef = 0.0;
  config.normalize_advantages = false;
  config.epochs = 2;
  Adam opt(net.num_params());
  const UpdateStats stats = ppo_update(net, rollout, config, opt, rng);
  CHECK(stats.policy_grad_norms[0] > 0.0);
  CHECK(stats.policy_grad_norms[1] == 0.0);
}

TEST_CASE("zero advantages leave the policy untouched") {
  Rng rng(29);
  NetShape shape{3, 6, 6, 4};
  PolicyValueNet net(shape);
  net.init(rng);
  PPOConfig config;
  config.gamma = 0.0;
  config.entropy_coef = 0.0;
  config.normalize_advantages = false;
  config.epochs = 3;
  std::vector<Transition> rollout(6);
  for (auto& tr : rollout) {
    tr.obs = {rng.uniform(), rng.uniform(), rng.uniform()};
    const auto fw = net.forward(tr.obs);
    tr.action = sample_action(fw, rng);
    tr.log_prob = log_prob_of(fw, tr.action);
    tr.reward = rng.uniform();
    tr.value = tr.reward;  // advantage = G - V = r - r = 0 under gamma 0
    tr.done = true;
  }
  Adam opt(net.num_params());
  const UpdateStats stats = ppo_update(net, rollout, config, opt, rng);
  for (double norm : stats.policy_grad_norms) CHECK(norm == 0.0);
  // The value head trains, but the zero-initialized policy head never gets a
  // gradient, so the policy stays exactly uniform everywhere.
  const auto fw = net.forward({0.1, 0.2, 0.3});
  for (double p : fw.probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("non-finite gradients abort the update with diagnostics") {
  Rng rng(30);
  NetShape shape{2, 4, 4, 3};
  PolicyValueNet net(shape);
  net.init(rng);
  auto rollout = random_rollout(net, 4, rng);
  net.params()[0] = std::numeric_limits<double>::quiet_NaN();
  PPOConfig config;
  Adam opt(net.num_params());
  CHECK_THROWS_AS(ppo_update(net, rollout, config, opt, rng), std::runtime_error);
}

TEST_CASE("action sampling follows the policy distribution") {
  PolicyValueNet net = tiny_oracle_net();
  const auto fw = net.forward({0.5, -1.0});
  Rng rng(31);
  int zero = 0;
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    if (sample_action(fw, rng) == 0) ++zero;
  }
  CHECK(static_cast<double>(zero) / draws ==
        doctest::Approx(fw.probs[0]).epsilon(0.03));
}

#include "teamlab/policy_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace teamlab::ppo {

void NetShape::validate() const {
  if (obs_dim < 1 || hidden1 < 1 || hidden2 < 1 || n_actions < 2) {
    throw std::invalid_argument("net shape must have positive layer sizes and >= 2 actions");
  }
}

void PPOConfig::validate() const {
  if (!(clip >= 0.0)) throw std::invalid_argument("clip must be >= 0");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in [0,1)");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(value_coef >= 0.0) || !(entropy_coef >= 0.0)) {
    throw std::invalid_argument("loss coefficients must be >= 0");
  }
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (minibatch < 1) throw std::invalid_argument("minibatch must be >= 1");
}

PolicyValueNet::PolicyValueNet(NetShape shape) : shape_(shape) {
  shape_.validate();
  const std::size_t o = static_cast<std::size_t>(shape_.obs_dim);
  const std::size_t h1 = static_cast<std::size_t>(shape_.hidden1);
  const std::size_t h2 = static_cast<std::size_t>(shape_.hidden2);
  const std::size_t a = static_cast<std::size_t>(shape_.n_actions);
  w1_ = 0;
  b1_ = w1_ + h1 * o;
  w2_ = b1_ + h1;
  b2_ = w2_ + h2 * h1;
  wp_ = b2_ + h2;
  bp_ = wp_ + a * h2;
  wv_ = bp_ + a;
  bv_ = wv_ + h2;
  params_.assign(bv_ + 1, 0.0);
}

void PolicyValueNet::init(Rng& rng) {
  std::fill(params_.begin(), params_.end(), 0.0);
  auto xavier = [&](std::size_t offset, int rows, int cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (std::size_t k = 0; k < static_cast<std::size_t>(rows) * cols; ++k) {
      params_[offset + k] = (2.0 * rng.uniform() - 1.0) * limit;
    }
  };
  xavier(w1_, shape_.hidden1, shape_.obs_dim);
  xavier(w2_, shape_.hidden2, shape_.hidden1);
  // Output heads stay zero: uniform initial policy, zero initial value.
}

namespace {

double log_sum_exp(const std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - m);
  return m + std::log(s);
}

}  // namespace

PolicyValueNet::Forward PolicyValueNet::forward(const std::vector<double>& obs) const {
  if (static_cast<int>(obs.size()) != shape_.obs_dim) {
    throw std::invalid_argument("observation length " + std::to_string(obs.size()) +
                                " does not match net input " +
                                std::to_string(shape_.obs_dim));
  }
  const int o = shape_.obs_dim;
  const int h1n = shape_.hidden1;
  const int h2n = shape_.hidden2;
  const int an = shape_.n_actions;
  Forward fw;
  fw.h1.resize(static_cast<std::size_t>(h1n));
  fw.h2.resize(static_cast<std::size_t>(h2n));
  fw.logits.resize(static_cast<std::size_t>(an));
  fw.probs.resize(static_cast<std::size_t>(an));

  for (int i = 0; i < h1n; ++i) {
    const double* row = &params_[w1_ + static_cast<std::size_t>(i) * o];
    double z = params_[b1_ + static_cast<std::size_t>(i)];
    for (int j = 0; j < o; ++j) z += row[j] * obs[static_cast<std::size_t>(j)];
    fw.h1[static_cast<std::size_t>(i)] = std::tanh(z);
  }
  for (int i = 0; i < h2n; ++i) {
    const double* row = &params_[w2_ + static_cast<std::size_t>(i) * h1n];
    double z = params_[b2_ + static_cast<std::size_t>(i)];
    for (int j = 0; j < h1n; ++j) z += row[j] * fw.h1[static_cast<std::size_t>(j)];
    fw.h2[static_cast<std::size_t>(i)] = std::tanh(z);
  }
  for (int i = 0; i < an; ++i) {
    const double* row = &params_[wp_ + static_cast<std::size_t>(i) * h2n];
    double z = params_[bp_ + static_cast<std::size_t>(i)];
    for (int j = 0; j < h2n; ++j) z += row[j] * fw.h2[static_cast<std::size_t>(j)];
    fw.logits[static_cast<std::size_t>(i)] = z;
  }
  const double lse = log_sum_exp(fw.logits);
  for (int i = 0; i < an; ++i) {
    fw.probs[static_cast<std::size_t>(i)] = std::exp(fw.logits[static_cast<std::size_t>(i)] - lse);
  }
  double v = params_[bv_];
  for (int j = 0; j < h2n; ++j) {
    v += params_[wv_ + static_cast<std::size_t>(j)] * fw.h2[static_cast<std::size_t>(j)];
  }
  fw.value = v;
  return fw;
}

void PolicyValueNet::backward(const std::vector<double>& obs, const Forward& fw,
                              const std::vector<double>& dlogits, double dvalue,
                              std::vector<double>& grad) const {
  if (grad.size() != params_.size()) {
    throw std::invalid_argument("gradient buffer size mismatch");
  }
  const int o = shape_.obs_dim;
  const int h1n = shape_.hidden1;
  const int h2n = shape_.hidden2;
  const int an = shape_.n_actions;

  std::vector<double> dh2(static_cast<std::size_t>(h2n), 0.0);
  for (int i = 0; i < an; ++i) {
    const double d = dlogits[static_cast<std::size_t>(i)];
    if (d == 0.0) continue;
    double* grow = &grad[wp_ + static_cast<std::size_t>(i) * h2n];
    const double* prow = &params_[wp_ + static_cast<std::size_t>(i) * h2n];
    for (int j = 0; j < h2n; ++j) {
      grow[j] += d * fw.h2[static_cast<std::size_t>(j)];
      dh2[static_cast<std::size_t>(j)] += d * prow[j];
    }
    grad[bp_ + static_cast<std::size_t>(i)] += d;
  }
  if (dvalue != 0.0) {
    for (int j = 0; j < h2n; ++j) {
      grad[wv_ + static_cast<std::size_t>(j)] += dvalue * fw.h2[static_cast<std::size_t>(j)];
      dh2[static_cast<std::size_t>(j)] += dvalue * params_[wv_ + static_cast<std::size_t>(j)];
    }
    grad[bv_] += dvalue;
  }

  std::vector<double> dh1(static_cast<std::size_t>(h1n), 0.0);
  for (int i = 0; i < h2n; ++i) {
    const double hi = fw.h2[static_cast<std::size_t>(i)];
    const double dz = dh2[static_cast<std::size_t>(i)] * (1.0 - hi * hi);
    if (dz == 0.0) continue;
    double* grow = &grad[w2_ + static_cast<std::size_t>(i) * h1n];
    const double* prow = &params_[w2_ + static_cast<std::size_t>(i) * h1n];
    for (int j = 0; j < h1n; ++j) {
      grow[j] += dz * fw.h1[static_cast<std::size_t>(j)];
      dh1[static_cast<std::size_t>(j)] += dz * prow[j];
    }
    grad[b2_ + static_cast<std::size_t>(i)] += dz;
  }

  for (int i = 0; i < h1n; ++i) {
    const double hi = fw.h1[static_cast<std::size_t>(i)];
    const double dz = dh1[static_cast<std::size_t>(i)] * (1.0 - hi * hi);
    if (dz == 0.0) continue;
    double* grow = &grad[w1_ + static_cast<std::size_t>(i) * o];
    for (int j = 0; j < o; ++j) grow[j] += dz * obs[static_cast<std::size_t>(j)];
    grad[b1_ + static_cast<std::size_t>(i)] += dz;
  }
}

void PolicyValueNet::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << "teamlab_policy_net 1\n";
  out << shape_.obs_dim << ' ' << shape_.hidden1 << ' ' << shape_.hidden2 << ' '
      << shape_.n_actions << '\n';
  char buf[64];
  for (double p : params_) {
    std::snprintf(buf, sizeof buf, "%.17g\n", p);
    out << buf;
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

PolicyValueNet PolicyValueNet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "teamlab_policy_net" || version != 1) {
    throw std::runtime_error("unrecognized checkpoint header in " + path);
  }
  NetShape shape;
  in >> shape.obs_dim >> shape.hidden1 >> shape.hidden2 >> shape.n_actions;
  PolicyValueNet net(shape);
  for (double& p : net.params_) {
    if (!(in >> p)) throw std::runtime_error("checkpoint truncated: " + path);
  }
  return net;
}

Batch prepare_batch(const std::vector<Transition>& rollout, const PPOConfig& config) {
  config.validate();
  if (rollout.empty()) throw std::invalid_argument("empty rollout");
  const std::size_t n = rollout.size();
  Batch batch;
  batch.returns.resize(n);
  batch.advantages.resize(n);
  double g = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    if (rollout[k].done) g = 0.0;
    g = rollout[k].reward + config.gamma * g;
    batch.returns[k] = g;
    batch.advantages[k] = g - rollout[k].value;
  }
  if (config.normalize_advantages && n >= 2) {
    double mean = std::accumulate(batch.advantages.begin(), batch.advantages.end(), 0.0) /
                  static_cast<double>(n);
    double var = 0.0;
    for (double a : batch.advantages) var += (a - mean) * (a - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (sd > 1e-12) {
      for (double& a : batch.advantages) a = (a - mean) / (sd + 1e-8);
    }
  }
  return batch;
}

Adam::Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad,
                const PPOConfig& config) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw std::invalid_argument("optimizer size mismatch");
  }
  ++t_;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_eps);
  }
}

namespace {

struct SampleLoss {
  double loss = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
};

// Loss pieces for one sample; dlogits/dvalue are unscaled (no 1/batch factor).
SampleLoss sample_loss_and_grad(const PolicyValueNet::Forward& fw, int action,
                                double old_log_prob, double advantage,
                                double ret, const PPOConfig& config,
                                std::vector<double>* dlogits, double* dvalue,
                                double* policy_dlogits_l1) {
  const int an = static_cast<int>(fw.logits.size());
  const double lse = log_sum_exp(fw.logits);
  const double lp = fw.logits[static_cast<std::size_t>(action)] - lse;
  const double rho = std::exp(lp - old_log_prob);
  const double lo = 1.0 - config.clip;
  const double hi = 1.0 + config.clip;
  const double surr1 = rho * advantage;
  const double surr2 = std::clamp(rho, lo, hi) * advantage;

  double entropy = 0.0;
  for (int k = 0; k < an; ++k) {
    const double lpk = fw.logits[static_cast<std::size_t>(k)] - lse;
    entropy -= fw.probs[static_cast<std::size_t>(k)] * lpk;
  }
  const double verr = fw.value - ret;

  SampleLoss out;
  out.policy = -std::min(surr1, surr2);
  out.value = config.value_coef * verr * verr;
  out.entropy = entropy;
  out.loss = out.policy + out.value - config.entropy_coef * entropy;

  if (dlogits != nullptr) {
    double dloss_drho = 0.0;
    if (surr1 <= surr2) {
      dloss_drho = -advantage;
    } else if (rho > lo && rho < hi) {
      dloss_drho = -advantage;
    }
    const double dlp = dloss_drho * rho;
    double l1 = 0.0;
    for (int k = 0; k < an; ++k) {
      const double pk = fw.probs[static_cast<std::size_t>(k)];
      const double lpk = fw.logits[static_cast<std::size_t>(k)] - lse;
      const double policy_term = dlp * ((k == action ? 1.0 : 0.0) - pk);
      // d(-coef*H)/dz_k = coef * p_k (log p_k + H)
      const double entropy_term = config.entropy_coef * pk * (lpk + entropy);
      (*dlogits)[static_cast<std::size_t>(k)] = policy_term + entropy_term;
      l1 += std::fabs(policy_term);
    }
    *dvalue = 2.0 * config.value_coef * verr;
    if (policy_dlogits_l1 != nullptr) *policy_dlogits_l1 = l1;
  }
  return out;
}

}  // namespace

UpdateStats ppo_update(PolicyValueNet& net, const std::vector<Transition>& rollout,
                       const PPOConfig& config, Adam& optimizer, Rng& rng) {
  config.validate();
  const Batch batch = prepare_batch(rollout, config);
  const std::size_t n = rollout.size();
  const std::size_t p = net.num_params();

  UpdateStats stats;
  stats.policy_grad_norms.assign(static_cast<std::size_t>(config.epochs), 0.0);
  std::vector<double> grad(p, 0.0);
  std::vector<double> dlogits(static_cast<std::size_t>(net.shape().n_actions), 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  long samples_seen = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.minibatch)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(config.minibatch));
      const double scale = 1.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        const auto& tr = rollout[i];
        const auto fw = net.forward(tr.obs);
        double dvalue = 0.0;
        double policy_l1 = 0.0;
        const SampleLoss sl = sample_loss_and_grad(
            fw, tr.action, tr.log_prob, batch.advantages[i], batch.returns[i],
            config, &dlogits, &dvalue, &policy_l1);
        for (double& d : dlogits) d *= scale;
        net.backward(tr.obs, fw, dlogits, dvalue * scale, grad);
        stats.policy_loss += sl.policy;
        stats.value_loss += sl.value;
        stats.entropy += sl.entropy;
        stats.policy_grad_norms[static_cast<std::size_t>(epoch)] += policy_l1;
        ++samples_seen;
      }
      for (std::size_t j = 0; j < p; ++j) {
        if (!std::isfinite(grad[j])) {
          std::ostringstream msg;
          msg << "non-finite gradient at parameter " << j << " (epoch " << epoch
              << ", minibatch starting at " << start << ", value " << grad[j] << ")";
          throw std::runtime_error(msg.str());
        }
      }
      optimizer.step(net.params(), grad, config);
      ++stats.minibatches;
    }
  }
  if (samples_seen > 0) {
    stats.policy_loss /= static_cast<double>(samples_seen);
    stats.value_loss /= static_cast<double>(samples_seen);
    stats.entropy /= static_cast<double>(samples_seen);
  }
  return stats;
}

double finite_difference_check(PolicyValueNet& net,
                               const std::vector<Transition>& rollout,
                               const PPOConfig& config, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be > 0");
  config.validate();
  // Behavior policy = current parameters, so ratios start at exactly 1 and
  // the clip kinks are a safe distance away from the evaluation point.
  std::vector<Transition> tagged = rollout;
  for (auto& tr : tagged) {
    const auto fw = net.forward(tr.obs);
    const double lse = log_sum_exp(fw.logits);
    tr.log_prob = fw.logits[static_cast<std::size_t>(tr.action)] - lse;
    tr.value = fw.value;
  }
  const Batch batch = prepare_batch(tagged, config);
  const std::size_t n = tagged.size();
  const std::size_t p = net.num_params();

  auto total_loss = [&]() {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& tr = tagged[i];
      const auto fw = net.forward(tr.obs);
      sum += sample_loss_and_grad(fw, tr.action, tr.log_prob, batch.advantages[i],
                                  batch.returns[i], config, nullptr, nullptr, nullptr)
                 .loss;
    }
    return sum / static_cast<double>(n);
  };

  std::vector<double> analytic(p, 0.0);
  std::vector<double> dlogits(static_cast<std::size_t>(net.shape().n_actions), 0.0);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& tr = tagged[i];
    const auto fw = net.forward(tr.obs);
    double dvalue = 0.0;
    sample_loss_and_grad(fw, tr.action, tr.log_prob, batch.advantages[i],
                         batch.returns[i], config, &dlogits, &dvalue, nullptr);
    for (double& d : dlogits) d *= scale;
    net.backward(tr.obs, fw, dlogits, dvalue * scale, analytic);
  }

  double worst = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    const double saved = net.params()[j];
    net.params()[j] = saved + h;
    const double up = total_loss();
    net.params()[j] = saved - h;
    const double down = total_loss();
    net.params()[j] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({1e-6, std::fabs(analytic[j]), std::fabs(numeric)});
    worst = std::max(worst, std::fabs(analytic[j] - numeric) / denom);
  }
  return worst;
}

int sample_action(const PolicyValueNet::Forward& fw, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  const int an = static_cast<int>(fw.probs.size());
  for (int k = 0; k < an; ++k) {
    acc += fw.probs[static_cast<std::size_t>(k)];
    if (u < acc) return k;
  }
  return an - 1;
}

double log_prob_of(const PolicyValueNet::Forward& fw, int action) {
  return fw.logits[static_cast<std::size_t>(action)] - log_sum_exp(fw.logits);
}

}  // namespace teamlab::ppo

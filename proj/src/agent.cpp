#include "acdc/agent.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace acdc::agent {

void AgentConfig::validate() const {
  if (state_dim <= 0 || goal_dim <= 0 || action_dim <= 0 || hidden <= 0) {
    throw std::invalid_argument("agent: dimensions must be positive");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("agent: gamma must lie in [0, 1)");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("agent: tau must lie in [0, 1]");
  if (noise_sigma < 0.0) throw std::invalid_argument("agent: noise_sigma must be >= 0");
  if (!(random_eps >= 0.0 && random_eps <= 1.0)) throw std::invalid_argument("agent: random_eps must lie in [0, 1]");
  if (!(action_bound > 0.0)) throw std::invalid_argument("agent: action_bound must be > 0");
}

DdpgAgent DdpgAgent::init(const AgentConfig& config, Rng& rng) {
  config.validate();
  DdpgAgent agent;
  agent.config_ = config;
  const int obs = config.state_dim + config.goal_dim;
  const std::vector<int> hidden{config.hidden, config.hidden};
  agent.actor_ = nn::Mlp::init(obs, hidden, config.action_dim, nn::Activation::tanh,
                               nn::Activation::tanh, rng);
  agent.critic_ = nn::Mlp::init(obs + config.action_dim, hidden, 1, nn::Activation::relu,
                                nn::Activation::identity, rng);
  agent.target_actor_ = agent.actor_;
  agent.target_critic_ = agent.critic_;
  agent.actor_adam_ = nn::AdamState(config.lr_actor);
  agent.critic_adam_ = nn::AdamState(config.lr_critic);
  return agent;
}

Mat DdpgAgent::actor_input(const Mat& states, const Mat& goals) const {
  if (states.rows() != config_.state_dim || goals.rows() != config_.goal_dim ||
      states.cols() != goals.cols()) {
    throw std::invalid_argument("agent: state/goal shape mismatch");
  }
  Mat in(config_.state_dim + config_.goal_dim, states.cols());
  in << states, goals;
  return in;
}

Mat DdpgAgent::policy(const Mat& states, const Mat& goals) const {
  return actor_.forward(actor_input(states, goals)) * config_.action_bound;
}

Vec DdpgAgent::q_values(const Mat& states, const Mat& goals, const Mat& actions) const {
  Mat in(config_.state_dim + config_.goal_dim + config_.action_dim, states.cols());
  in << actor_input(states, goals), actions / config_.action_bound;
  return critic_.forward(in).row(0).transpose();
}

Vec DdpgAgent::act(const Vec& state, const Vec& goal, bool explore, Rng& rng) const {
  Vec action = policy(state, goal).col(0);
  if (explore && config_.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, config_.noise_sigma);
    for (Eigen::Index i = 0; i < action.size(); ++i) action(i) += noise(rng);
  }
  return action.cwiseMax(-config_.action_bound).cwiseMin(config_.action_bound);
}

Vec DdpgAgent::rollout_action(const Vec& state, const Vec& goal, Rng& rng) const {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < config_.random_eps) {
    std::uniform_real_distribution<double> uniform(-config_.action_bound, config_.action_bound);
    Vec action(config_.action_dim);
    for (Eigen::Index i = 0; i < action.size(); ++i) action(i) = uniform(rng);
    return action;
  }
  return act(state, goal, true, rng);
}

Vec DdpgAgent::critic_targets(const replay::TransitionBatch& batch) const {
  const Mat next_in = actor_input(batch.next_states, batch.goals);
  const Mat next_actions = target_actor_.forward(next_in);  // already normalized by the bound
  Mat critic_in(next_in.rows() + config_.action_dim, next_in.cols());
  critic_in << next_in, next_actions;
  const Vec next_q = target_critic_.forward(critic_in).row(0).transpose();
  const double floor = -1.0 / (1.0 - config_.gamma);
  Vec y = batch.rewards.array() + config_.gamma * (1.0 - batch.dones.array()) * next_q.array();
  return y.cwiseMax(floor).cwiseMin(0.0);
}

UpdateStats DdpgAgent::update(const replay::TransitionBatch& batch) {
  const auto b = static_cast<double>(batch.size());
  if (batch.size() == 0) throw std::invalid_argument("agent update: empty batch");
  const Vec targets = critic_targets(batch);

  // Critic regression toward clipped targets.
  const Mat obs = actor_input(batch.states, batch.goals);
  Mat critic_in(obs.rows() + config_.action_dim, obs.cols());
  critic_in << obs, batch.actions / config_.action_bound;
  const auto critic_cache = critic_.forward_cached(critic_in);
  const Vec td = critic_cache.output().row(0).transpose() - targets;
  UpdateStats stats;
  stats.critic_loss = td.squaredNorm() / b;
  const Mat dq = (2.0 / b) * td.transpose();
  auto critic_back = critic_.backward(critic_cache, dq);

  // Actor ascends Q(s, pi(s)) with an L2 penalty on the normalized action.
  const auto actor_cache = actor_.forward_cached(obs);
  const Mat& pi = actor_cache.output();
  Mat pi_in(obs.rows() + config_.action_dim, obs.cols());
  pi_in << obs, pi;
  const auto pi_q_cache = critic_.forward_cached(pi_in);
  const double elems = b * static_cast<double>(config_.action_dim);
  stats.actor_loss = -pi_q_cache.output().mean() + config_.action_l2 * pi.squaredNorm() / elems;
  const Mat dpi_in = critic_.backward_input(pi_q_cache, Mat::Constant(1, obs.cols(), -1.0 / b));
  const Mat dpi = dpi_in.bottomRows(config_.action_dim) + (2.0 * config_.action_l2 / elems) * pi;
  auto actor_back = actor_.backward(actor_cache, dpi);

  if (!std::isfinite(stats.critic_loss) || !std::isfinite(stats.actor_loss)) {
    std::ostringstream msg;
    msg << "agent update: non-finite loss (critic=" << stats.critic_loss
        << ", actor=" << stats.actor_loss << ")";
    throw std::runtime_error(msg.str());
  }

  nn::ParamList critic_params, critic_grads, actor_params, actor_grads;
  critic_.collect(critic_params, "critic");
  critic_back.grads.collect(critic_grads, "critic");
  actor_.collect(actor_params, "actor");
  actor_back.grads.collect(actor_grads, "actor");
  nn::adam_step(critic_adam_, critic_params, critic_grads);
  nn::adam_step(actor_adam_, actor_params, actor_grads);
  return stats;
}

namespace {

void polyak(nn::Mlp& target, const nn::Mlp& online, double tau) {
  for (std::size_t i = 0; i < target.layers.size(); ++i) {
    auto& t = target.layers[i];
    const auto& o = online.layers[i];
    t.weights = tau * o.weights + (1.0 - tau) * t.weights;
    t.bias = tau * o.bias + (1.0 - tau) * t.bias;
  }
}

}  // namespace

void DdpgAgent::soft_update() {
  polyak(target_actor_, actor_, config_.tau);
  polyak(target_critic_, critic_, config_.tau);
}

void DdpgAgent::collect(nn::ParamList& out) {
  actor_.collect(out, "actor");
  critic_.collect(out, "critic");
  target_actor_.collect(out, "target_actor");
  target_critic_.collect(out, "target_critic");
}

}  // namespace acdc::agent

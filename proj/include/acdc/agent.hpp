#pragma once

#include "acdc/nn.hpp"
#include "acdc/replay.hpp"

namespace acdc::agent {

struct AgentConfig {
  int state_dim = 0;
  int goal_dim = 0;
  int action_dim = 0;
  double action_bound = 1.0;
  int hidden = 64;  // width of both hidden layers, actor and critic
  double gamma = 0.98;
  double tau = 0.05;          // polyak coefficient for target nets
  double noise_sigma = 0.2;   // absolute Gaussian exploration std
  double random_eps = 0.2;    // probability of a uniform random action in rollouts
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double action_l2 = 1.0;     // penalty on squared normalized actor output

  void validate() const;
};

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
};

// Goal-conditioned DDPG. Actor: tanh hidden layers, tanh output scaled by the
// action bound. Critic: relu hidden layers, scalar output. Inputs are
// [state; goal] and [state; goal; action / bound].
class DdpgAgent {
 public:
  static DdpgAgent init(const AgentConfig& config, Rng& rng);

  const AgentConfig& config() const { return config_; }

  // Deterministic policy output when explore is false; otherwise adds
  // N(0, noise_sigma^2) per component and clips to the bound.
  Vec act(const Vec& state, const Vec& goal, bool explore, Rng& rng) const;
  // Rollout behaviour: with probability random_eps a uniform action, else act(explore=true).
  Vec rollout_action(const Vec& state, const Vec& goal, Rng& rng) const;

  Mat policy(const Mat& states, const Mat& goals) const;
  Vec q_values(const Mat& states, const Mat& goals, const Mat& actions) const;

  // r + gamma (1 - done) Q'(s', pi'(s', g), g), clipped to [-1/(1-gamma), 0].
  Vec critic_targets(const replay::TransitionBatch& batch) const;

  // One Adam step each for critic and actor; both gradients come from the
  // pre-update parameters.
  UpdateStats update(const replay::TransitionBatch& batch);

  void soft_update();

  nn::Mlp& actor() { return actor_; }
  nn::Mlp& critic() { return critic_; }
  nn::Mlp& target_actor() { return target_actor_; }
  nn::Mlp& target_critic() { return target_critic_; }
  const nn::Mlp& actor() const { return actor_; }
  const nn::Mlp& critic() const { return critic_; }
  const nn::Mlp& target_actor() const { return target_actor_; }
  const nn::Mlp& target_critic() const { return target_critic_; }

  void collect(nn::ParamList& out);

 private:
  Mat actor_input(const Mat& states, const Mat& goals) const;

  AgentConfig config_;
  nn::Mlp actor_;
  nn::Mlp critic_;
  nn::Mlp target_actor_;
  nn::Mlp target_critic_;
  nn::AdamState actor_adam_;
  nn::AdamState critic_adam_;
};

}  // namespace acdc::agent

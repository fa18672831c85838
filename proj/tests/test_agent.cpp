#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "acdc/agent.hpp"
#include "test_support.hpp"

using namespace acdc;
using agent::AgentConfig;
using agent::DdpgAgent;

namespace {

AgentConfig small_config() {
  AgentConfig c;
  c.state_dim = 4;
  c.goal_dim = 2;
  c.action_dim = 2;
  c.action_bound = 1.5;
  c.hidden = 16;
  c.noise_sigma = 0.3;
  return c;
}

replay::TransitionBatch random_batch(Rng& rng, const AgentConfig& c, int n) {
  replay::TransitionBatch b;
  b.states = testing::random_mat(rng, c.state_dim, n);
  b.next_states = testing::random_mat(rng, c.state_dim, n);
  b.goals = testing::random_mat(rng, c.goal_dim, n);
  b.actions = testing::random_mat(rng, c.action_dim, n, -c.action_bound, c.action_bound);
  b.rewards = Vec(n);
  for (int i = 0; i < n; ++i) b.rewards(i) = rng() % 4 == 0 ? 0.0 : -1.0;
  b.dones = Vec::Zero(n);
  b.source_episode.assign(n, 0);
  b.step_index.assign(n, 0);
  b.relabeled.assign(n, false);
  return b;
}

double max_param_gap(const nn::Mlp& a, const nn::Mlp& b) {
  double gap = 0.0;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    gap = std::max(gap, (a.layers[i].weights - b.layers[i].weights).cwiseAbs().maxCoeff());
    gap = std::max(gap, (a.layers[i].bias - b.layers[i].bias).cwiseAbs().maxCoeff());
  }
  return gap;
}

}  // namespace

TEST_CASE("architecture") {
  Rng rng(1);
  const auto a = DdpgAgent::init(small_config(), rng);
  REQUIRE(a.actor().layers.size() == 3);
  CHECK(a.actor().in_dim() == 6);
  CHECK(a.actor().out_dim() == 2);
  CHECK(a.actor().layers[0].activation == nn::Activation::tanh);
  CHECK(a.actor().layers[2].activation == nn::Activation::tanh);
  CHECK(a.critic().in_dim() == 8);
  CHECK(a.critic().out_dim() == 1);
  CHECK(a.critic().layers[1].activation == nn::Activation::relu);
  CHECK(a.critic().layers[2].activation == nn::Activation::identity);
  CHECK(max_param_gap(a.actor(), a.target_actor()) == 0.0);
  CHECK(max_param_gap(a.critic(), a.target_critic()) == 0.0);
}

TEST_CASE("acting") {
  Rng rng(2);
  auto cfg = small_config();
  const auto a = DdpgAgent::init(cfg, rng);
  const Vec s = testing::random_vec(rng, 4), g = testing::random_vec(rng, 2);
  Rng r1(5), r2(6);
  CHECK(a.act(s, g, false, r1) == a.act(s, g, false, r2));

  cfg.noise_sigma = 100.0;
  const auto noisy = DdpgAgent::init(cfg, rng);
  for (int i = 0; i < 500; ++i) {
    const Vec x = noisy.act(s, g, true, r1);
    CHECK(x.cwiseAbs().maxCoeff() <= cfg.action_bound);
    const Vec y = noisy.rollout_action(s, g, r1);
    CHECK(y.cwiseAbs().maxCoeff() <= cfg.action_bound);
  }

  cfg.noise_sigma = 0.0;
  const auto quiet = DdpgAgent::init(cfg, rng);
  CHECK(quiet.act(s, g, true, r1) == quiet.act(s, g, false, r1));
  CHECK(quiet.act(s, g, false, r1) == quiet.policy(s, g).col(0));
}

TEST_CASE("rollout actions mix random and policy actions") {
  Rng rng(3);
  auto cfg = small_config();
  cfg.noise_sigma = 0.0;
  cfg.random_eps = 0.25;
  const auto a = DdpgAgent::init(cfg, rng);
  const Vec s = testing::random_vec(rng, 4), g = testing::random_vec(rng, 2);
  const Vec greedy = a.act(s, g, false, rng);
  int random = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) random += a.rollout_action(s, g, rng) == greedy ? 0 : 1;
  CHECK(std::abs(random / static_cast<double>(n) - 0.25) < 0.015);
}

TEST_CASE("critic targets") {
  Rng rng(4);
  auto cfg = small_config();
  auto a = DdpgAgent::init(cfg, rng);
  auto batch = random_batch(rng, cfg, 64);

  auto success = batch;
  success.rewards.setZero();
  success.dones.setOnes();
  CHECK(a.critic_targets(success).isZero());

  cfg.gamma = 0.0;
  const auto myopic = DdpgAgent::init(cfg, rng);
  CHECK(myopic.critic_targets(batch) == batch.rewards);

  // a pessimistic target critic hits the lower clip
  a.target_critic().layers.back().bias(0) = -1e4;
  const Vec low = a.critic_targets(batch);
  for (int i = 0; i < low.size(); ++i) CHECK(low(i) == -1.0 / (1.0 - 0.98));
  a.target_critic().layers.back().bias(0) = 1e4;
  CHECK(a.critic_targets(batch).isZero());
}

TEST_CASE("critic targets stay in the clip range on random batches") {
  Rng rng(5);
  const auto cfg = small_config();
  for (int trial = 0; trial < 20; ++trial) {
    auto a = DdpgAgent::init(cfg, rng);
    a.target_critic().layers.back().bias(0) = std::uniform_real_distribution<double>(-200, 200)(rng);
    const auto batch = random_batch(rng, cfg, 128);
    const Vec y = a.critic_targets(batch);
    CHECK(y.minCoeff() >= -1.0 / (1.0 - cfg.gamma));
    CHECK(y.maxCoeff() <= 0.0);
  }
}

TEST_CASE("update is reproducible and fits a fixed batch") {
  Rng rng(6);
  const auto cfg = small_config();
  Rng i1(9), i2(9);
  auto a = DdpgAgent::init(cfg, i1);
  auto b = DdpgAgent::init(cfg, i2);
  const auto batch = random_batch(rng, cfg, 128);
  double first = 0.0, last = 0.0;
  for (int k = 0; k < 300; ++k) {
    const auto sa = a.update(batch);
    const auto sb = b.update(batch);
    CHECK(sa.critic_loss == sb.critic_loss);
    CHECK(sa.actor_loss == sb.actor_loss);
    if (k == 0) first = sa.critic_loss;
    last = sa.critic_loss;
  }
  CHECK(max_param_gap(a.actor(), b.actor()) == 0.0);
  CHECK(max_param_gap(a.critic(), b.critic()) == 0.0);
  CHECK(last < 0.2 * first);
  // targets are only moved by soft_update
  Rng i3(9);
  const auto fresh = DdpgAgent::init(cfg, i3);
  CHECK(max_param_gap(a.target_critic(), fresh.target_critic()) == 0.0);
}

TEST_CASE("actor update ascends the critic") {
  Rng rng(7);
  auto cfg = small_config();
  cfg.action_l2 = 0.0;
  cfg.lr_critic = 0.0;  // freeze the critic so the actor objective is fixed
  auto a = DdpgAgent::init(cfg, rng);
  const auto batch = random_batch(rng, cfg, 256);
  const auto mean_q = [&] { return a.q_values(batch.states, batch.goals, a.policy(batch.states, batch.goals)).mean(); };
  const double before = mean_q();
  for (int k = 0; k < 100; ++k) a.update(batch);
  CHECK(mean_q() > before);
}

TEST_CASE("non-finite batches abort the update") {
  Rng rng(8);
  const auto cfg = small_config();
  auto a = DdpgAgent::init(cfg, rng);
  auto batch = random_batch(rng, cfg, 16);
  batch.states(0, 3) = std::nan("");
  CHECK_THROWS_AS(a.update(batch), std::runtime_error);
}

TEST_CASE("soft update") {
  Rng rng(9);
  auto cfg = small_config();
  auto perturb = [&](DdpgAgent& a) {
    for (auto& l : a.actor().layers) l.weights.array() += 0.5;
    for (auto& l : a.critic().layers) l.bias.array() -= 0.25;
  };

  cfg.tau = 1.0;
  auto full = DdpgAgent::init(cfg, rng);
  perturb(full);
  full.soft_update();
  CHECK(max_param_gap(full.actor(), full.target_actor()) == 0.0);
  CHECK(max_param_gap(full.critic(), full.target_critic()) == 0.0);

  cfg.tau = 0.0;
  auto frozen = DdpgAgent::init(cfg, rng);
  const auto target_before = frozen.target_actor();
  perturb(frozen);
  frozen.soft_update();
  CHECK(max_param_gap(frozen.target_actor(), target_before) == 0.0);

  cfg.tau = 0.05;
  auto geo = DdpgAgent::init(cfg, rng);
  perturb(geo);
  double gap = max_param_gap(geo.actor(), geo.target_actor());
  CHECK(gap == doctest::Approx(0.5));
  for (int k = 0; k < 60; ++k) {
    geo.soft_update();
    const double next = max_param_gap(geo.actor(), geo.target_actor());
    CHECK(next == doctest::Approx(0.95 * gap).epsilon(1e-9));
    gap = next;
  }
}

TEST_CASE("config validation") {
  auto cfg = small_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.gamma = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.tau = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.state_dim = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.random_eps = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

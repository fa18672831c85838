#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "acdc/config.hpp"

using namespace acdc;

TEST_CASE("defaults") {
  const RunConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.env_name == "point_push");
  CHECK(c.epochs == 50);
  CHECK(c.cycles_per_epoch == 10);
  CHECK(c.episodes_per_cycle == 10);
  CHECK(c.her_k == 4);
  CHECK(c.replay_capacity == 10000);
  CHECK(c.ac.lambda0 == 0.1);
  CHECK(c.ac.eta_base == 0.01);
  CHECK(c.ac.theta_low == 0.3);
  CHECK(c.ac.theta_high == 0.65);
  CHECK(c.ac.alpha_ema == 0.7);
  CHECK(c.ac.sigma == 0.2);
  CHECK(c.ac.lambda_cap == 10.0);
  CHECK(c.tau_p == 0.3);
  CHECK(c.tau_n == 0.3);
  CHECK(c.z_dim == 32);
  CHECK(c.lstm_hidden == 64);
  CHECK(c.key_frames == 5);
  CHECK(c.update_every == 5);
  CHECK(c.gamma == 0.98);
  CHECK(c.tau == 0.05);
  CHECK(c.random_eps == 0.2);
  CHECK(c.mode.mode == Mode::acdc);
}

TEST_CASE("parse key value text") {
  const auto c = RunConfig::parse(
      "# comment line\n"
      "env.name = reacher2\n"
      "  seed=42   # trailing comment\n"
      "\n"
      "dc.tau_p = 0.25\n"
      "ac.theta_low = 0.25\n"
      "ac.theta_high = 0.35\n"
      "dc.raw_lambda = true\n"
      "mode = fixed_lambda(0.5)\n"
      "workers = 4\n");
  CHECK(c.env_name == "reacher2");
  CHECK(c.seed == 42);
  CHECK(c.tau_p == 0.25);
  CHECK(c.ac.theta_low == 0.25);
  CHECK(c.raw_lambda);
  CHECK(c.mode.mode == Mode::fixed_lambda);
  CHECK(c.mode.fixed_lambda == 0.5);
  CHECK(c.workers == 4);
}

TEST_CASE("rejects unknown keys and malformed values") {
  CHECK_THROWS_AS(RunConfig::parse("dc.bogus = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::parse("epochs = ten\n"), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::parse("epochs = 1.5\n"), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::parse("epochs\n"), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::parse("epochs = 0\n"), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::parse("dc.tau_p = 0.7\ndc.tau_n = 0.4\n"), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::parse("ac.window = 3\n"), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::parse("env.name = fetch_push\n"), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::parse("dc.raw_lambda = maybe\n"), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::parse("mode = sac\n"), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::load("/nonexistent/acdc.conf"), std::runtime_error);
}

TEST_CASE("mode specs") {
  for (const char* m : {"acdc", "her_uniform", "ac_only", "ac_d_only", "ac_q_only"}) {
    CHECK(ModeSpec::parse(m).to_string() == m);
  }
  const auto f = ModeSpec::parse("fixed_lambda(2.5)");
  CHECK(f.fixed_lambda == 2.5);
  CHECK(f.to_string() == "fixed_lambda(2.5)");
  CHECK(f.uses_encoder());
  CHECK(ModeSpec::parse("acdc").uses_encoder());
  CHECK_FALSE(ModeSpec::parse("her_uniform").uses_scores());
  CHECK_FALSE(ModeSpec::parse("ac_d_only").uses_encoder());
  CHECK(ModeSpec::parse("ac_q_only").uses_scores());
  CHECK_THROWS_AS(ModeSpec::parse("fixed_lambda(-1)"), std::invalid_argument);
  CHECK_THROWS_AS(ModeSpec::parse("fixed_lambda(x)"), std::invalid_argument);
}

TEST_CASE("text round trip") {
  RunConfig c;
  c.seed = 123456789012345ULL;
  c.alpha_temp = 0.1 + 1e-17;
  c.ac.sigma = 1.0 / 3.0;
  c.mode = ModeSpec::parse("fixed_lambda(0.3333333333333333)");
  const auto text = c.to_text();
  const auto back = RunConfig::parse(text);
  CHECK(back.to_text() == text);
  CHECK(back.ac.sigma == c.ac.sigma);
  CHECK(back.seed == c.seed);
  CHECK(back.mode.fixed_lambda == c.mode.fixed_lambda);
  // every listed key parses on its own
  for (const auto& [k, v] : c.to_map()) {
    RunConfig d;
    CHECK_NOTHROW(d.set(k, v));
  }
}

TEST_CASE("load from file") {
  const auto path = std::filesystem::temp_directory_path() / "acdc_test.conf";
  {
    std::ofstream out(path);
    out << "epochs = 3\nmode = her_uniform\n";
  }
  const auto c = RunConfig::load(path);
  CHECK(c.epochs == 3);
  CHECK(c.mode.mode == Mode::her_uniform);
  std::filesystem::remove(path);
}

TEST_CASE("derived module configs") {
  RunConfig c;
  c.noise_sigma = 0.2;
  const auto a = c.agent_config(6, 2, 2, 2.0);
  CHECK(a.noise_sigma == 0.4);
  CHECK(a.state_dim == 6);
  CHECK(a.action_bound == 2.0);
  const auto e = c.encoder_config(3);
  CHECK(e.goal_dim == 3);
  CHECK(e.z_dim == 32);
  CHECK(e.alpha_temp == 0.1);
  CHECK(e.beta_norm == 1.0);
  CHECK(e.margin == 0.5);
}

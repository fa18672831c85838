#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "acdc/agent.hpp"
#include "acdc/contrastive.hpp"
#include "acdc/curriculum.hpp"

namespace acdc {

enum class Mode { acdc, her_uniform, ac_only, ac_d_only, ac_q_only, fixed_lambda };

struct ModeSpec {
  Mode mode = Mode::acdc;
  double fixed_lambda = 0.0;  // only for Mode::fixed_lambda

  // Accepts acdc, her_uniform, ac_only, ac_d_only, ac_q_only, fixed_lambda(<value>).
  static ModeSpec parse(const std::string& text);
  std::string to_string() const;
  bool uses_encoder() const { return mode == Mode::acdc || mode == Mode::fixed_lambda; }
  bool uses_scores() const { return mode != Mode::her_uniform; }
};

struct RunConfig {
  // env
  std::string env_name = "point_push";
  double env_epsilon = -1.0;  // <= 0 keeps the task default
  int env_horizon = -1;

  // replay / HER
  int replay_capacity = 10000;
  int her_k = 4;
  int batch_size = 256;

  curriculum::CurriculumParams ac;
  int success_window = 100;       // training episodes in the rolling s_r
  double priority_floor = 1e-3;   // added to raw scores in the ac_* modes

  // dc
  double tau_p = 0.3;
  double tau_n = 0.3;
  double alpha_temp = 0.1;
  double beta_norm = 1.0;
  double margin = 0.5;
  int z_dim = 32;
  int lstm_hidden = 64;
  int lambda_embed = 8;
  int update_every = 5;
  int key_frames = 5;
  double encoder_lr = 1e-3;
  bool raw_lambda = false;
  int pair_batch = 64;  // positives and negatives drawn per encoder step; 0 uses the full sets

  // agent
  double gamma = 0.98;
  double tau = 0.05;
  double noise_sigma = 0.2;  // fraction of action_bound
  double random_eps = 0.2;
  int hidden = 64;
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double action_l2 = 1.0;

  // loop
  std::uint64_t seed = 0;
  int epochs = 50;
  int cycles_per_epoch = 10;
  int episodes_per_cycle = 10;
  int updates_per_cycle = 100;
  int eval_episodes = 100;
  int workers = 1;
  int checkpoint_every = 1;
  ModeSpec mode;

  void validate() const;

  // Canonical "key = value" listing of every key, sorted by key.
  std::string to_text() const;
  std::map<std::string, std::string> to_map() const;

  // Applies one key; unknown keys and malformed values throw std::invalid_argument.
  void set(const std::string& key, const std::string& value);

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  contrastive::EncoderConfig encoder_config(int goal_dim) const;
  agent::AgentConfig agent_config(int state_dim, int goal_dim, int action_dim, double action_bound) const;
};

}  // namespace acdc

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>

#include "acdc/agent.hpp"
#include "acdc/config.hpp"
#include "acdc/env.hpp"
#include "acdc/metrics.hpp"
#include "acdc/replay.hpp"

namespace acdc::harness {

// Maps (state, desired goal) to an action.
using Policy = std::function<Vec(const Vec& state, const Vec& goal)>;

// Runs one episode from env.reset(seed). `act` receives the current state and goal.
replay::Trajectory rollout(const env::Env& env, std::uint64_t seed, std::int64_t episode_id,
                           const Policy& act);

// Fraction of n episodes whose final achieved goal is within epsilon of the
// desired goal. Episode i starts from env.reset(derive_seed(seed, i)).
double evaluate(const Policy& policy, const env::Env& env, int n_episodes, std::uint64_t seed);
double evaluate(const agent::DdpgAgent& agent, const env::Env& env, int n_episodes,
                std::uint64_t seed);

// Walks straight to the far side of the object and pushes it to the goal.
Policy point_push_oracle();

// Snapshot handed to RunHooks::on_cycle after sampling probabilities are fixed
// and before the agent updates of that cycle.
struct CycleInfo {
  int epoch = 0;  // 1-based
  int cycle = 0;  // 1-based
  const replay::ReplayBuffer* buffer = nullptr;
  std::span<const double> probabilities;
  std::span<const replay::Trajectory> new_episodes;
  double train_success_rate = 0.0;
  double lambda = 0.0;
  bool encoder_built = false;
  bool scores_computed = false;
};

struct RunHooks {
  std::function<void(const CycleInfo&)> on_cycle;
};

struct RunResult {
  RunMetrics metrics;
  std::filesystem::path out_dir;
  double wall_seconds = 0.0;
};

// Full training loop. Writes metrics.csv, curriculum.csv, manifest.json and
// checkpoints/epoch_<k> under out_dir.
RunResult run_training(const RunConfig& config, const std::filesystem::path& out_dir,
                       const RunHooks& hooks = {});

// FNV-1a over config text, seed and code version, as 16 hex digits.
std::string manifest_hash(const RunConfig& config, const std::string& code_version);

std::string code_version();

// Goal seed used for every per-epoch evaluation pass of a run.
std::uint64_t evaluation_seed(std::uint64_t run_seed);

// Rebuilds the agent stored in a checkpoint written by run_training.
struct LoadedAgent {
  std::unique_ptr<env::Env> env;
  agent::DdpgAgent agent;
};
LoadedAgent load_agent(const std::filesystem::path& checkpoint);

}  // namespace acdc::harness

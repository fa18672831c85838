#include "acdc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <deque>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "acdc/checkpoint.hpp"
#include "acdc/contrastive.hpp"
#include "acdc/curriculum.hpp"
#include "acdc/log.hpp"

#ifndef ACDC_CODE_VERSION
#define ACDC_CODE_VERSION "unknown"
#endif

namespace acdc::harness {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags for derive_seed.
enum : std::uint64_t {
  kAgentInit = 1,
  kEncoderInit = 2,
  kBatchSampling = 3,
  kEpisodeReset = 4,
  kEpisodeNoise = 5,
  kEvaluation = 6,
  kPairSampling = 7,
};

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::vector<double> normalized(std::vector<double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw std::runtime_error("sampling weights do not sum to a positive finite value");
  }
  for (double& w : weights) w /= total;
  return weights;
}

// Episodes [first, first + count) split into contiguous blocks, one per worker.
// Results land in slot order, so the commit order never depends on timing.
std::vector<replay::Trajectory> collect_episodes(const RunConfig& config, const env::Env& env,
                                                 const agent::DdpgAgent& agent, std::int64_t first,
                                                 int count) {
  std::vector<replay::Trajectory> out(static_cast<std::size_t>(count));
  const auto run_block = [&](const env::Env& worker_env, int begin, int end) {
    for (int i = begin; i < end; ++i) {
      const std::int64_t episode = first + i;
      Rng noise(derive_seed(config.seed, kEpisodeNoise, static_cast<std::uint64_t>(episode)));
      const Policy behaviour = [&](const Vec& s, const Vec& g) { return agent.rollout_action(s, g, noise); };
      out[static_cast<std::size_t>(i)] =
          rollout(worker_env, derive_seed(config.seed, kEpisodeReset, static_cast<std::uint64_t>(episode)),
                  episode, behaviour);
    }
  };

  const int workers = std::min(config.workers, count);
  if (workers <= 1) {
    run_block(env, 0, count);
    return out;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> threads;
  const int per = count / workers;
  const int extra = count % workers;
  int begin = 0;
  for (int w = 0; w < workers; ++w) {
    const int end = begin + per + (w < extra ? 1 : 0);
    threads.emplace_back([&, w, begin, end] {
      try {
        const auto own_env = env.clone();
        run_block(*own_env, begin, end);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
    begin = end;
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

struct EpochAccumulator {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  int updates = 0;
  double encoder_loss = 0.0;
  int encoder_steps = 0;
  double lambda = kNaN;
  double eta = kNaN;
  double mean_F = kNaN;
  double mu_pos = kNaN;
  double mu_neg = kNaN;
};

std::map<std::string, std::string> checkpoint_meta(const RunConfig& config, const env::Env& env,
                                                   int epoch) {
  const auto& spec = env.spec();
  return {
      {"env.name", config.env_name},
      {"env.epsilon", format_number(spec.epsilon)},
      {"env.horizon", std::to_string(spec.horizon)},
      {"state_dim", std::to_string(spec.state_dim)},
      {"goal_dim", std::to_string(spec.goal_dim)},
      {"action_dim", std::to_string(spec.action_dim)},
      {"action_bound", format_number(spec.action_bound)},
      {"agent.hidden", std::to_string(config.hidden)},
      {"mode", config.mode.to_string()},
      {"seed", std::to_string(config.seed)},
      {"epoch", std::to_string(epoch)},
      {"code_version", code_version()},
  };
}

}  // namespace

std::string code_version() { return ACDC_CODE_VERSION; }

std::uint64_t evaluation_seed(std::uint64_t run_seed) { return derive_seed(run_seed, kEvaluation); }

std::string manifest_hash(const RunConfig& config, const std::string& version) {
  std::uint64_t h = fnv1a(config.to_text());
  h = fnv1a("seed=" + std::to_string(config.seed), h);
  h = fnv1a("version=" + version, h);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

replay::Trajectory rollout(const env::Env& env, std::uint64_t seed, std::int64_t episode_id,
                           const Policy& act) {
  const auto& spec = env.spec();
  replay::Trajectory traj;
  traj.episode_id = episode_id;
  traj.states.reserve(static_cast<std::size_t>(spec.horizon) + 1);
  traj.actions.reserve(static_cast<std::size_t>(spec.horizon));
  traj.achieved_goals.reserve(static_cast<std::size_t>(spec.horizon) + 1);

  env::EnvState s = env.reset(seed);
  traj.desired_goal = s.desired_goal;
  traj.states.push_back(s.state);
  traj.achieved_goals.push_back(s.achieved_goal);
  for (int t = 0; t < spec.horizon; ++t) {
    Vec a = act(s.state, s.desired_goal);
    auto result = env.step(s, a);
    // Store the action the environment actually applied.
    traj.actions.push_back(a.cwiseMax(-spec.action_bound).cwiseMin(spec.action_bound));
    s = std::move(result.next);
    traj.states.push_back(s.state);
    traj.achieved_goals.push_back(s.achieved_goal);
  }
  traj.success = env::sparse_reward(traj.achieved_goals.back(), traj.desired_goal, spec.epsilon) == 0.0;
  return traj;
}

double evaluate(const Policy& policy, const env::Env& env, int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw std::invalid_argument("evaluate: need at least one episode");
  int successes = 0;
  for (int i = 0; i < n_episodes; ++i) {
    const auto traj = rollout(env, derive_seed(seed, static_cast<std::uint64_t>(i)), i, policy);
    successes += traj.success ? 1 : 0;
  }
  return static_cast<double>(successes) / n_episodes;
}

double evaluate(const agent::DdpgAgent& agent, const env::Env& env, int n_episodes, std::uint64_t seed) {
  Rng unused(0);
  const Policy policy = [&](const Vec& s, const Vec& g) { return agent.act(s, g, false, unused); };
  return evaluate(policy, env, n_episodes, seed);
}

Policy point_push_oracle() {
  using env::PointPush;
  return [](const Vec& state, const Vec& goal) -> Vec {
    const Eigen::Vector2d agent = state.segment(0, 2);
    const Eigen::Vector2d object = state.segment(2, 2);
    const Eigen::Vector2d to_goal = goal - object;
    const double remaining = to_goal.norm();
    Vec action = Vec::Zero(2);
    if (remaining < 0.01) return action;

    const Eigen::Vector2d d = to_goal / remaining;
    const Eigen::Vector2d perp(-d.y(), d.x());
    const Eigen::Vector2d rel = agent - object;
    const double along = rel.dot(d);
    const double lateral = rel.dot(perp);
    const double c = PointPush::kContact;

    Eigen::Vector2d move;
    if (along < -0.5 * c && std::abs(lateral) < 0.25 * c) {
      // Behind the object: push, correcting any sideways offset.
      const double gap = -along - c;
      const double push = std::min(PointPush::kMaxStep, remaining + std::max(gap, 0.0));
      move = d * push - perp * lateral;
    } else {
      // Approach without touching the object: sideways clear of it, back past it, then in behind.
      Eigen::Vector2d target;
      if (along < -1.2 * c) {
        target = object - d * (1.5 * c);
      } else if (std::abs(lateral) < 1.6 * c) {
        const double side = lateral >= 0.0 ? 1.0 : -1.0;
        target = agent + perp * (side * 1.8 * c - lateral);
      } else {
        target = agent - d * (along + 1.5 * c);
      }
      const Eigen::Vector2d delta = target - agent;
      const double len = delta.norm();
      move = len > PointPush::kMaxStep ? Eigen::Vector2d(delta * (PointPush::kMaxStep / len)) : delta;
    }
    action = move / PointPush::kMaxStep;
    const double peak = action.cwiseAbs().maxCoeff();
    if (peak > 1.0) action /= peak;
    return action;
  };
}

RunResult run_training(const RunConfig& config, const fs::path& out_dir, const RunHooks& hooks) {
  config.validate();
  const auto wall_start = std::chrono::steady_clock::now();
  const std::string started = utc_timestamp();

  const auto env = env::make_env(config.env_name, config.env_epsilon, config.env_horizon);
  const auto& spec = env->spec();
  const Mode mode = config.mode.mode;
  const bool use_scores = config.mode.uses_scores();
  const bool use_encoder = config.mode.uses_encoder();

  fs::create_directories(out_dir);
  if (config.checkpoint_every > 0) fs::create_directories(out_dir / "checkpoints");

  Rng agent_rng(derive_seed(config.seed, kAgentInit));
  auto agent = agent::DdpgAgent::init(
      config.agent_config(spec.state_dim, spec.goal_dim, spec.action_dim, spec.action_bound), agent_rng);

  std::optional<contrastive::EncoderNet> encoder;
  std::optional<nn::AdamState> encoder_adam;
  if (use_encoder) {
    Rng encoder_rng(derive_seed(config.seed, kEncoderInit));
    encoder = contrastive::EncoderNet::init(config.encoder_config(spec.goal_dim), encoder_rng);
    encoder_adam.emplace(config.encoder_lr);
  }

  replay::ReplayBuffer buffer(static_cast<std::size_t>(config.replay_capacity), spec.epsilon);
  auto curriculum_state = curriculum::CurriculumState::initial(config.ac);
  Rng batch_rng(derive_seed(config.seed, kBatchSampling));
  Rng pair_rng(derive_seed(config.seed, kPairSampling));
  const std::uint64_t eval_seed = evaluation_seed(config.seed);
  const int encoder_steps = std::max(1, config.updates_per_cycle / config.update_every);

  std::deque<bool> recent;
  std::int64_t episodes_seen = 0;
  RunResult result;
  result.out_dir = out_dir;
  std::ostringstream curriculum_csv;
  curriculum_csv << "epoch,cycle,train_success_rate,eta,lambda,t\n";

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochAccumulator acc;
    for (int cycle = 1; cycle <= config.cycles_per_epoch; ++cycle) {
      try {
        auto episodes = collect_episodes(config, *env, agent, episodes_seen, config.episodes_per_cycle);
        for (const auto& traj : episodes) {
          recent.push_back(traj.success);
          if (static_cast<int>(recent.size()) > config.success_window) recent.pop_front();
          buffer.store(traj);
        }
        episodes_seen += config.episodes_per_cycle;
        const double train_success =
            static_cast<double>(std::count(recent.begin(), recent.end(), true)) / recent.size();

        std::vector<double> probs;
        double lambda = kNaN;
        double eta = kNaN;
        if (!use_scores) {
          probs.assign(buffer.size(), 1.0 / static_cast<double>(buffer.size()));
        } else {
          std::vector<curriculum::TrajectoryScore> scores;
          if (mode == Mode::fixed_lambda) {
            lambda = config.mode.fixed_lambda;
            scores = curriculum::score_buffer_fixed(buffer, config.ac, lambda);
          } else {
            curriculum_state.success_rate = train_success;
            scores = curriculum::score_buffer(buffer, curriculum_state);
            lambda = scores.front().lambda_used;
            eta = curriculum_state.eta_previous;
          }
          double f_sum = 0.0;
          for (const auto& s : scores) f_sum += s.F;
          acc.mean_F = f_sum / static_cast<double>(scores.size());

          if (use_encoder && scores.size() >= 2) {
            const auto pairs = contrastive::select_pairs(scores, config.tau_p, config.tau_n);
            std::vector<const replay::Trajectory*> pos, neg;
            for (auto id : pairs.positives) pos.push_back(&buffer.find(id));
            for (auto id : pairs.negatives) neg.push_back(&buffer.find(id));
            for (int step = 0; step < encoder_steps; ++step) {
              std::vector<const replay::Trajectory*> pos_batch = pos, neg_batch = neg;
              const auto subsample = [&](std::vector<const replay::Trajectory*>& set) {
                if (config.pair_batch <= 0 || static_cast<int>(set.size()) <= config.pair_batch) return;
                std::vector<const replay::Trajectory*> picked;
                picked.reserve(static_cast<std::size_t>(config.pair_batch));
                std::uniform_int_distribution<std::size_t> pick(0, set.size() - 1);
                for (int i = 0; i < config.pair_batch; ++i) picked.push_back(set[pick(pair_rng)]);
                set = std::move(picked);
              };
              subsample(pos_batch);
              subsample(neg_batch);
              const auto trace =
                  contrastive::train_encoder(*encoder, *encoder_adam, pos_batch, neg_batch, lambda, 1);
              acc.encoder_loss += trace.losses.front();
              ++acc.encoder_steps;
              acc.mu_pos = trace.mu_pos;
              acc.mu_neg = trace.mu_neg;
            }
            probs = contrastive::sampling_probabilities(*encoder, buffer, lambda);
          } else if (use_encoder) {
            probs.assign(buffer.size(), 1.0 / static_cast<double>(buffer.size()));
          } else {
            std::vector<double> weights;
            weights.reserve(scores.size());
            for (const auto& s : scores) {
              const double raw = mode == Mode::ac_d_only ? s.d_norm : mode == Mode::ac_q_only ? s.q : s.F;
              weights.push_back(raw + config.priority_floor);
            }
            probs = normalized(std::move(weights));
          }
        }
        acc.lambda = lambda;
        acc.eta = eta;
        curriculum_csv << epoch << ',' << cycle << ',' << format_number(train_success) << ','
                       << format_number(eta) << ',' << format_number(lambda) << ','
                       << (use_scores && mode != Mode::fixed_lambda ? std::to_string(curriculum_state.t) : "nan")
                       << '\n';

        if (hooks.on_cycle) {
          CycleInfo info;
          info.epoch = epoch;
          info.cycle = cycle;
          info.buffer = &buffer;
          info.probabilities = probs;
          info.new_episodes = episodes;
          info.train_success_rate = train_success;
          info.lambda = lambda;
          info.encoder_built = encoder.has_value();
          info.scores_computed = use_scores;
          hooks.on_cycle(info);
        }

        for (int u = 0; u < config.updates_per_cycle; ++u) {
          const auto batch = replay::sample_batch(buffer, probs, config.batch_size, config.her_k, batch_rng);
          const auto stats = agent.update(batch);
          acc.actor_loss += stats.actor_loss;
          acc.critic_loss += stats.critic_loss;
          ++acc.updates;
          agent.soft_update();
        }
      } catch (const std::exception& e) {
        throw std::runtime_error("epoch " + std::to_string(epoch) + " cycle " + std::to_string(cycle) +
                                 ": " + e.what());
      }
    }

    MetricsRow row;
    row.epoch = epoch;
    row.episodes_seen = episodes_seen;
    row.success_rate = evaluate(agent, *env, config.eval_episodes, eval_seed);
    row.lambda = acc.lambda;
    row.eta = acc.eta;
    row.mean_F = acc.mean_F;
    row.mu_pos_norm = acc.mu_pos;
    row.mu_neg_norm = acc.mu_neg;
    row.actor_loss = acc.actor_loss / acc.updates;
    row.critic_loss = acc.critic_loss / acc.updates;
    row.encoder_loss = acc.encoder_steps > 0 ? acc.encoder_loss / acc.encoder_steps : kNaN;
    result.metrics.rows.push_back(row);
    write_metrics_csv(out_dir / "metrics.csv", result.metrics);
    log_info("epoch " + std::to_string(epoch) + " success " + format_number(row.success_rate) +
             " lambda " + format_number(row.lambda));

    if (epoch % config.checkpoint_every == 0 || epoch == config.epochs) {
      nn::ParamList blocks;
      agent.collect(blocks);
      if (encoder) encoder->collect(blocks);
      nn::save_checkpoint(out_dir / "checkpoints" / ("epoch_" + std::to_string(epoch)),
                          checkpoint_meta(config, *env, epoch), blocks);
    }
  }

  write_text(out_dir / "curriculum.csv", curriculum_csv.str());
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();

  const auto rates = result.metrics.success_rates();
  nlohmann::ordered_json manifest;
  manifest["config"] = config.to_map();
  manifest["mode"] = config.mode.to_string();
  manifest["seed"] = config.seed;
  manifest["code_version"] = code_version();
  manifest["hash"] = manifest_hash(config, code_version());
  manifest["start_time"] = started;
  manifest["end_time"] = utc_timestamp();
  manifest["wall_seconds"] = result.wall_seconds;
  nlohmann::ordered_json ttt;
  for (double theta : {0.5, 0.7, 0.9}) {
    const auto hit = time_to_threshold(rates, theta);
    ttt[format_number(theta)] = hit ? nlohmann::ordered_json(*hit) : nlohmann::ordered_json(nullptr);
  }
  manifest["ttt"] = ttt;
  manifest["cumulative_regret"] = cumulative_regret(rates);
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

LoadedAgent load_agent(const fs::path& checkpoint) {
  const auto ck = nn::load_checkpoint(checkpoint);
  const auto meta = [&](const std::string& key) {
    auto it = ck.meta.find(key);
    if (it == ck.meta.end()) throw std::runtime_error(checkpoint.string() + ": missing meta key " + key);
    return it->second;
  };
  LoadedAgent out{env::make_env(meta("env.name"), std::stod(meta("env.epsilon")),
                                std::stoi(meta("env.horizon"))),
                  {}};
  const auto& spec = out.env->spec();
  agent::AgentConfig cfg;
  cfg.state_dim = spec.state_dim;
  cfg.goal_dim = spec.goal_dim;
  cfg.action_dim = spec.action_dim;
  cfg.action_bound = spec.action_bound;
  cfg.hidden = std::stoi(meta("agent.hidden"));
  Rng rng(0);
  out.agent = agent::DdpgAgent::init(cfg, rng);
  nn::ParamList blocks;
  out.agent.collect(blocks);
  nn::restore_blocks(ck, blocks);
  return out;
}

}  // namespace acdc::harness

#include "acdc/replay.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "acdc/env.hpp"

namespace acdc::replay {

void validate(const Trajectory& trajectory) {
  const auto& tr = trajectory;
  if (tr.actions.empty()) throw std::invalid_argument("trajectory has no actions");
  if (tr.states.size() != tr.actions.size() + 1) {
    throw std::invalid_argument("trajectory: |states| != |actions| + 1");
  }
  if (tr.achieved_goals.size() != tr.states.size()) {
    throw std::invalid_argument("trajectory: |achieved_goals| != |states|");
  }
  const auto goal_dim = tr.desired_goal.size();
  if (goal_dim == 0) throw std::invalid_argument("trajectory: empty desired goal");
  const auto state_dim = tr.states.front().size();
  const auto action_dim = tr.actions.front().size();
  for (std::size_t i = 0; i < tr.states.size(); ++i) {
    if (tr.states[i].size() != state_dim || tr.achieved_goals[i].size() != goal_dim) {
      throw std::invalid_argument("trajectory: inconsistent vector size at step " +
                                  std::to_string(i));
    }
    if (!tr.states[i].allFinite() || !tr.achieved_goals[i].allFinite()) {
      throw std::invalid_argument("trajectory: non-finite value at step " + std::to_string(i));
    }
  }
  for (const auto& a : tr.actions) {
    if (a.size() != action_dim || !a.allFinite()) {
      throw std::invalid_argument("trajectory: malformed action");
    }
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, double epsilon)
    : capacity_(capacity), epsilon_(epsilon) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  if (!(epsilon > 0.0)) throw std::invalid_argument("ReplayBuffer: epsilon must be positive");
}

void ReplayBuffer::store(Trajectory trajectory) {
  validate(trajectory);
  if (!trajectories_.empty()) {
    const auto& ref = trajectories_.front();
    if (trajectory.states.front().size() != ref.states.front().size() ||
        trajectory.desired_goal.size() != ref.desired_goal.size() ||
        trajectory.actions.size() != ref.actions.size()) {
      throw std::invalid_argument("ReplayBuffer: trajectory shape differs from buffer contents");
    }
  }
  if (index_.contains(trajectory.episode_id)) {
    throw std::invalid_argument("ReplayBuffer: duplicate episode_id " +
                                std::to_string(trajectory.episode_id));
  }
  if (trajectories_.size() == capacity_) {
    index_.erase(trajectories_.front().episode_id);
    trajectories_.pop_front();
  }
  index_.emplace(trajectory.episode_id, total_stored_);
  trajectories_.push_back(std::move(trajectory));
  ++total_stored_;
}

const Trajectory& ReplayBuffer::find(std::int64_t episode_id) const {
  auto it = index_.find(episode_id);
  if (it == index_.end()) {
    throw std::out_of_range("ReplayBuffer: episode " + std::to_string(episode_id) + " not stored");
  }
  const auto oldest = total_stored_ - static_cast<std::int64_t>(trajectories_.size());
  return trajectories_[static_cast<std::size_t>(it->second - oldest)];
}

namespace {

// Index of a future achieved goal for transition t: uniform over t+1 .. T.
std::size_t draw_future_index(int t, int horizon, Rng& rng) {
  std::uniform_int_distribution<int> future(t + 1, horizon);
  return static_cast<std::size_t>(future(rng));
}

}  // namespace

std::vector<Transition> her_relabel(const Trajectory& trajectory, int t, int k, double epsilon,
                                    Rng& rng) {
  const int horizon = trajectory.horizon();
  if (t < 0 || t >= horizon) throw std::out_of_range("her_relabel: step index out of range");
  if (k < 0) throw std::invalid_argument("her_relabel: k must be nonnegative");

  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const Vec& goal = trajectory.achieved_goals[draw_future_index(t, horizon, rng)];
    Transition tr;
    tr.state = trajectory.states[static_cast<std::size_t>(t)];
    tr.action = trajectory.actions[static_cast<std::size_t>(t)];
    tr.next_state = trajectory.states[static_cast<std::size_t>(t + 1)];
    tr.goal = goal;
    tr.reward =
        env::sparse_reward(trajectory.achieved_goals[static_cast<std::size_t>(t + 1)], goal, epsilon);
    out.push_back(std::move(tr));
  }
  return out;
}

TransitionBatch sample_batch(const ReplayBuffer& buffer, std::span<const double> trajectory_probs,
                             int batch_size, int k, Rng& rng) {
  if (buffer.empty()) throw std::invalid_argument("sample_batch: empty buffer");
  if (trajectory_probs.size() != buffer.size()) {
    throw std::invalid_argument("sample_batch: probability vector length " +
                                std::to_string(trajectory_probs.size()) + " != buffer size " +
                                std::to_string(buffer.size()));
  }
  if (batch_size <= 0) throw std::invalid_argument("sample_batch: batch_size must be positive");
  if (k < 0) throw std::invalid_argument("sample_batch: k must be nonnegative");
  double total = 0.0;
  for (double p : trajectory_probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("sample_batch: probabilities must be finite and nonnegative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("sample_batch: probabilities must sum to 1");
  }

  const auto& first = buffer.at(0);
  const auto state_dim = first.states.front().size();
  const auto action_dim = first.actions.front().size();
  const auto goal_dim = first.desired_goal.size();

  TransitionBatch batch;
  batch.states.resize(state_dim, batch_size);
  batch.next_states.resize(state_dim, batch_size);
  batch.actions.resize(action_dim, batch_size);
  batch.goals.resize(goal_dim, batch_size);
  batch.rewards.resize(batch_size);
  batch.dones = Vec::Zero(batch_size);
  batch.source_episode.resize(static_cast<std::size_t>(batch_size));
  batch.step_index.resize(static_cast<std::size_t>(batch_size));
  batch.relabeled.resize(static_cast<std::size_t>(batch_size));

  std::discrete_distribution<std::size_t> pick(trajectory_probs.begin(), trajectory_probs.end());
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double relabel_prob = static_cast<double>(k) / static_cast<double>(k + 1);
  const double epsilon = buffer.epsilon();

  for (int b = 0; b < batch_size; ++b) {
    const auto& tr = buffer.at(pick(rng));
    std::uniform_int_distribution<int> step(0, tr.horizon() - 1);
    const int t = step(rng);
    const auto ts = static_cast<std::size_t>(t);
    const auto bs = static_cast<std::size_t>(b);
    batch.source_episode[bs] = tr.episode_id;
    batch.step_index[bs] = t;
    if (coin(rng) < relabel_prob) {
      const Vec& goal = tr.achieved_goals[draw_future_index(t, tr.horizon(), rng)];
      batch.goals.col(b) = goal;
      batch.rewards(b) = env::sparse_reward(tr.achieved_goals[ts + 1], goal, epsilon);
      batch.relabeled[bs] = true;
    } else {
      batch.goals.col(b) = tr.desired_goal;
      batch.rewards(b) = env::sparse_reward(tr.achieved_goals[ts + 1], tr.desired_goal, epsilon);
      batch.relabeled[bs] = false;
    }
    batch.states.col(b) = tr.states[ts];
    batch.actions.col(b) = tr.actions[ts];
    batch.next_states.col(b) = tr.states[ts + 1];
  }
  return batch;
}

}  // namespace acdc::replay

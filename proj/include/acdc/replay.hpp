#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <unordered_map>
#include <vector>

#include "acdc/types.hpp"

namespace acdc::replay {

// One episode. achieved_goals[i] = phi(states[i]); |states| = |actions| + 1.
struct Trajectory {
  std::vector<Vec> states;
  std::vector<Vec> actions;
  std::vector<Vec> achieved_goals;
  Vec desired_goal;
  std::int64_t episode_id = 0;
  bool success = false;

  int horizon() const { return static_cast<int>(actions.size()); }
};

// Throws std::invalid_argument describing the first violated invariant.
void validate(const Trajectory& trajectory);

struct Transition {
  Vec state;
  Vec action;
  Vec next_state;
  double reward = -1.0;
  Vec goal;
};

// Column-major batch: column b of each matrix is transition b.
struct TransitionBatch {
  Mat states;
  Mat actions;
  Mat next_states;
  Mat goals;
  Vec rewards;
  Vec dones;  // time-limit truncation is not termination; always 0 from sample_batch
  std::vector<std::int64_t> source_episode;
  std::vector<int> step_index;
  std::vector<bool> relabeled;

  int size() const { return static_cast<int>(rewards.size()); }
};

// Bounded FIFO of whole trajectories. Single writer.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, double epsilon);

  void store(Trajectory trajectory);

  std::size_t size() const { return trajectories_.size(); }
  bool empty() const { return trajectories_.empty(); }
  std::size_t capacity() const { return capacity_; }
  std::int64_t total_stored() const { return total_stored_; }
  double epsilon() const { return epsilon_; }

  // Index 0 is the oldest retained trajectory.
  const Trajectory& at(std::size_t index) const { return trajectories_.at(index); }
  // Monotone arrival counter of the trajectory at `index`; larger is newer.
  std::int64_t sequence(std::size_t index) const {
    return total_stored_ - static_cast<std::int64_t>(trajectories_.size()) +
           static_cast<std::int64_t>(index);
  }

  bool contains(std::int64_t episode_id) const { return index_.contains(episode_id); }
  const Trajectory& find(std::int64_t episode_id) const;

 private:
  std::size_t capacity_;
  double epsilon_;
  std::deque<Trajectory> trajectories_;
  std::unordered_map<std::int64_t, std::int64_t> index_;  // episode_id -> sequence
  std::int64_t total_stored_ = 0;
};

// HER "future" relabeling of transition t: k copies whose goal g' is drawn
// uniformly from achieved_goals[t+1 .. T], reward recomputed from scratch.
std::vector<Transition> her_relabel(const Trajectory& trajectory, int t, int k, double epsilon,
                                    Rng& rng);

// Picks a trajectory with probability trajectory_probs[i], a uniform step
// within it, then relabels with probability k/(k+1).
TransitionBatch sample_batch(const ReplayBuffer& buffer, std::span<const double> trajectory_probs,
                             int batch_size, int k, Rng& rng);

}  // namespace acdc::replay

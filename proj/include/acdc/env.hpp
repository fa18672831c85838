#pragma once

#include <memory>
#include <string>

#include "acdc/types.hpp"

namespace acdc::env {

struct GoalSpaceSpec {
  int state_dim = 0;
  int action_dim = 0;
  int goal_dim = 0;
  double epsilon = 0.0;  // success tolerance in goal units
  int horizon = 0;       // T
  double action_bound = 1.0;

  // Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
};

struct EnvState {
  Vec state;
  Vec achieved_goal;
  Vec desired_goal;
  int step_index = 0;
};

struct StepResult {
  EnvState next;
  double reward = -1.0;
  bool done = false;
  bool clipped = false;  // some action component was outside the bound
};

// Sparse binary reward: 0 when ||achieved - desired|| <= epsilon, -1 otherwise.
double sparse_reward(const Vec& achieved, const Vec& desired, double epsilon);

// A deterministic goal-conditioned task. Instances hold no mutable state;
// the whole episode lives in EnvState, so a single instance may be shared
// read-only across threads.
class Env {
 public:
  explicit Env(GoalSpaceSpec spec) : spec_(spec) { spec_.validate(); }
  virtual ~Env() = default;

  const GoalSpaceSpec& spec() const { return spec_; }
  virtual std::string name() const = 0;

  // Projection phi: state -> achieved goal.
  virtual Vec achieved_goal(const Vec& state) const = 0;

  EnvState reset(std::uint64_t seed) const;
  StepResult step(const EnvState& current, const Vec& action) const;

  virtual std::unique_ptr<Env> clone() const = 0;

 protected:
  // Returns (initial state, desired goal).
  virtual std::pair<Vec, Vec> sample_initial(Rng& rng) const = 0;
  // Applies an already clipped action.
  virtual Vec transition(const Vec& state, const Vec& action) const = 0;

 private:
  GoalSpaceSpec spec_;
};

// Agent point pushes an object point across the square [-0.5, 0.5]^2.
// state = [agent xy, object xy, object velocity xy]; phi = object xy.
class PointPush final : public Env {
 public:
  static constexpr double kHalfExtent = 0.5;
  static constexpr double kMaxStep = 0.05;     // agent displacement per unit action
  static constexpr double kContact = 0.06;     // agent/object contact distance
  static constexpr double kSampleExtent = 0.35;  // agent start, object and goal stay inside
  static constexpr double kObjectRange = 0.15;   // object and goal offsets from the agent start
  static constexpr double kDt = 0.1;

  explicit PointPush(double epsilon = 0.05, int horizon = 50);

  std::string name() const override { return "point_push"; }
  Vec achieved_goal(const Vec& state) const override { return state.segment(2, 2); }
  std::unique_ptr<Env> clone() const override { return std::make_unique<PointPush>(*this); }

 protected:
  std::pair<Vec, Vec> sample_initial(Rng& rng) const override;
  Vec transition(const Vec& state, const Vec& action) const override;
};

// Two-link planar arm driven by joint velocity commands.
// state = [theta1, theta2, end-effector xy]; phi = end-effector xy.
class Reacher2 final : public Env {
 public:
  static constexpr double kLink1 = 0.25;
  static constexpr double kLink2 = 0.2;
  static constexpr double kMaxJointStep = 0.1;  // radians per unit action

  explicit Reacher2(double epsilon = 0.02, int horizon = 50);

  std::string name() const override { return "reacher2"; }
  Vec achieved_goal(const Vec& state) const override { return state.segment(2, 2); }
  std::unique_ptr<Env> clone() const override { return std::make_unique<Reacher2>(*this); }

  static Vec forward_kinematics(double theta1, double theta2);

 protected:
  std::pair<Vec, Vec> sample_initial(Rng& rng) const override;
  Vec transition(const Vec& state, const Vec& action) const override;
};

// name in {point_push, reacher2}; non-positive overrides keep the task default.
std::unique_ptr<Env> make_env(const std::string& name, double epsilon = -1.0, int horizon = -1);

}  // namespace acdc::env

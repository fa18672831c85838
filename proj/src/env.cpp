#include "acdc/env.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace acdc::env {

void GoalSpaceSpec::validate() const {
  if (state_dim <= 0 || action_dim <= 0 || goal_dim <= 0) {
    throw std::invalid_argument("GoalSpaceSpec: dimensions must be positive");
  }
  if (goal_dim > state_dim) {
    throw std::invalid_argument("GoalSpaceSpec: goal_dim exceeds state_dim");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("GoalSpaceSpec: epsilon must be > 0");
  if (horizon < 2) throw std::invalid_argument("GoalSpaceSpec: horizon must be >= 2");
  if (!(action_bound > 0.0)) throw std::invalid_argument("GoalSpaceSpec: action_bound must be > 0");
}

double sparse_reward(const Vec& achieved, const Vec& desired, double epsilon) {
  if (achieved.size() != desired.size()) {
    throw std::invalid_argument("sparse_reward: goal dimension mismatch");
  }
  return (achieved - desired).norm() <= epsilon ? 0.0 : -1.0;
}

EnvState Env::reset(std::uint64_t seed) const {
  Rng rng(seed);
  auto [state, goal] = sample_initial(rng);
  EnvState out;
  out.achieved_goal = achieved_goal(state);
  out.state = std::move(state);
  out.desired_goal = std::move(goal);
  out.step_index = 0;
  return out;
}

StepResult Env::step(const EnvState& current, const Vec& action) const {
  if (current.step_index >= spec_.horizon) {
    throw std::logic_error("Env::step: episode already done");
  }
  if (action.size() != spec_.action_dim) {
    throw std::invalid_argument("Env::step: action dimension mismatch");
  }
  StepResult out;
  Vec clipped = action.cwiseMax(-spec_.action_bound).cwiseMin(spec_.action_bound);
  out.clipped = (clipped.array() != action.array()).any();

  out.next.state = transition(current.state, clipped);
  out.next.achieved_goal = achieved_goal(out.next.state);
  out.next.desired_goal = current.desired_goal;
  out.next.step_index = current.step_index + 1;
  out.reward = sparse_reward(out.next.achieved_goal, out.next.desired_goal, spec_.epsilon);
  out.done = out.next.step_index == spec_.horizon;
  return out;
}

// ---------------------------------------------------------------------------

PointPush::PointPush(double epsilon, int horizon)
    : Env(GoalSpaceSpec{6, 2, 2, epsilon, horizon, 1.0}) {}

std::pair<Vec, Vec> PointPush::sample_initial(Rng& rng) const {
  std::uniform_real_distribution<double> pos(-kSampleExtent, kSampleExtent);
  std::uniform_real_distribution<double> offset(-kObjectRange, kObjectRange);
  const auto near_start = [&](const Eigen::Vector2d& start) {
    Eigen::Vector2d p(start.x() + offset(rng), start.y() + offset(rng));
    return Eigen::Vector2d(p.cwiseMax(-kSampleExtent).cwiseMin(kSampleExtent));
  };
  Vec state = Vec::Zero(6);
  const Eigen::Vector2d agent(pos(rng), pos(rng));
  state.segment(0, 2) = agent;
  // Object starts clear of the agent so the first step never begins in contact.
  Eigen::Vector2d object;
  do {
    object = near_start(agent);
  } while ((object - agent).norm() < 2.0 * kContact);
  state.segment(2, 2) = object;
  const Vec goal = near_start(agent);
  return {state, goal};
}

Vec PointPush::transition(const Vec& state, const Vec& action) const {
  Eigen::Vector2d agent = state.segment(0, 2);
  const Eigen::Vector2d object = state.segment(2, 2);
  const Eigen::Vector2d move = action * kMaxStep;

  agent = (agent + move).cwiseMax(-kHalfExtent).cwiseMin(kHalfExtent);
  Eigen::Vector2d pushed = object;
  Eigen::Vector2d offset = object - agent;
  const double dist = offset.norm();
  if (dist < kContact) {
    Eigen::Vector2d dir;
    if (dist > 0.0) {
      dir = offset / dist;
    } else if (move.norm() > 0.0) {
      dir = move.normalized();
    } else {
      dir = Eigen::Vector2d(1.0, 0.0);
    }
    pushed = (agent + kContact * dir).cwiseMax(-kHalfExtent).cwiseMin(kHalfExtent);
    // Object pinned against a wall stops the agent at contact distance.
    if ((pushed - agent).norm() < kContact) agent = pushed - kContact * dir;
  }

  Vec next(6);
  next.segment(0, 2) = agent;
  next.segment(2, 2) = pushed;
  next.segment(4, 2) = (pushed - object) / kDt;
  return next;
}

// ---------------------------------------------------------------------------

Reacher2::Reacher2(double epsilon, int horizon)
    : Env(GoalSpaceSpec{4, 2, 2, epsilon, horizon, 1.0}) {}

Vec Reacher2::forward_kinematics(double theta1, double theta2) {
  Vec ee(2);
  ee(0) = kLink1 * std::cos(theta1) + kLink2 * std::cos(theta1 + theta2);
  ee(1) = kLink1 * std::sin(theta1) + kLink2 * std::sin(theta1 + theta2);
  return ee;
}

namespace {

double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a < 0.0) a += two_pi;
  return a - std::numbers::pi;
}

}  // namespace

std::pair<Vec, Vec> Reacher2::sample_initial(Rng& rng) const {
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  Vec state(4);
  state(0) = angle(rng);
  state(1) = angle(rng);
  state.segment(2, 2) = forward_kinematics(state(0), state(1));
  const double g1 = angle(rng);
  const double g2 = angle(rng);
  return {state, forward_kinematics(g1, g2)};
}

Vec Reacher2::transition(const Vec& state, const Vec& action) const {
  Vec next(4);
  next(0) = wrap_angle(state(0) + kMaxJointStep * action(0));
  next(1) = wrap_angle(state(1) + kMaxJointStep * action(1));
  next.segment(2, 2) = forward_kinematics(next(0), next(1));
  return next;
}

std::unique_ptr<Env> make_env(const std::string& name, double epsilon, int horizon) {
  if (name == "point_push") {
    return std::make_unique<PointPush>(epsilon > 0.0 ? epsilon : 0.05, horizon > 0 ? horizon : 50);
  }
  if (name == "reacher2") {
    return std::make_unique<Reacher2>(epsilon > 0.0 ? epsilon : 0.02, horizon > 0 ? horizon : 50);
  }
  throw std::invalid_argument("make_env: unknown environment '" + name + "'");
}

}  // namespace acdc::env

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "acdc/replay.hpp"
#include "acdc/types.hpp"

namespace acdc::curriculum {

struct CurriculumParams {
  double lambda0 = 0.1;
  double eta_base = 0.01;
  double theta_low = 0.3;
  double theta_high = 0.65;
  double alpha_ema = 0.7;
  double sigma = 0.2;
  double lambda_cap = 10.0;
  int window = 2;

  void validate() const;
};

struct CurriculumState {
  CurriculumParams params;
  double eta_previous = 0.01;  // after ema_update this is the current smoothed rate
  double eta_target = 0.01;
  std::int64_t t = 0;          // advances once per scoring call
  double success_rate = 0.0;   // s_r
  std::int64_t cap_events = 0;

  static CurriculumState initial(const CurriculumParams& params);
};

struct TrajectoryScore {
  std::int64_t episode_id = 0;
  std::int64_t sequence = 0;  // buffer arrival order, larger is newer
  double d_raw = 0.0;
  double d_norm = 0.0;
  double q = 0.0;
  double F = 0.0;
  double lambda_used = 0.0;
};

// det(G^T G) for G = [a/|a|, b/|b|], i.e. 1 - cos^2 of the angle between a and b.
// A zero vector normalizes to zero and contributes 0.
double partial_diversity(const Vec& a, const Vec& b);

// Sum of partial_diversity over consecutive pairs of `goals` (window of 2).
double sequence_diversity(std::span<const Vec> goals);

// Diversity of the achieved goals g_1 .. g_T (the goal reached after each action).
double trajectory_diversity(const replay::Trajectory& trajectory);

// Min-max scaling against the given scores; a degenerate range maps to 0.5.
std::vector<double> normalize_diversity(std::span<const double> raw_scores);

// exp(-|final - desired|^2 / (2 sigma^2)).
double quality_score(const Vec& final_achieved, const Vec& desired, double sigma);

// Three-tier growth rate (0.5, 1.0, 2.0) x eta_base gated by success rate.
double adaptive_growth_rate(const CurriculumParams& params, double success_rate);

// EMA smoothing of the growth rate toward the tier selected by state.success_rate.
CurriculumState ema_update(const CurriculumState& state);

// lambda0 * (1 + eta)^t using the state's current smoothed eta, capped at lambda_cap.
double adaptive_weight(const CurriculumState& state);

// One curriculum step over the whole buffer: EMA update, weight, then
// F = d_norm + lambda * q for every trajectory under the same lambda. Advances t.
std::vector<TrajectoryScore> score_buffer(const replay::ReplayBuffer& buffer,
                                          CurriculumState& state);

// Same scoring under a caller-chosen constant lambda; touches no curriculum state.
std::vector<TrajectoryScore> score_buffer_fixed(const replay::ReplayBuffer& buffer,
                                                const CurriculumParams& params, double lambda);

}  // namespace acdc::curriculum

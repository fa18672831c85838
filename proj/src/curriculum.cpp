#include "acdc/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "acdc/log.hpp"

namespace acdc::curriculum {

void CurriculumParams::validate() const {
  if (!(theta_low > 0.0 && theta_low < theta_high && theta_high < 1.0)) {
    throw std::invalid_argument("curriculum: need 0 < theta_low < theta_high < 1");
  }
  if (!(alpha_ema > 0.0 && alpha_ema <= 1.0)) {
    throw std::invalid_argument("curriculum: alpha_ema must lie in (0, 1]");
  }
  if (!(eta_base > 0.0)) throw std::invalid_argument("curriculum: eta_base must be positive");
  if (!(lambda0 > 0.0)) throw std::invalid_argument("curriculum: lambda0 must be positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("curriculum: sigma must be positive");
  if (!(lambda_cap >= lambda0)) throw std::invalid_argument("curriculum: lambda_cap below lambda0");
  if (window != 2) {
    throw std::invalid_argument("curriculum: only a diversity window of 2 is supported");
  }
}

CurriculumState CurriculumState::initial(const CurriculumParams& params) {
  params.validate();
  CurriculumState state;
  state.params = params;
  state.eta_previous = params.eta_base;
  state.eta_target = params.eta_base;
  return state;
}

double partial_diversity(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("partial_diversity: dimension mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  const Vec ua = a / na;
  const Vec ub = b / nb;
  // Gram matrix [[ua.ua, ua.ub], [ub.ua, ub.ub]]
  const double aa = ua.squaredNorm();
  const double bb = ub.squaredNorm();
  const double ab = ua.dot(ub);
  return std::clamp(aa * bb - ab * ab, 0.0, 1.0);
}

double sequence_diversity(std::span<const Vec> goals) {
  double total = 0.0;
  for (std::size_t j = 1; j < goals.size(); ++j) total += partial_diversity(goals[j - 1], goals[j]);
  return total;
}

double trajectory_diversity(const replay::Trajectory& trajectory) {
  const auto& goals = trajectory.achieved_goals;
  if (goals.size() < 2) return 0.0;
  return sequence_diversity(std::span<const Vec>(goals).subspan(1));
}

std::vector<double> normalize_diversity(std::span<const double> raw_scores) {
  if (raw_scores.empty()) throw std::invalid_argument("normalize_diversity: no scores");
  const auto [lo, hi] = std::minmax_element(raw_scores.begin(), raw_scores.end());
  const double d_min = *lo;
  const double d_max = *hi;
  std::vector<double> out(raw_scores.size(), 0.5);
  if (d_max == d_min) return out;
  for (std::size_t i = 0; i < raw_scores.size(); ++i) {
    out[i] = (raw_scores[i] - d_min) / (d_max - d_min);
  }
  return out;
}

double quality_score(const Vec& final_achieved, const Vec& desired, double sigma) {
  if (final_achieved.size() != desired.size()) {
    throw std::invalid_argument("quality_score: dimension mismatch");
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("quality_score: sigma must be positive");
  return std::exp(-(final_achieved - desired).squaredNorm() / (2.0 * sigma * sigma));
}

double adaptive_growth_rate(const CurriculumParams& params, double success_rate) {
  if (success_rate < params.theta_low) return params.eta_base * 0.5;
  if (success_rate > params.theta_high) return params.eta_base * 2.0;
  return params.eta_base;
}

CurriculumState ema_update(const CurriculumState& state) {
  CurriculumState next = state;
  const double alpha = state.params.alpha_ema;
  next.eta_target = adaptive_growth_rate(state.params, state.success_rate);
  next.eta_previous = alpha * next.eta_target + (1.0 - alpha) * state.eta_previous;
  return next;
}

double adaptive_weight(const CurriculumState& state) {
  const auto& p = state.params;
  const double lambda = p.lambda0 * std::pow(1.0 + state.eta_previous, static_cast<double>(state.t));
  if (!(lambda <= p.lambda_cap)) return p.lambda_cap;  // also catches overflow to inf
  return lambda;
}

namespace {

std::vector<TrajectoryScore> score_with_lambda(const replay::ReplayBuffer& buffer, double sigma,
                                               double lambda) {
  const std::size_t n = buffer.size();
  std::vector<double> raw(n);
  for (std::size_t i = 0; i < n; ++i) raw[i] = trajectory_diversity(buffer.at(i));
  const auto normalized = normalize_diversity(raw);

  std::vector<TrajectoryScore> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& tr = buffer.at(i);
    auto& s = scores[i];
    s.episode_id = tr.episode_id;
    s.sequence = buffer.sequence(i);
    s.d_raw = raw[i];
    s.d_norm = normalized[i];
    s.q = quality_score(tr.achieved_goals.back(), tr.desired_goal, sigma);
    s.lambda_used = lambda;
    s.F = s.d_norm + lambda * s.q;
  }
  return scores;
}

}  // namespace

std::vector<TrajectoryScore> score_buffer(const replay::ReplayBuffer& buffer,
                                          CurriculumState& state) {
  if (buffer.empty()) throw std::invalid_argument("score_buffer: empty buffer");
  state = ema_update(state);
  const double lambda = adaptive_weight(state);
  if (lambda == state.params.lambda_cap) {
    if (state.cap_events == 0) {
      log_warn("curriculum weight reached cap " + std::to_string(lambda) + " at t=" +
               std::to_string(state.t));
    }
    ++state.cap_events;
  }
  auto scores = score_with_lambda(buffer, state.params.sigma, lambda);
  ++state.t;
  return scores;
}

std::vector<TrajectoryScore> score_buffer_fixed(const replay::ReplayBuffer& buffer,
                                                const CurriculumParams& params, double lambda) {
  if (buffer.empty()) throw std::invalid_argument("score_buffer: empty buffer");
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw std::invalid_argument("score_buffer_fixed: lambda must be finite and nonnegative");
  }
  return score_with_lambda(buffer, params.sigma, lambda);
}

}  // namespace acdc::curriculum

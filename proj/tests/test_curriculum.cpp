#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "acdc/curriculum.hpp"
#include "test_support.hpp"

using namespace acdc;
using namespace acdc::curriculum;

namespace {

// det(G^T G) of the explicit d x 2 matrix of unit-normalized goals.
double brute_force_gram_det(const Vec& a, const Vec& b) {
  Mat g(a.size(), 2);
  g.col(0) = a / a.norm();
  g.col(1) = b / b.norm();
  return (g.transpose() * g).determinant();
}

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

std::vector<std::size_t> ranking(const std::vector<double>& key) {
  std::vector<std::size_t> idx(key.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto i, auto j) { return key[i] > key[j]; });
  return idx;
}

}  // namespace

TEST_CASE("partial diversity examples") {
  CHECK(partial_diversity(v2(1, 0), v2(0, 1)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(partial_diversity(v2(0.3, -0.7), v2(0.3, -0.7)) == 0.0);
  CHECK(partial_diversity(v2(1, 0), v2(0.5, std::sqrt(3.0) / 2.0)) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(partial_diversity(v2(0, 0), v2(1, 0)) == 0.0);
  CHECK(partial_diversity(v2(1, 1), v2(-2, -2)) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK_THROWS_AS(partial_diversity(v2(1, 0), Vec::Ones(3)), std::invalid_argument);
}

TEST_CASE("partial diversity equals the brute-force Gram determinant") {
  Rng rng(101);
  for (int i = 0; i < 1000; ++i) {
    const int d = 2 + static_cast<int>(rng() % 7);
    const Vec a = testing::random_vec(rng, d), b = testing::random_vec(rng, d);
    const double expected = brute_force_gram_det(a, b);
    const double got = partial_diversity(a, b);
    CHECK(std::abs(got - expected) < 1e-9);
    CHECK(partial_diversity(a, a) == 0.0);
  }
}

TEST_CASE("partial diversity is symmetric and scale invariant") {
  Rng rng(102);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int i = 0; i < 500; ++i) {
    const Vec a = testing::random_vec(rng, 3), b = testing::random_vec(rng, 3);
    const double base = partial_diversity(a, b);
    CHECK(partial_diversity(b, a) == doctest::Approx(base).epsilon(1e-12));
    CHECK(partial_diversity(scale(rng) * a, scale(rng) * b) == doctest::Approx(base).epsilon(1e-9));
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
  }
}

TEST_CASE("sequence and trajectory diversity") {
  std::vector<Vec> orthogonal{v2(1, 0), v2(0, 1), v2(1, 0)};
  CHECK(sequence_diversity(orthogonal) == doctest::Approx(2.0).epsilon(1e-15));
  std::vector<Vec> constant(6, v2(0.2, 0.4));
  CHECK(sequence_diversity(constant) == 0.0);
  std::vector<Vec> single{v2(1, 0)};
  CHECK(sequence_diversity(single) == 0.0);

  // g_0 is excluded: windows run over the goals reached after each action
  replay::Trajectory tr;
  tr.achieved_goals = {v2(0, 1), v2(1, 0), v2(0, 1), v2(1, 0)};
  tr.states = tr.achieved_goals;
  tr.actions.assign(3, Vec::Zero(2));
  tr.desired_goal = v2(0, 0);
  CHECK(trajectory_diversity(tr) == doctest::Approx(2.0).epsilon(1e-15));

  Rng rng(103);
  for (int i = 0; i < 200; ++i) {
    const int T = 1 + static_cast<int>(rng() % 30);
    const auto t = testing::random_trajectory(rng, T, 2, i);
    const double d = trajectory_diversity(t);
    CHECK(d >= 0.0);
    CHECK(d <= T - 1 + 1e-12);
  }
}

TEST_CASE("min-max normalization") {
  const std::vector<double> raw{0.0, 5.0, 10.0};
  const auto n = normalize_diversity(raw);
  CHECK(n[0] == 0.0);
  CHECK(n[1] == 0.5);
  CHECK(n[2] == 1.0);
  CHECK(normalize_diversity(std::vector<double>{3.0}) == std::vector<double>{0.5});
  CHECK(normalize_diversity(std::vector<double>(4, 2.0)) == std::vector<double>(4, 0.5));
  CHECK_THROWS_AS(normalize_diversity(std::vector<double>{}), std::invalid_argument);

  Rng rng(104);
  std::uniform_real_distribution<double> u(0.0, 40.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(2 + rng() % 20);
    for (double& x : s) x = u(rng);
    const auto out = normalize_diversity(s);
    CHECK(*std::min_element(out.begin(), out.end()) == 0.0);
    CHECK(*std::max_element(out.begin(), out.end()) == 1.0);
    CHECK(ranking(out) == ranking(s));
  }
}

TEST_CASE("quality score") {
  CHECK(quality_score(v2(0.1, 0.1), v2(0.1, 0.1), 0.2) == 1.0);
  CHECK(std::abs(quality_score(v2(0.2, 0), v2(0, 0), 0.2) - std::exp(-0.5)) < 1e-12);
  double prev = 1.0;
  for (int i = 1; i <= 200; ++i) {
    const double q = quality_score(v2(0.005 * i, 0), v2(0, 0), 0.2);
    CHECK(q < prev);
    CHECK(q > 0.0);
    prev = q;
  }
  // near and far examples
  CHECK(quality_score(v2(0.0641, 0), v2(0, 0), 0.2) == doctest::Approx(0.95).epsilon(0.01));
  CHECK(quality_score(v2(0.412, 0), v2(0, 0), 0.2) == doctest::Approx(0.12).epsilon(0.01));
  CHECK_THROWS_AS(quality_score(v2(0, 0), Vec::Zero(3), 0.2), std::invalid_argument);
  CHECK_THROWS_AS(quality_score(v2(0, 0), v2(0, 0), 0.0), std::invalid_argument);
}

TEST_CASE("growth rate tiers") {
  const CurriculumParams p;
  CHECK(adaptive_growth_rate(p, 0.2) == 0.005);
  CHECK(adaptive_growth_rate(p, 0.5) == 0.01);
  CHECK(adaptive_growth_rate(p, 0.8) == 0.02);
  CHECK(adaptive_growth_rate(p, 0.0) == 0.005);
  CHECK(adaptive_growth_rate(p, 0.3) == 0.01);
  CHECK(adaptive_growth_rate(p, 0.65) == 0.01);
  CHECK(adaptive_growth_rate(p, 1.0) == 0.02);
  for (int i = 0; i <= 1000; ++i) {
    const double r = adaptive_growth_rate(p, i / 1000.0);
    CHECK((r == 0.005 || r == 0.01 || r == 0.02));
  }
}

TEST_CASE("EMA update") {
  auto s = CurriculumState::initial(CurriculumParams{});
  CHECK(s.eta_previous == 0.01);
  s.success_rate = 0.9;
  const auto next = ema_update(s);
  CHECK(next.eta_target == 0.02);
  CHECK(next.eta_previous == doctest::Approx(0.017).epsilon(1e-14));
  CHECK(s.eta_previous == 0.01);  // input untouched

  s.success_rate = 0.5;  // target 0.01 equals prev
  CHECK(ema_update(s).eta_previous == 0.01);

  s.success_rate = 0.1;  // target 0.005
  s.eta_previous = 1.0;
  double err = std::abs(s.eta_previous - 0.005);
  for (int i = 0; i < 10; ++i) {
    s = ema_update(s);
    const double e = std::abs(s.eta_previous - 0.005);
    CHECK(std::abs(e / err - 0.3) < 1e-12);
    err = e;
  }
  for (int i = 0; i < 100; ++i) s = ema_update(s);
  CHECK(s.eta_previous == doctest::Approx(0.005).epsilon(1e-12));
}

TEST_CASE("adaptive weight schedule") {
  auto s = CurriculumState::initial(CurriculumParams{});
  CHECK(adaptive_weight(s) == 0.1);
  s.t = 100;
  CHECK(std::abs(adaptive_weight(s) - 0.27048) < 1e-5);
  s.eta_previous = 0.0;
  CHECK(adaptive_weight(s) == 0.1);

  s.eta_previous = 0.013;
  double prev = 0.0;
  for (std::int64_t t = 0; t < 150; ++t) {
    s.t = t;
    const double l = adaptive_weight(s);
    CHECK(l > prev);
    CHECK(l >= 0.1);
    prev = l;
  }
  s.t = 1000000;
  CHECK(adaptive_weight(s) == 10.0);
}

TEST_CASE("score_buffer combines scores under one weight") {
  Rng rng(105);
  replay::ReplayBuffer b(50, 0.05);
  for (int i = 0; i < 20; ++i) b.store(testing::random_trajectory(rng, 10, 2, i));
  auto state = CurriculumState::initial(CurriculumParams{});
  state.success_rate = 0.8;
  for (int call = 0; call < 3; ++call) {
    const auto before = state;
    const auto scores = score_buffer(b, state);
    CHECK(state.t == before.t + 1);
    const auto expected_state = ema_update(before);
    CHECK(state.eta_previous == expected_state.eta_previous);
    REQUIRE(scores.size() == b.size());
    const double lambda = adaptive_weight(expected_state);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const auto& s = scores[i];
      CHECK(s.lambda_used == lambda);
      CHECK(s.F == s.d_norm + s.lambda_used * s.q);
      CHECK(s.d_raw == trajectory_diversity(b.at(i)));
      CHECK(s.q == quality_score(b.at(i).achieved_goals.back(), b.at(i).desired_goal, 0.2));
      CHECK(s.d_norm >= 0.0);
      CHECK(s.d_norm <= 1.0);
      CHECK(s.sequence == b.sequence(i));
    }
  }
  replay::ReplayBuffer empty(5, 0.05);
  CHECK_THROWS_AS(score_buffer(empty, state), std::invalid_argument);
}

TEST_CASE("F arithmetic and ranking limits") {
  TrajectoryScore s;
  s.d_norm = 0.5;
  s.q = 0.8;
  s.lambda_used = 0.1;
  CHECK(s.d_norm + s.lambda_used * s.q == doctest::Approx(0.58).epsilon(1e-15));

  Rng rng(106);
  replay::ReplayBuffer b(50, 0.05);
  for (int i = 0; i < 25; ++i) {
    auto t = testing::random_trajectory(rng, 8, 2, i);
    t.desired_goal = t.achieved_goals.back();
    t.desired_goal(0) += 0.02 * i;  // distinct final distances
    b.store(t);
  }
  const CurriculumParams p;
  auto field = [](const std::vector<TrajectoryScore>& s, double TrajectoryScore::*m) {
    std::vector<double> out;
    for (const auto& x : s) out.push_back(x.*m);
    return out;
  };
  const auto zero = score_buffer_fixed(b, p, 0.0);
  CHECK(ranking(field(zero, &TrajectoryScore::F)) == ranking(field(zero, &TrajectoryScore::d_norm)));
  const auto huge = score_buffer_fixed(b, p, 1e6);
  CHECK(ranking(field(huge, &TrajectoryScore::F)) == ranking(field(huge, &TrajectoryScore::q)));

  // equal diversity: higher quality wins for any positive weight
  for (double lambda : {1e-6, 0.1, 3.0}) {
    TrajectoryScore a{0, 0, 0.0, 0.4, 0.9, 0.0, lambda}, c{1, 1, 0.0, 0.4, 0.3, 0.0, lambda};
    CHECK(a.d_norm + lambda * a.q > c.d_norm + lambda * c.q);
  }
  CHECK_THROWS_AS(score_buffer_fixed(b, p, -1.0), std::invalid_argument);
}

TEST_CASE("cap events are counted") {
  Rng rng(107);
  replay::ReplayBuffer b(5, 0.05);
  b.store(testing::random_trajectory(rng, 4, 2, 0));
  CurriculumParams p;
  p.lambda_cap = 0.1005;
  auto s = CurriculumState::initial(p);
  for (int i = 0; i < 5; ++i) score_buffer(b, s);
  CHECK(s.cap_events >= 3);
}

TEST_CASE("parameter validation") {
  CurriculumParams p;
  CHECK_NOTHROW(p.validate());
  auto bad = p;
  bad.window = 3;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.theta_low = 0.7;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.alpha_ema = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.sigma = -0.2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

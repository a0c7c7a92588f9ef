#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "rrph/em.hpp"
#include "rrph/error.hpp"
#include "rrph/lattice.hpp"
#include "rrph/simulate.hpp"
#include "support.hpp"

using namespace rrph;

namespace {

constexpr double kSlack = 1e-9;

void check_monotone(const std::vector<double>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - kSlack);
}

double ll_transitions(double stay, double up, double down, double nu, double eta) {
  return stay * std::log(nu) + (up + down) * std::log(1 - nu) + up * std::log(eta) +
         down * std::log(1 - eta);
}

double ll_reward(double U, double F, double q) { return (U - F) * std::log(q) + F * std::log(1 - q); }

IemParams plain_iem(int d, double nu, double eta, Eigen::VectorXd q) {
  IemParams p;
  p.d = d;
  p.nu = nu;
  p.eta = eta;
  p.reward = std::move(q);
  return p;
}

}  // namespace

TEST_CASE("unique path of the Bernoulli toy") {
  const auto m = testing::bernoulli_toy();
  const std::vector<JointObservation> y{{2, 0}};
  const auto c = expected_counts(m, y);
  const int abs = c.absorbing_column();
  // A1 = 4, C1 = 6
  CHECK(c.N(4, 6) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c.N(6, abs) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c.N.sum() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(c.initial(4) == doctest::Approx(1.0));
  CHECK(c.loglik == doctest::Approx(std::log(0.3)));
}

TEST_CASE("single geometric level counts its accumulation loops") {
  const auto base = validate_dph(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Zero(1, 1));
  const auto m = expand_geometric(base, RewardProbs(Eigen::VectorXd::Constant(1, 0.5), RewardKind::Geometric));
  const std::vector<JointObservation> y{{3, 1}};
  const auto g = group_iem(expected_counts(m, y));
  CHECK(g.F(0) == doctest::Approx(3.0));
  CHECK(g.U(0) == doctest::Approx(4.0));
}

TEST_CASE("per-observation and aggregated counts agree") {
  std::mt19937_64 rng(12);
  for (auto kind : {RewardKind::Bernoulli, RewardKind::Geometric})
    for (int rep = 0; rep < 6; ++rep) {
      const int d = 1 + rep % 4;
      const auto m = expand(testing::random_dph(rng, d), testing::random_rewards(rng, d, kind));
      const auto obs = simulate_expanded(m, {static_cast<std::uint64_t>(rep + 40), 300});
      const auto a = expected_counts(m, obs);
      const auto b = aggregate_counts(m, obs);
      CHECK((a.N - b.N).cwiseAbs().maxCoeff() < 1e-8 * (1 + a.N.cwiseAbs().maxCoeff()));
      CHECK((a.initial - b.initial).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(std::abs(a.loglik - b.loglik) < 1e-9 * std::abs(a.loglik));
      CHECK(b.per_observation.empty());
      CHECK((a.N.array() >= 0.0).all());

      REQUIRE(a.per_observation.size() == obs.size());
      double worst = 0.0;
      for (std::size_t i = 0; i < obs.size(); ++i)
        worst = std::max(worst, std::abs(a.per_observation[i].sum() - (obs[i].y1 + obs[i].y2)));
      CHECK(worst < 1e-8);
    }
}

TEST_CASE("lattice read-outs agree with the pmf") {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 5; ++rep) {
    const auto m = testing::random_iem(rng, 3);
    const auto t = lattice_forward(m, {20, 20});
    for (int a = 0; a <= 20; a += 3)
      for (int b = 1; b <= 20; b += 3) {
        CHECK(std::abs(t.likelihood({a, b}) - joint_pmf(m, {a, b})) < 1e-12);
        CHECK(std::abs(t.likelihood({a, b}) - t.likelihood_forward({a, b})) < 1e-10);
      }
  }
}

TEST_CASE("grouped counts of an IEM") {
  std::mt19937_64 rng(14);
  for (int rep = 0; rep < 5; ++rep) {
    const auto m = testing::random_iem(rng, 2 + rep % 3);
    const auto obs = simulate_expanded(m, {static_cast<std::uint64_t>(rep), 500});
    const auto g = group_iem(aggregate_counts(m, obs));
    CHECK(std::abs(g.stay + g.up + g.down - (g.U - g.F).sum()) < 1e-8 * g.U.sum());
    CHECK(((g.U - g.F).array() >= -1e-9).all());
    CHECK(g.stay >= 0.0);
    CHECK(g.up >= 0.0);
    CHECK(g.down >= 0.0);
  }
}

TEST_CASE("zero-likelihood observations are named") {
  const std::vector<JointObservation> y{{2, 0}, {1, 2}};
  try {
    aggregate_counts(testing::bernoulli_toy(), y);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroLikelihoodObservation);
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("closed-form transition and reward updates") {
  IemCounts c;
  c.stay = 5;
  c.up = 3;
  c.down = 2;
  auto [nu, eta] = m_step_iem(c);
  CHECK(nu == doctest::Approx(0.5));
  CHECK(eta == doctest::Approx(0.6));
  c.stay = 0;
  c.up = 4;
  c.down = 4;
  std::tie(nu, eta) = m_step_iem(c);
  CHECK(nu == 0.0);
  CHECK(eta == 0.5);
  c.up = c.down = 0;
  CHECK_THROWS_AS(m_step_iem(c), Error);

  IemCounts r;
  r.U = Eigen::Vector3d(10, 7, 0);
  r.F = Eigen::Vector3d(4, 0, 0);
  const auto u = m_step_rewards(r, Eigen::Vector3d(0.2, 0.2, 0.2));
  CHECK(u.q(0) == doctest::Approx(0.6));
  CHECK(u.q(1) == 1.0);
  CHECK(u.q(2) == 0.2);
  REQUIRE(u.retained.size() == 1);
  CHECK(u.retained[0] == 2);
}

TEST_CASE("closed-form updates beat a grid of alternatives") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.05, 50.0);
  for (int rep = 0; rep < 50; ++rep) {
    IemCounts c;
    c.stay = u(rng);
    c.up = u(rng);
    c.down = u(rng);
    c.U = Eigen::VectorXd(1);
    c.F = Eigen::VectorXd(1);
    c.U(0) = u(rng) + 1.0;
    c.F(0) = std::uniform_real_distribution<double>(0.0, c.U(0) - 0.5)(rng);
    const auto [nu, eta] = m_step_iem(c);
    const double q = m_step_rewards(c, Eigen::VectorXd::Constant(1, 0.5)).q(0);
    const double best_t = ll_transitions(c.stay, c.up, c.down, nu, eta);
    const double best_q = ll_reward(c.U(0), c.F(0), q);
    double grid_t = -INFINITY, grid_q = -INFINITY;
    for (int i = 1; i <= 101; ++i) {
      const double a = i / 102.0;
      grid_q = std::max(grid_q, ll_reward(c.U(0), c.F(0), a));
      for (int j = 1; j <= 101; ++j) grid_t = std::max(grid_t, ll_transitions(c.stay, c.up, c.down, a, j / 102.0));
    }
    CHECK(best_t >= grid_t - 1e-12);
    CHECK(best_q >= grid_q - 1e-12);
  }
}

TEST_CASE("regression update without covariate variation") {
  std::vector<IemCounts> rows(3);
  const double stay[] = {3, 6, 12}, up[] = {2, 5, 9}, down[] = {5, 9, 19};
  for (int i = 0; i < 3; ++i) {
    rows[i].stay = stay[i];
    rows[i].up = up[i];
    rows[i].down = down[i];
    rows[i].U = Eigen::Vector2d(10, 20);
    rows[i].F = Eigen::Vector2d(8, 10);
  }
  // pooled stay ratio 21/70 = 0.3, pooled up ratio 16/49
  Eigen::MatrixXd X(3, 2);
  X << 1, 4, 1, 4, 1, 4;
  RegressionCoefficients prev{Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(), LinearRewards{}};
  const auto out = m_step_regression(rows, X, prev);
  CHECK(out.coef.beta_nu(0) == doctest::Approx(-0.84730).epsilon(1e-5));
  CHECK(out.coef.beta_nu(1) == 0.0);
  CHECK(out.coef.beta_eta(0) == doctest::Approx(logit(16.0 / 49.0)).epsilon(1e-10));
  CHECK(out.coef.beta_eta(1) == 0.0);
  CHECK_FALSE(out.warnings.empty());
  // reward proportions 0.2 at level 1 and 0.5 at level 2 are fitted exactly by two points
  const auto lin = std::get<LinearRewards>(out.coef.reward);
  CHECK(invlogit(lin.b0 + lin.b1) == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(invlogit(lin.b0 + 2 * lin.b1) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("Bernoulli toy fit climbs and keeps fixed parameters") {
  RrdphParams truth;
  truth.pi = Eigen::Vector4d(1, 0, 0, 0);
  truth.T = testing::bernoulli_toy_base(0.5).T();
  truth.rewards = Eigen::Vector4d(1, 1, 0.6, 0.3);
  truth.kind = RewardKind::Bernoulli;
  const auto obs = simulate_expanded(truth.model(), {81, 1000});

  RrdphParams init = truth;
  init.T = testing::bernoulli_toy_base(0.3).T();
  init.rewards = Eigen::Vector4d(1, 1, 0.5, 0.5);
  EmConfig cfg;
  cfg.fixed = {"p[0]", "p[1]"};
  const auto fit = fit_rrdph(obs, init, cfg);
  CHECK(fit.converged);
  CHECK(fit.loglik_trace.size() == static_cast<std::size_t>(fit.iterations) + 1);
  check_monotone(fit.loglik_trace);
  CHECK(fit.params.rewards(0) == 1.0);
  CHECK(fit.params.rewards(1) == 1.0);
  CHECK(fit.params.T(1, 3) == 1.0);
  CHECK(fit.params.T(0, 3) == 0.0);
  CHECK(std::abs(fit.params.T(0, 1) - 0.5) < 0.1);
  CHECK(std::abs(fit.params.rewards(2) - 0.6) < 0.1);
  CHECK(std::abs(fit.params.rewards(3) - 0.3) < 0.1);

  // Starting at the truth the first step is within sampling noise.
  EmConfig one = cfg;
  one.max_iter = 1;
  const auto step = fit_rrdph(obs, truth, one);
  check_monotone(step.loglik_trace);
  CHECK(std::abs(step.params.T(0, 1) - 0.5) < 0.05);

  EmConfig bad = cfg;
  bad.fixed.insert("no_such_parameter");
  CHECK_THROWS_AS(fit_rrdph(obs, init, bad), Error);
}

TEST_CASE("IEM fit: monotone, fixed eta exact, likelihood consistent") {
  IemSpec spec;
  spec.d = 3;
  spec.nu = 0.4;
  spec.eta = 0.6;
  spec.q = Eigen::Vector3d(0.3, 0.5, 0.7);
  const auto data = simulate_iem_dataset(spec, {3, 400});

  auto init = plain_iem(3, 0.5, 0.6, Eigen::Vector3d::Constant(0.5));
  EmConfig cfg;
  cfg.fixed = {"eta"};
  const auto fit = fit_iem(data.observations, Eigen::MatrixXd(), init, cfg);
  check_monotone(fit.loglik_trace);
  CHECK(fit.params.eta == 0.6);
  CHECK(std::abs(fit.params.nu - 0.4) < 0.08);
  CHECK(std::abs(fit.loglik_trace.back() - iem_loglik(data.observations, Eigen::MatrixXd(), fit.params)) < 1e-8);

  const auto free_fit = fit_iem(data.observations, Eigen::MatrixXd(), init);
  check_monotone(free_fit.loglik_trace);
  CHECK(free_fit.loglik_trace.back() >= fit.loglik_trace.back() - kSlack);
}

TEST_CASE("regression IEM fit is monotone and honours masks") {
  RegressionIemSpec spec;
  spec.d = 3;
  spec.beta_nu = Eigen::Vector2d(-0.2, 0.3);
  spec.beta_eta = Eigen::Vector2d(0.2, -0.4);
  spec.reward = LinearRewards{-1.5, 0.6};
  const std::vector<std::vector<double>> pools{{-1.0, 0.0, 1.0, 2.0}};
  spec.X = sample_design(pools, 400, 5);
  const auto data = simulate_iem_dataset(spec, {5, 400});

  const auto init = default_iem_init(data.observations, 3, 2, true);
  CHECK(init.beta_nu.isZero());
  EmConfig cfg;
  cfg.max_iter = 60;
  cfg.fixed = {"beta_eta[1]"};
  const auto fit = fit_iem(data.observations, data.X, init, cfg);
  check_monotone(fit.loglik_trace);
  CHECK(fit.params.beta_eta(1) == init.beta_eta(1));
  CHECK(std::abs(fit.loglik_trace.back() - iem_loglik(data.observations, data.X, fit.params)) < 1e-8);

  const auto starts = iem_start_candidates(data.observations, 3, 2, true);
  REQUIRE(starts.size() == 3);
  EmConfig short_cfg;
  short_cfg.max_iter = 40;
  const auto ms = fit_iem_multistart(data.observations, data.X, starts, short_cfg, 5);
  check_monotone(ms.loglik_trace);
  bool noted = false;
  for (const auto& w : ms.warnings) noted |= w.find("candidate") != std::string::npos;
  CHECK(noted);
}

TEST_CASE("configuration checks") {
  const std::vector<JointObservation> y{{0, 1}, {1, 2}};
  auto init = plain_iem(2, 0.5, 0.5, Eigen::Vector2d::Constant(0.5));
  EmConfig cfg;
  cfg.max_iter = 0;
  CHECK_THROWS_AS(fit_iem(y, Eigen::MatrixXd(), init, cfg), Error);
  cfg.max_iter = 5;
  cfg.min_var = 0.0;
  CHECK_THROWS_AS(fit_iem(y, Eigen::MatrixXd(), init, cfg), Error);
  CHECK_THROWS_AS(default_iem_init(y, 1, 0, false), Error);
}

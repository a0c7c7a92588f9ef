#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <random>

#include "rrph/error.hpp"
#include "rrph/lattice.hpp"
#include "rrph/simulate.hpp"
#include "support.hpp"

using namespace rrph;

namespace {

std::map<JointObservation, double> frequencies(const std::vector<JointObservation>& obs) {
  std::map<JointObservation, double> f;
  for (const auto& y : obs) f[y] += 1.0 / static_cast<double>(obs.size());
  return f;
}

struct TvCheck {
  double tv = 0.0;
  double noise = 0.0;  // expected total variation of an exact sampler of this size
};

// Total variation between draws and the exact pmf, with the lattice grown
// until it holds all but 1e-6 of the mass.
TvCheck tv_distance(const ExpandedModel& m, const std::vector<JointObservation>& obs) {
  const auto f = frequencies(obs);
  const double n = static_cast<double>(obs.size());
  int bound = 16;
  for (;;) {
    const auto tables = lattice_forward(m, {bound, bound});
    double mass = 0.0, tv = 0.0, noise = 0.0;
    for (int a = 0; a <= bound; ++a)
      for (int b = 0; b <= bound; ++b) {
        const double p = tables.likelihood({a, b});
        mass += p;
        const auto it = f.find({a, b});
        tv += std::abs(p - (it == f.end() ? 0.0 : it->second));
        // E|binomial share - p| under the normal approximation
        noise += std::sqrt(2 * p * (1 - p) / (M_PI * n));
      }
    if (mass >= 1 - 1e-6) {
      double beyond = 0.0;
      for (const auto& [y, w] : f)
        if (y.y1 > bound || y.y2 > bound) beyond += w;
      return {0.5 * (tv + beyond + (1 - mass)), 0.5 * noise};
    }
    bound *= 2;
  }
}

}  // namespace

TEST_CASE("streams are reproducible and index-addressed") {
  RandomStream a(42, kObservationStream, 7), b(42, kObservationStream, 7), c(42, kObservationStream, 8);
  const double ua = a.uniform();
  CHECK(ua == b.uniform());
  CHECK(ua != c.uniform());
  CHECK(ua > 0.0);
  CHECK(ua <= 1.0);

  const auto m = testing::bernoulli_toy();
  const SimConfig cfg{5, 200};
  const auto all = simulate_expanded(m, cfg);
  for (int i : {0, 17, 199}) CHECK(simulate_one(m, cfg, i) == all[i]);
  CHECK(simulate_expanded(m, cfg) == all);
}

TEST_CASE("toy frequencies") {
  const auto obs = simulate_expanded(testing::bernoulli_toy(), {2024, 100000});
  CHECK(std::abs(frequencies(obs)[{2, 0}] - 0.30) < 0.01);

  const auto flat = expand_geometric(testing::geometric_toy_base(),
                                     RewardProbs(Eigen::Vector3d::Ones(), RewardKind::Geometric));
  for (const auto& y : simulate_expanded(flat, {1, 1000})) CHECK(y.y1 == 0);

  const auto base = validate_dph(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Zero(1, 1));
  const auto geo = expand_geometric(base, RewardProbs(Eigen::VectorXd::Constant(1, 0.5), RewardKind::Geometric));
  double mean = 0.0;
  const auto g = simulate_expanded(geo, {3, 100000});
  for (const auto& y : g) mean += y.y1;
  CHECK(std::abs(mean / g.size() - 1.0) < 0.03);
}

// An exact sampler of a spread-out pmf already sits near 0.01 in total
// variation at 1e5 draws, so the 0.01 bound is applied where the expected
// sampling distance leaves room for it and every model is also held to its
// own noise level.
void check_fit(const TvCheck& c) {
  if (c.noise < 0.0075) CHECK(c.tv < 0.01);
  CHECK(c.tv < 1.25 * c.noise);
}

TEST_CASE("direct draws and the expanded walk agree in distribution") {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 3; ++k) {
    const auto m = testing::random_iem(rng, 3);
    for (auto method : {SimMethod::Direct, SimMethod::ExpandedWalk})
      check_fit(tv_distance(m, simulate_expanded(m, {50u + k, 100000}, method)));
  }
}

TEST_CASE("goodness of fit on random models") {
  std::mt19937_64 rng(31);
  for (const auto& toy : {testing::bernoulli_toy(), testing::geometric_toy()}) {
    const auto c = tv_distance(toy, simulate_expanded(toy, {77, 100000}));
    CHECK(c.tv < 0.01);
  }
  for (auto kind : {RewardKind::Bernoulli, RewardKind::Geometric})
    for (int d = 1; d <= 4; ++d) {
      const auto m = expand(testing::random_dph(rng, d), testing::random_rewards(rng, d, kind));
      const auto c = tv_distance(m, simulate_expanded(m, {static_cast<std::uint64_t>(d), 100000}));
      check_fit(c);
    }
}

TEST_CASE("step cap") {
  const auto base = validate_dph(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Constant(1, 1, 0.999));
  const auto m = expand_geometric(base, RewardProbs(Eigen::VectorXd::Ones(1), RewardKind::Geometric));
  SimConfig cfg{1, 100};
  cfg.max_steps = 5;
  try {
    simulate_expanded(m, cfg);
    FAIL("expected the cap to trigger");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StepCapExceeded);
  }
}

TEST_CASE("IEM datasets") {
  IemSpec s;
  s.d = 2;
  s.q = Eigen::Vector2d::Ones();
  const auto flat = simulate_iem_dataset(s, {9, 500});
  CHECK(flat.X.size() == 0);
  for (const auto& y : flat.observations) CHECK(y.y1 == 0);

  RegressionIemSpec r;
  r.d = 4;
  r.beta_nu = Eigen::Vector2d(-0.1, 0.2);
  r.beta_eta = Eigen::Vector2d(0.1, -0.25);
  r.reward = LinearRewards{-3.064788, 0.8675632};
  const std::vector<std::vector<double>> pools{{-10.0, 0.0, 5.0, 20.0}};
  r.X = sample_design(pools, 1000, 4);
  CHECK(r.X.rows() == 1000);
  CHECK(r.X.col(0).isOnes());
  for (int i = 0; i < 1000; ++i) {
    const double x = r.X(i, 1);
    CHECK((x == -10.0 || x == 0.0 || x == 5.0 || x == 20.0));
  }
  const auto a = simulate_iem_dataset(r, {4, 1000});
  const auto b = simulate_iem_dataset(r, {4, 1000});
  CHECK(a.observations == b.observations);
  CHECK(a.X == b.X);
  for (const auto& y : a.observations) CHECK(y.y2 >= 1);
}

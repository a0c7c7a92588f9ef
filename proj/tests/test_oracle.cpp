#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "rrph/error.hpp"
#include "rrph/lattice.hpp"
#include "rrph/oracle.hpp"
#include "rrph/rrdph.hpp"
#include "support.hpp"

using namespace rrph;

namespace {

// Recursion against enumeration cell by cell, and enumeration against
// simulation within four standard errors of the exact probability.
void three_way(const ExpandedModel& m, LatticeBounds bounds, int draws, std::uint64_t seed) {
  const auto exact = oracle::enumerate_joint_pmf(m, bounds);
  const auto tables = lattice_forward(m, bounds);
  const auto mc = oracle::monte_carlo_pmf(m, draws, seed);
  double worst = 0.0;
  int outside = 0;
  for (int a = 0; a <= bounds.y1_max; ++a)
    for (int b = 0; b <= bounds.y2_max; ++b) {
      const double p = exact.at({a, b});
      worst = std::max(worst, std::abs(tables.likelihood({a, b}) - p));
      const double se = std::sqrt(p * (1 - p) / draws);
      const double gap = std::abs(mc.at({a, b}).probability - p);
      // 1/n is the resolution of a single draw; it only matters for cells
      // whose expected count is far below one.
      if (gap > 4 * se + 1.0 / draws) ++outside;
    }
  CHECK(worst < 1e-12);
  CHECK(outside == 0);
}

}  // namespace

TEST_CASE("enumeration of the Bernoulli toy") {
  const auto e = oracle::enumerate_joint_pmf(testing::bernoulli_toy(), {5, 5});
  CHECK(e.cells.size() == 4);
  CHECK(e.at({1, 1}) == doctest::Approx(0.20).epsilon(1e-15));
  CHECK(e.at({2, 0}) == doctest::Approx(0.30).epsilon(1e-15));
  CHECK(e.at({2, 1}) == doctest::Approx(0.35).epsilon(1e-15));
  CHECK(e.at({3, 0}) == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(e.residual == doctest::Approx(0.0));
}

TEST_CASE("enumeration of the geometric toy and of zero rewards") {
  const auto e = oracle::enumerate_joint_pmf(testing::geometric_toy(0.5, 0.6), {30, 4});
  CHECK(e.at({0, 2}) == doctest::Approx(0.8));
  CHECK(e.at({1, 2}) == doctest::Approx(0.12));
  CHECK(e.at({2, 2}) == doctest::Approx(0.048));
  CHECK(e.total() + e.residual == doctest::Approx(1.0));

  const auto flat = expand_geometric(testing::geometric_toy_base(),
                                     RewardProbs(Eigen::Vector3d::Ones(), RewardKind::Geometric));
  const auto f = oracle::enumerate_joint_pmf(flat, {5, 5});
  for (const auto& [y, p] : f.cells) CHECK(y.y1 == 0);
  CHECK(f.total() == doctest::Approx(1.0));
}

TEST_CASE("enumeration budget") {
  std::mt19937_64 rng(3);
  const auto m = testing::random_iem(rng, 4);
  CHECK_THROWS_AS(oracle::enumerate_joint_pmf(m, {200, 200}, 1000), Error);
}

TEST_CASE("Monte Carlo table of the toys") {
  const auto mc = oracle::monte_carlo_pmf(testing::bernoulli_toy(), 100000, 11);
  CHECK(std::abs(mc.at({2, 0}).probability - 0.30) < 0.01);
  const auto again = oracle::monte_carlo_pmf(testing::bernoulli_toy(), 100000, 11);
  CHECK(again.at({2, 0}).probability == mc.at({2, 0}).probability);

  const auto base = validate_dph(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Zero(1, 1));
  const auto geo = expand_geometric(base, RewardProbs(Eigen::VectorXd::Constant(1, 0.5), RewardKind::Geometric));
  CHECK(std::abs(oracle::monte_carlo_pmf(geo, 100000, 12).mean_y1 - 1.0) < 0.03);
}

TEST_CASE("three-way agreement on the toys") {
  three_way(testing::bernoulli_toy(), {5, 5}, 100000, 21);
  three_way(testing::geometric_toy(0.5, 0.6), {15, 4}, 100000, 22);
}

TEST_CASE("three-way agreement on random IEMs") {
  std::mt19937_64 rng(99);
  for (int k = 0; k < 5; ++k) {
    const auto m = testing::random_iem(rng, 3 + k % 2);
    three_way(m, {15, 15}, 100000, 100 + k);
  }
}

TEST_CASE("recursion matches enumeration on random chains") {
  std::mt19937_64 rng(5);
  for (auto kind : {RewardKind::Bernoulli, RewardKind::Geometric})
    for (int rep = 0; rep < 10; ++rep) {
      const int d = 1 + rep % 4;
      const auto m = expand(testing::random_dph(rng, d), testing::random_rewards(rng, d, kind));
      const LatticeBounds bounds{12, 12};
      const auto e = oracle::enumerate_joint_pmf(m, bounds);
      double worst = 0.0;
      for (int a = 0; a <= 12; ++a)
        for (int b = 0; b <= 12; ++b) worst = std::max(worst, std::abs(joint_pmf(m, {a, b}) - e.at({a, b})));
      CHECK(worst < 1e-12);
    }
}

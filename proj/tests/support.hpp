#pragma once

#include <random>

#include <Eigen/Dense>

#include "rrph/dph.hpp"
#include "rrph/iem.hpp"
#include "rrph/rrdph.hpp"

namespace testing {

// A -> B (b), A -> C (1-b), B -> D; C and D absorb. Rewards of A and B are 1.
inline rrph::DphModel bernoulli_toy_base(double b = 0.5) {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(4, 4);
  T(0, 1) = b;
  T(0, 2) = 1.0 - b;
  T(1, 3) = 1.0;
  return rrph::validate_dph(Eigen::Vector4d(1, 0, 0, 0), T);
}

inline rrph::ExpandedModel bernoulli_toy(double b = 0.5, double pc = 0.6, double pd = 0.3) {
  return rrph::expand_bernoulli(bernoulli_toy_base(b),
                                rrph::RewardProbs(Eigen::Vector4d(1, 1, pc, pd),
                                                  rrph::RewardKind::Bernoulli));
}

// A -> B (b), A -> C (1-b); B and C absorb; only C carries a geometric reward.
inline rrph::DphModel geometric_toy_base(double b = 0.5) {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(3, 3);
  T(0, 1) = b;
  T(0, 2) = 1.0 - b;
  return rrph::validate_dph(Eigen::Vector3d(1, 0, 0), T);
}

inline rrph::ExpandedModel geometric_toy(double b = 0.5, double qc = 0.6) {
  return rrph::expand_geometric(geometric_toy_base(b),
                                rrph::RewardProbs(Eigen::Vector3d(1, 1, qc),
                                                  rrph::RewardKind::Geometric));
}

// Random absorbing chain: every row keeps between 5% and 70% exit mass.
inline rrph::DphModel random_dph(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd T(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) T(i, j) = u(rng) < 0.25 ? 0.0 : u(rng);
    const double s = T.row(i).sum();
    const double keep = 0.3 + 0.65 * u(rng);
    if (s > 0.0) T.row(i) *= keep / s;
  }
  Eigen::VectorXd pi(d);
  for (int i = 0; i < d; ++i) pi(i) = u(rng) + 0.05;
  pi /= pi.sum();
  return rrph::validate_dph(pi, T);
}

inline rrph::RewardProbs random_rewards(std::mt19937_64& rng, int d, rrph::RewardKind kind) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i)
    v(i) = kind == rrph::RewardKind::Bernoulli ? u(rng) : 0.25 + 0.75 * u(rng);
  return rrph::RewardProbs(v, kind);
}

inline rrph::ExpandedModel random_iem(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  rrph::IemSpec s;
  s.d = d;
  s.nu = 0.1 + 0.6 * u(rng);
  s.eta = 0.2 + 0.6 * u(rng);
  s.q = Eigen::VectorXd(d);
  for (int j = 0; j < d; ++j) s.q(j) = 0.35 + 0.6 * u(rng);
  return rrph::iem_model(s);
}

}  // namespace testing

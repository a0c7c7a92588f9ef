#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rrph/error.hpp"
#include "rrph/iem.hpp"
#include "rrph/oracle.hpp"
#include "rrph/rrdph.hpp"

using namespace rrph;

namespace {

ErrorCode code_of(double nu, double eta, int d) {
  try {
    build_iem_T(nu, eta, d);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected failure");
  return ErrorCode::InvalidInput;
}

}  // namespace

TEST_CASE("tridiagonal transitions") {
  const auto T = build_iem_T(0.3, 0.7, 3);
  Eigen::Matrix3d expected{{0.3, 0.49, 0}, {0.21, 0.3, 0.49}, {0, 0.21, 0.3}};
  CHECK((T - expected).cwiseAbs().maxCoeff() < 1e-15);
  const Eigen::Vector3d exit = Eigen::Vector3d::Ones() - T.rowwise().sum();
  CHECK((exit - Eigen::Vector3d(0.21, 0, 0.49)).cwiseAbs().maxCoeff() < 1e-15);

  const auto T2 = build_iem_T(0.5, 0.5, 2);
  CHECK(T2.isApprox(Eigen::Matrix2d{{0.5, 0.25}, {0.25, 0.5}}));

  const auto T6 = build_iem_T(0.37, 0.61, 6);
  for (int i = 1; i < 5; ++i) CHECK(std::abs(T6.row(i).sum() - 1.0) < 1e-14);
  CHECK(std::abs(T6.row(0).sum() - (1 - 0.63 * 0.39)) < 1e-14);
  CHECK(std::abs(T6.row(5).sum() - (1 - 0.63 * 0.61)) < 1e-14);
}

TEST_CASE("parameter checks") {
  CHECK(code_of(0.5, 0.5, 1) == ErrorCode::DimensionTooSmall);
  CHECK(code_of(1.2, 0.5, 3) == ErrorCode::InvalidParameter);
  CHECK(code_of(0.5, -0.1, 3) == ErrorCode::InvalidParameter);
}

TEST_CASE("degenerate rewards leave a plain absorption time") {
  IemSpec s;
  s.d = 2;
  s.q = Eigen::Vector2d::Ones();
  const auto m = iem_model(s);
  const auto T = build_iem_T(0.5, 0.5, 2);
  const Eigen::Vector2d t = Eigen::Vector2d::Ones() - T.rowwise().sum();
  Eigen::RowVector2d a(1, 0);
  for (int n = 1; n < 10; ++n) {
    CHECK(joint_pmf(m, {0, n}) == doctest::Approx(a.dot(t)).epsilon(1e-13));
    CHECK(joint_pmf(m, {1, n}) == 0.0);
    a = a * T;
  }
}

TEST_CASE("no inertia and no escalation absorbs at once") {
  IemSpec s;
  s.d = 2;
  s.nu = 0.0;
  s.eta = 0.0;
  s.q = Eigen::Vector2d(0.3, 0.8);
  const auto m = iem_model(s);
  for (int k = 0; k < 6; ++k) {
    CHECK(joint_pmf(m, {k, 1}) == doctest::Approx(std::pow(0.7, k) * 0.3).epsilon(1e-13));
    CHECK(joint_pmf(m, {k, 2}) == 0.0);
  }
}

TEST_CASE("IEM pmf against enumeration") {
  IemSpec s;
  s.d = 3;
  s.nu = 0.3;
  s.eta = 0.7;
  s.q = Eigen::Vector3d::Constant(0.5);
  const auto m = iem_model(s);
  const auto e = oracle::enumerate_joint_pmf(m, {12, 12});
  double worst = 0.0;
  for (int a = 0; a <= 12; ++a)
    for (int b = 0; b <= 12; ++b) worst = std::max(worst, std::abs(joint_pmf(m, {a, b}) - e.at({a, b})));
  CHECK(worst < 1e-12);
}

TEST_CASE("linear reward model") {
  const auto q = linear_reward_probs(-3.064788, 0.8675632, 4).values();
  CHECK(q(0) == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(q(3) == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(q(1) == doctest::Approx(0.20924).epsilon(1e-4));
  CHECK(q(2) == doctest::Approx(0.38648).epsilon(1e-4));
  for (int j = 1; j < 4; ++j) CHECK(q(j) > q(j - 1));
  const auto down = linear_reward_probs(1.0, -0.4, 5).values();
  for (int j = 1; j < 5; ++j) CHECK(down(j) < down(j - 1));
  CHECK(linear_reward_probs(0, 0, 3).values().isApprox(Eigen::Vector3d::Constant(0.5)));
}

TEST_CASE("subject models from covariates") {
  RegressionIemSpec s;
  s.d = 4;
  s.beta_nu = Eigen::Vector2d(-0.1, 0.2);
  s.beta_eta = Eigen::Vector2d(0.1, -0.25);
  s.reward = LinearRewards{-3.064788, 0.8675632};
  s.X = Eigen::MatrixXd(5, 2);
  s.X << 1, 0, 1, 20, 1, 0, 1, -10, 1, 20;
  const auto sm = subject_models(s);
  REQUIRE(sm.models.size() == 3);
  CHECK(sm.model_of_subject[0] == sm.model_of_subject[2]);
  CHECK(sm.model_of_subject[1] == sm.model_of_subject[4]);
  const int zero = sm.model_of_subject[0];
  const int twenty = sm.model_of_subject[1];
  CHECK(sm.nu[zero] == doctest::Approx(0.47502).epsilon(1e-5));
  CHECK(sm.eta[zero] == doctest::Approx(0.52498).epsilon(1e-5));
  CHECK(sm.nu[twenty] == doctest::Approx(0.98015).epsilon(1e-5));
  CHECK(sm.nu[zero] == invlogit(-0.1));

  s.beta_nu = Eigen::Vector2d::Zero();
  s.beta_eta = Eigen::Vector2d::Zero();
  const auto flat = subject_models(s);
  for (std::size_t k = 0; k < flat.models.size(); ++k) {
    CHECK(flat.nu[k] == 0.5);
    CHECK(flat.eta[k] == 0.5);
  }
}

TEST_CASE("regression design checks") {
  Eigen::MatrixXd X(2, 2);
  X << 2, 0, 1, 1;
  CHECK_THROWS_AS(validate_regression_design(X, 2), Error);
  X(0, 0) = 1;
  CHECK_NOTHROW(validate_regression_design(X, 2));
  CHECK_THROWS_AS(validate_regression_design(X, 3), Error);
}

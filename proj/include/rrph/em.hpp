#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rrph/iem.hpp"
#include "rrph/lattice.hpp"
#include "rrph/rrdph.hpp"

namespace rrph {

// Conditional expected transition counts of the expanded chain.
struct ExpectedCounts {
  int base_dim = 0;
  // 2d x (2d+1); column 2d counts absorptions.
  Eigen::MatrixXd N;
  // Expected occupancy of each expanded state at the first visit.
  Eigen::VectorXd initial;
  // Filled by expected_counts() only, one matrix per observation.
  std::vector<Eigen::MatrixXd> per_observation;
  double loglik = 0.0;

  int absorbing_column() const { return 2 * base_dim; }
};

// Per-observation route: builds the full lattice once and evaluates
//   E[N_ij | y] = sum_{u <= y} alpha(u)_i B_ij p(y - u)_j / P(y),
//   E[N_i,abs | y] = alpha(y)_i b0_i / P(y)
// for each observation separately, then sums in index order.
ExpectedCounts expected_counts(const ExpandedModel& expanded,
                               std::span<const JointObservation> observations,
                               std::size_t cell_cap = kDefaultCellCap);

// Aggregated route used by the fitting loop. The sum over observations is
// pushed inside the convolution,
//   sum_o p(y_o - u) / P(y_o) =: g(u),
// and g obeys a backward recursion over the lattice seeded with the
// likelihood weights at the observed cells, so one forward and one backward
// sweep give the totals. Per-observation matrices are not produced.
ExpectedCounts aggregate_counts(const ExpandedModel& expanded,
                                std::span<const JointObservation> observations,
                                std::size_t cell_cap = kDefaultCellCap);

// Counts of a geometric-reward IEM grouped by original level.
struct IemCounts {
  double stay = 0.0;
  double up = 0.0;    // includes absorption above level d
  double down = 0.0;  // includes absorption below level 1
  Eigen::VectorXd F;  // expected reward failures (steps into the accumulating copy)
  Eigen::VectorXd U;  // expected reward opportunities (all steps out of either copy)

  IemCounts& operator+=(const IemCounts& other);
};

// Transition counts come from the QT block only (steps into the first
// block); F_j counts steps into copy j+d; U_j counts every step out of
// {j, j+d} including absorption.
IemCounts group_iem(const ExpectedCounts& counts);

// (nu, eta) = (stay / (stay+up+down), up / (up+down))
std::pair<double, double> m_step_iem(const IemCounts& counts);

struct RewardUpdate {
  Eigen::VectorXd q;
  std::vector<int> retained;  // levels with U_j = 0 that kept their previous q
};

// q_j = (U_j - F_j) / U_j
RewardUpdate m_step_rewards(const IemCounts& counts, const Eigen::VectorXd& previous);

struct RegressionCoefficients {
  Eigen::VectorXd beta_nu;
  Eigen::VectorXd beta_eta;
  RewardMode reward;
};

struct RegressionMask {
  std::vector<bool> beta_nu;
  std::vector<bool> beta_eta;
  std::vector<bool> q;
  bool reward_b0 = false;
  bool reward_b1 = false;
};

struct RegressionUpdate {
  RegressionCoefficients coef;
  std::vector<std::string> warnings;
};

// Weighted quasibinomial fits on the grouped counts of each covariate row:
// nu on stay/(stay+up+down) with that total as weight, eta on up/(up+down)
// with weight up+down; linear rewards on (U_j-F_j)/U_j with weight U_j and
// covariate j. Rows of X may be subjects or distinct covariate patterns.
// Columns aliased with earlier ones are held at zero.
RegressionUpdate m_step_regression(std::span<const IemCounts> per_row, const Eigen::MatrixXd& X,
                                   const RegressionCoefficients& previous,
                                   const RegressionMask& mask = {});

struct EmConfig {
  int max_iter = 500;
  double min_var = 1e-6;          // stop when ||theta_t - theta_{t-1}||_2 < min_var
  bool loglik_criterion = false;  // additionally stop on small loglik change
  double loglik_tol = 1e-9;
  double monotone_tolerance = 1e-6;  // larger decreases raise NonMonotoneLikelihood
  std::size_t cell_cap = kDefaultCellCap;
  std::set<std::string> fixed;    // parameter names held at their initial value
};

template <class Params>
struct FitResult {
  Params params;
  std::vector<double> loglik_trace;  // loglik at each visited parameter value
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

using NamedValues = std::vector<std::pair<std::string, double>>;

// General random-reward DPH with the initial distribution held fixed.
// Parameters are named T[i][j] and p[i] (Bernoulli) or q[i] (geometric),
// 0-based. Entries of T that start at zero stay zero.
struct RrdphParams {
  Eigen::VectorXd pi;
  Eigen::MatrixXd T;
  Eigen::VectorXd rewards;
  RewardKind kind = RewardKind::Bernoulli;

  ExpandedModel model() const;
};

NamedValues flatten(const RrdphParams& params);

FitResult<RrdphParams> fit_rrdph(std::span<const JointObservation> observations,
                                 const RrdphParams& init, const EmConfig& config = {});

// IEM parameters. Without covariates nu and eta are used; with covariates
// beta_nu and beta_eta (intercept first). Names: nu, eta, beta_nu[k],
// beta_eta[k], q[j] (free rewards) or reward_b0, reward_b1 (linear rewards).
struct IemParams {
  int d = 2;
  double nu = 0.5;
  double eta = 0.5;
  Eigen::VectorXd beta_nu;
  Eigen::VectorXd beta_eta;
  RewardMode reward = LinearRewards{};

  bool has_covariates() const { return beta_nu.size() > 0; }
};

NamedValues flatten(const IemParams& params);

// nu = eta = 0.5 (zero coefficients with covariates), q from pooled
// moments: q0 = mean(y2) / (mean(y2) + mean(y1)) on every level.
IemParams default_iem_init(std::span<const JointObservation> observations, int d,
                           Eigen::Index coefficients, bool linear_rewards);

// The default start followed by copies whose reward profile is tilted
// down and up across levels (logit slope -1 and +1 around the same centre).
// The IEM likelihood has competing optima that differ in whether long
// histories are explained by inertia at low levels or by escalation, and
// the tilt decides which one EM climbs to.
std::vector<IemParams> iem_start_candidates(std::span<const JointObservation> observations, int d,
                                            Eigen::Index coefficients, bool linear_rewards);

// X must be empty when init has no covariates, else n x (r+1) with intercept.
FitResult<IemParams> fit_iem(std::span<const JointObservation> observations,
                             const Eigen::MatrixXd& X, const IemParams& init,
                             const EmConfig& config = {});

// Runs `burn_in` iterations from every start, keeps the one with the highest
// log-likelihood (earliest on ties) and continues it to convergence. The
// trace is that of the chosen start.
FitResult<IemParams> fit_iem_multistart(std::span<const JointObservation> observations,
                                        const Eigen::MatrixXd& X,
                                        std::span<const IemParams> starts,
                                        const EmConfig& config = {}, int burn_in = 20);

// Observed-data log-likelihood under the IEM parameters.
double iem_loglik(std::span<const JointObservation> observations, const Eigen::MatrixXd& X,
                  const IemParams& params, std::size_t cell_cap = kDefaultCellCap);

}  // namespace rrph

#pragma once

#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rrph/rrdph.hpp"

namespace rrph {

double logit(double p);
double invlogit(double x);

// Tridiagonal inertia-escalation sub-transition matrix on d severity levels:
// stay with nu, step up with (1-nu)eta, step down with (1-nu)(1-eta). The
// missing mass in rows 1 and d is the exit below level 1 and above level d.
Eigen::MatrixXd build_iem_T(double nu, double eta, int d);

struct IemSpec {
  int d = 2;
  double nu = 0.5;
  double eta = 0.5;
  Eigen::VectorXd q;  // geometric reward probability per level
  std::optional<Eigen::VectorXd> pi;  // defaults to e_1
};

// Geometric random-reward model on the IEM chain.
ExpandedModel iem_model(const IemSpec& spec);

// q_j = invlogit(b0 + b1 j), j = 1..d
RewardProbs linear_reward_probs(double b0, double b1, int d);

struct LinearRewards {
  double b0 = 0.0;
  double b1 = 0.0;
};

// Either free per-level q or the logit-linear model across levels.
using RewardMode = std::variant<Eigen::VectorXd, LinearRewards>;

RewardProbs reward_probs(const RewardMode& mode, int d);

struct RegressionIemSpec {
  int d = 2;
  Eigen::VectorXd beta_nu;   // length r+1, intercept first
  Eigen::VectorXd beta_eta;  // length r+1, intercept first
  RewardMode reward = LinearRewards{};
  Eigen::MatrixXd X;  // n x (r+1), leading column of ones
  std::optional<Eigen::VectorXd> pi;
};

// One model per distinct covariate row; subjects sharing a row share the model.
struct SubjectModels {
  std::vector<ExpandedModel> models;
  std::vector<double> nu;   // per model
  std::vector<double> eta;  // per model
  std::vector<int> model_of_subject;
  std::vector<Eigen::RowVectorXd> rows;  // distinct covariate rows, per model
};

// Indices of distinct rows of X and the row each subject maps to.
struct DistinctRows {
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<int> index_of_subject;
};
DistinctRows distinct_rows(const Eigen::MatrixXd& X);

SubjectModels subject_models(const RegressionIemSpec& spec);

// Checks the shape rules shared by regression specs: intercept column, coefficient lengths.
void validate_regression_design(const Eigen::MatrixXd& X, Eigen::Index coefficients);

}  // namespace rrph

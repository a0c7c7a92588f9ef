#include "rrph/iem.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "rrph/error.hpp"

namespace rrph {

double logit(double p) { return std::log(p / (1.0 - p)); }

double invlogit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::MatrixXd build_iem_T(double nu, double eta, int d) {
  if (d < 2) throw Error(ErrorCode::DimensionTooSmall, "an IEM needs at least two levels");
  if (!(nu >= 0.0 && nu < 1.0)) {
    std::ostringstream msg;
    msg << "nu = " << nu << " outside [0,1)";
    throw Error(ErrorCode::InvalidParameter, msg.str());
  }
  if (!(eta >= 0.0 && eta <= 1.0)) {
    std::ostringstream msg;
    msg << "eta = " << eta << " outside [0,1]";
    throw Error(ErrorCode::InvalidParameter, msg.str());
  }
  const double up = (1.0 - nu) * eta;
  const double down = (1.0 - nu) * (1.0 - eta);
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    T(i, i) = nu;
    if (i + 1 < d) T(i, i + 1) = up;
    if (i > 0) T(i, i - 1) = down;
  }
  return T;
}

ExpandedModel iem_model(const IemSpec& spec) {
  const Eigen::MatrixXd T = build_iem_T(spec.nu, spec.eta, spec.d);
  Eigen::VectorXd pi = Eigen::VectorXd::Unit(spec.d, 0);
  if (spec.pi) pi = *spec.pi;
  const DphModel base = validate_dph(pi, T);
  return expand_geometric(base, RewardProbs(spec.q, RewardKind::Geometric));
}

RewardProbs linear_reward_probs(double b0, double b1, int d) {
  if (d < 1) throw Error(ErrorCode::DimensionTooSmall, "need at least one level");
  Eigen::VectorXd q(d);
  for (int j = 1; j <= d; ++j) q(j - 1) = invlogit(b0 + b1 * j);
  return RewardProbs(std::move(q), RewardKind::Geometric);
}

RewardProbs reward_probs(const RewardMode& mode, int d) {
  if (const auto* linear = std::get_if<LinearRewards>(&mode))
    return linear_reward_probs(linear->b0, linear->b1, d);
  const auto& q = std::get<Eigen::VectorXd>(mode);
  if (q.size() != d) throw Error(ErrorCode::DimensionMismatch, "q must have one entry per level");
  return RewardProbs(q, RewardKind::Geometric);
}

void validate_regression_design(const Eigen::MatrixXd& X, Eigen::Index coefficients) {
  if (X.rows() == 0) throw Error(ErrorCode::InvalidInput, "empty design matrix");
  if (X.cols() != coefficients) {
    std::ostringstream msg;
    msg << "design has " << X.cols() << " columns but " << coefficients << " coefficients";
    throw Error(ErrorCode::DimensionMismatch, msg.str());
  }
  if (!X.allFinite()) throw Error(ErrorCode::InvalidInput, "non-finite covariate");
  if ((X.col(0).array() != 1.0).any())
    throw Error(ErrorCode::InvalidInput, "first design column must be the intercept (all ones)");
}

DistinctRows distinct_rows(const Eigen::MatrixXd& X) {
  DistinctRows out;
  out.index_of_subject.resize(X.rows());
  std::map<std::vector<double>, int> seen;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    std::vector<double> key(X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c) key[c] = X(i, c);
    auto [it, inserted] = seen.try_emplace(std::move(key), static_cast<int>(out.rows.size()));
    if (inserted) out.rows.push_back(X.row(i));
    out.index_of_subject[i] = it->second;
  }
  return out;
}

SubjectModels subject_models(const RegressionIemSpec& spec) {
  if (spec.beta_nu.size() != spec.beta_eta.size())
    throw Error(ErrorCode::DimensionMismatch, "beta_nu and beta_eta differ in length");
  validate_regression_design(spec.X, spec.beta_nu.size());
  const RewardProbs q = reward_probs(spec.reward, spec.d);

  auto distinct = distinct_rows(spec.X);
  SubjectModels out;
  out.model_of_subject = std::move(distinct.index_of_subject);
  for (const auto& row : distinct.rows) {
    const double nu = invlogit(row.dot(spec.beta_nu));
    const double eta = invlogit(row.dot(spec.beta_eta));
    IemSpec sub{spec.d, nu, eta, q.values(), spec.pi};
    out.models.push_back(iem_model(sub));
    out.nu.push_back(nu);
    out.eta.push_back(eta);
  }
  out.rows = std::move(distinct.rows);
  return out;
}

}  // namespace rrph

#include "rrph/dph.hpp"

#include <cmath>
#include <sstream>

#include "rrph/error.hpp"

namespace rrph {

DphModel::DphModel(Eigen::VectorXd pi, Eigen::MatrixXd T)
    : pi_(std::move(pi)), T_(std::move(T)) {
  exit_ = (Eigen::VectorXd::Ones(T_.rows()) - T_.rowwise().sum()).cwiseMax(0.0);
}

double spectral_radius(const Eigen::MatrixXd& T) {
  if (T.size() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(T, /*computeEigenvectors=*/false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

DphModel validate_dph(const Eigen::VectorXd& pi, const Eigen::MatrixXd& T,
                      const DphTolerances& tol) {
  const auto d = pi.size();
  if (d == 0) throw Error(ErrorCode::DimensionMismatch, "empty initial distribution");
  if (T.rows() != d || T.cols() != d) {
    std::ostringstream msg;
    msg << "T is " << T.rows() << "x" << T.cols() << " but pi has length " << d;
    throw Error(ErrorCode::DimensionMismatch, msg.str());
  }
  if (!pi.allFinite() || !T.allFinite())
    throw Error(ErrorCode::InvalidParameter, "non-finite entry in pi or T");

  for (Eigen::Index i = 0; i < d; ++i) {
    if (pi(i) < 0.0) {
      std::ostringstream msg;
      msg << "pi[" << i << "] = " << pi(i);
      throw Error(ErrorCode::NegativeEntry, msg.str());
    }
    for (Eigen::Index j = 0; j < d; ++j) {
      if (T(i, j) < 0.0) {
        std::ostringstream msg;
        msg << "T[" << i << "][" << j << "] = " << T(i, j);
        throw Error(ErrorCode::NegativeEntry, msg.str());
      }
    }
  }
  if (std::abs(pi.sum() - 1.0) > tol.sum_tol) {
    std::ostringstream msg;
    msg << "pi sums to " << pi.sum();
    throw Error(ErrorCode::InitialNotNormalized, msg.str());
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    const double row = T.row(i).sum();
    if (row > 1.0 + tol.sum_tol) {
      std::ostringstream msg;
      msg << "row " << i << " of T sums to " << row;
      throw Error(ErrorCode::RowSumExceedsOne, msg.str());
    }
  }
  const double rho = spectral_radius(T);
  if (!(rho < 1.0 - tol.spectral_margin)) {
    std::ostringstream msg;
    msg << "spectral radius of T is " << rho;
    throw Error(ErrorCode::AbsorptionNotGuaranteed, msg.str());
  }
  return DphModel(pi, T);
}

Eigen::VectorXd exit_vector(const DphModel& model) { return model.exit(); }

double dph_pmf(const DphModel& model, int n) {
  if (n < 1) throw Error(ErrorCode::InvalidN, "support of the absorption time starts at 1");
  Eigen::RowVectorXd state = model.pi().transpose();
  for (int k = 1; k < n; ++k) state = state * model.T();
  return state.dot(model.exit());
}

double dph_mean(const DphModel& model) {
  const auto d = model.dim();
  const Eigen::MatrixXd fundamental = Eigen::MatrixXd::Identity(d, d) - model.T();
  const Eigen::VectorXd visits = fundamental.partialPivLu().solve(Eigen::VectorXd::Ones(d));
  return model.pi().dot(visits);
}

double dph_pgf(const DphModel& model, double z) {
  const auto d = model.dim();
  const Eigen::MatrixXd resolvent = Eigen::MatrixXd::Identity(d, d) - z * model.T();
  return z * model.pi().dot(resolvent.partialPivLu().solve(model.exit()));
}

}  // namespace rrph

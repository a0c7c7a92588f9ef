#include "rrph/glm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rrph/error.hpp"
#include "rrph/iem.hpp"

namespace rrph {

namespace {

constexpr double kMuClamp = 1e-12;

double xlogy_ratio(double y, double mu) { return y > 0.0 ? y * std::log(y / mu) : 0.0; }

void check_data(const WeightedBinomialData& data) {
  const auto n = data.design.rows();
  if (data.responses.size() != n || data.weights.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "responses, weights and design differ in length");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(data.weights(i) >= 0.0) || !std::isfinite(data.weights(i))) {
      std::ostringstream msg;
      msg << "weight " << i << " = " << data.weights(i);
      throw Error(ErrorCode::InvalidInput, msg.str());
    }
    if (data.weights(i) > 0.0 && !(data.responses(i) >= 0.0 && data.responses(i) <= 1.0)) {
      std::ostringstream msg;
      msg << "response " << i << " = " << data.responses(i) << " outside [0,1]";
      throw Error(ErrorCode::InvalidInput, msg.str());
    }
  }
  if (!data.design.allFinite()) throw Error(ErrorCode::InvalidInput, "non-finite design entry");
}

}  // namespace

double binomial_deviance(const WeightedBinomialData& data, const Eigen::VectorXd& coef) {
  const Eigen::VectorXd eta = data.design * coef;
  double dev = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double w = data.weights(i);
    if (w <= 0.0) continue;
    const double mu = std::clamp(invlogit(eta(i)), 1e-300, 1.0 - 1e-16);
    const double y = data.responses(i);
    dev += 2.0 * w * (xlogy_ratio(y, mu) + xlogy_ratio(1.0 - y, 1.0 - mu));
  }
  return dev;
}

Eigen::VectorXd weighted_score(const WeightedBinomialData& data, const Eigen::VectorXd& coef) {
  const Eigen::VectorXd eta = data.design * coef;
  Eigen::VectorXd resid(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    resid(i) = data.weights(i) * (data.responses(i) - invlogit(eta(i)));
  return data.design.transpose() * resid;
}

IrlsResult irls_fit(const WeightedBinomialData& data, const std::optional<Eigen::VectorXd>& init,
                    const IrlsOptions& options) {
  check_data(data);
  const auto n = data.design.rows();
  const auto p = data.design.cols();
  if (n == 0 || p == 0) throw Error(ErrorCode::InvalidInput, "empty regression problem");

  std::vector<bool> fixed = options.fixed;
  fixed.resize(p, false);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  if (init) {
    if (init->size() != p) throw Error(ErrorCode::DimensionMismatch, "initial coefficients");
    beta = *init;
  } else if (!fixed[0] && (data.design.col(0).array() == 1.0).all()) {
    const double wsum = data.weights.sum();
    if (wsum > 0.0) {
      const double pooled = data.weights.dot(data.responses) / wsum;
      beta(0) = logit(std::clamp(pooled, 1e-6, 1.0 - 1e-6));
    }
  }

  IrlsResult result;
  double deviance = binomial_deviance(data, beta);
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index c = 0; c < p; ++c)
      if (!fixed[c]) free.push_back(c);
    if (free.empty()) {
      result.converged = true;
      break;
    }

    const Eigen::VectorXd eta = data.design * beta;
    Eigen::VectorXd offset = Eigen::VectorXd::Zero(n);
    for (Eigen::Index c = 0; c < p; ++c)
      if (fixed[c]) offset += data.design.col(c) * beta(c);

    Eigen::MatrixXd A(n, static_cast<Eigen::Index>(free.size()));
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = std::clamp(invlogit(eta(i)), kMuClamp, 1.0 - kMuClamp);
      const double var = mu * (1.0 - mu);
      const double sw = std::sqrt(data.weights(i) * var);
      const double z = eta(i) - offset(i) + (data.responses(i) - mu) / var;
      for (std::size_t k = 0; k < free.size(); ++k) A(i, k) = sw * data.design(i, free[k]);
      rhs(i) = sw * z;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() < static_cast<Eigen::Index>(free.size()))
      throw Error(ErrorCode::RankDeficientDesign, "weighted design is not of full column rank");
    const Eigen::VectorXd solved = qr.solve(rhs);

    Eigen::VectorXd proposal = beta;
    for (std::size_t k = 0; k < free.size(); ++k) proposal(free[k]) = solved(k);

    // Step halving keeps the deviance nonincreasing.
    Eigen::VectorXd step = proposal - beta;
    double new_dev = binomial_deviance(data, proposal);
    for (int half = 0; half < 30 && new_dev > deviance * (1.0 + 1e-12) + 1e-12; ++half) {
      step *= 0.5;
      proposal = beta + step;
      new_dev = binomial_deviance(data, proposal);
    }
    if (new_dev > deviance * (1.0 + 1e-12) + 1e-12) {
      // No descent direction left at working precision.
      result.converged = true;
      result.iterations = iter;
      break;
    }

    for (Eigen::Index c = 0; c < p; ++c) {
      if (!fixed[c] && std::abs(proposal(c)) >= options.coef_cap) {
        proposal(c) = std::copysign(options.coef_cap, proposal(c));
        fixed[c] = true;
        result.capped = true;
      }
    }
    new_dev = binomial_deviance(data, proposal);

    const double change = (proposal - beta).norm();
    const double gain = deviance - new_dev;
    beta = proposal;
    deviance = new_dev;
    result.iterations = iter;
    // Past the cap the fitted probabilities sit at 0 or 1 and the remaining
    // coefficients only wander in the flat deviance.
    const bool stalled = result.capped && gain <= 1e-12 * data.weights.sum();
    if (change < options.tol || stalled) {
      result.converged = true;
      break;
    }
  }
  if (!result.converged) {
    std::ostringstream msg;
    msg << "IRLS did not converge in " << options.max_iter << " iterations";
    throw Error(ErrorCode::NonConvergence, msg.str());
  }
  result.coef = beta;
  result.deviance = deviance;
  return result;
}

}  // namespace rrph

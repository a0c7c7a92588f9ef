#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace rrph {

// Proportions with totals as weights; responses need not be integer counts.
struct WeightedBinomialData {
  Eigen::VectorXd responses;  // in [0,1]
  Eigen::VectorXd weights;    // >= 0, rows with weight 0 are ignored
  Eigen::MatrixXd design;     // n x p
};

struct IrlsOptions {
  int max_iter = 50;
  double tol = 1e-10;        // stop when ||beta_new - beta|| < tol
  double coef_cap = 30.0;    // separation guard
  std::vector<bool> fixed;   // coefficients held at their initial value
};

struct IrlsResult {
  Eigen::VectorXd coef;
  int iterations = 0;
  bool converged = false;
  bool capped = false;  // some coefficient was pinned at +-coef_cap
  double deviance = 0.0;
};

// Weighted logistic regression by iteratively reweighted least squares with
// QR-based weighted solves and step halving on deviance increase.
IrlsResult irls_fit(const WeightedBinomialData& data,
                    const std::optional<Eigen::VectorXd>& init = std::nullopt,
                    const IrlsOptions& options = {});

double binomial_deviance(const WeightedBinomialData& data, const Eigen::VectorXd& coef);

// X^T (w o (y - mu))
Eigen::VectorXd weighted_score(const WeightedBinomialData& data, const Eigen::VectorXd& coef);

}  // namespace rrph

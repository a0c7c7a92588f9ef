#pragma once

#include <Eigen/Dense>

namespace rrph {

struct DphTolerances {
  double sum_tol = 1e-12;          // initial-vector normalization and row sums
  double spectral_margin = 1e-12;  // reject when spectral radius >= 1 - margin
};

// Discrete phase-type model: an absorbing chain on d transient states with
// initial distribution pi and sub-transition matrix T. Instances only come
// out of validate_dph(), so every DphModel satisfies the model constraints.
class DphModel {
 public:
  int dim() const { return static_cast<int>(pi_.size()); }
  const Eigen::VectorXd& pi() const { return pi_; }
  const Eigen::MatrixXd& T() const { return T_; }
  // t = (I - T) e
  const Eigen::VectorXd& exit() const { return exit_; }

  friend DphModel validate_dph(const Eigen::VectorXd& pi, const Eigen::MatrixXd& T,
                               const DphTolerances& tol);

 private:
  DphModel(Eigen::VectorXd pi, Eigen::MatrixXd T);

  Eigen::VectorXd pi_;
  Eigen::MatrixXd T_;
  Eigen::VectorXd exit_;
};

DphModel validate_dph(const Eigen::VectorXd& pi, const Eigen::MatrixXd& T,
                      const DphTolerances& tol = {});

Eigen::VectorXd exit_vector(const DphModel& model);

// P(tau = n) = pi T^(n-1) t, supported on n >= 1.
double dph_pmf(const DphModel& model, int n);

// E[tau] = pi (I - T)^-1 e
double dph_mean(const DphModel& model);

// E[z^tau] = pi z (I - T z)^-1 t, for |z| <= 1.
double dph_pgf(const DphModel& model, double z);

double spectral_radius(const Eigen::MatrixXd& T);

}  // namespace rrph

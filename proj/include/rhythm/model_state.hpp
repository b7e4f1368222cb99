#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rhythm/basis.hpp"
#include "rhythm/errors.hpp"

namespace rhythm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// p x T log-scale trajectories, one probe per row, rows centred.
struct ExpressionMatrix {
  MatrixXd values;
  std::vector<std::string> probe_ids;
  TimeGrid<double> grid;

  Index n_probes() const { return values.rows(); }
  Index n_time() const { return values.cols(); }
};

/// Subtracts each row mean. Ingestion does this; the model has no intercept.
ExpressionMatrix center_rows(MatrixXd values, std::vector<std::string> probe_ids, TimeGrid<double> grid);

struct HyperParams {
  double a_sigma = 1.0;
  double b_sigma = 0.5;
  double rho = 3.0;
  double a1 = 2.1;
  double a2 = 3.1;
  double a_theta = 1.0;
  double b_theta = 5.0;
  double a_gamma = 1.0;
  double b_gamma = 10.0;
  int k_init = 5;

  void validate() const;
};

/// One MCMC state. Latent (tilde) coefficients evolve freely; the effective
/// coefficients are their thresholded images.
struct ModelState {
  // periodic block
  MatrixXd theta_tilde;  // p x 2q
  MatrixXd theta;        // p x 2q
  MatrixXd varpi;        // p x q
  // local block
  MatrixXd gamma_tilde;  // p x n_local
  MatrixXd gamma;        // p x n_local
  MatrixXd varpi_star;   // p x n_local
  // factors
  MatrixXd Lambda;  // p x k
  MatrixXd Eta;     // T x k
  MatrixXd phi;     // p x k
  VectorXd zeta;    // k
  VectorXd tau;     // k
  // regression maps
  MatrixXd W;  // 2q x k
  MatrixXd Z;  // n_local x k
  // noise and sparsity bounds
  VectorXd sigma2;  // p
  double K_theta = 1.0;
  double K_gamma = 1.0;

  Index n_probes() const { return theta.rows(); }
  Index n_factors() const { return Lambda.cols(); }
  Index n_periods() const { return varpi.cols(); }
  Index n_local() const { return gamma.cols(); }

  void recompute_tau();
  /// Throws NumericalFailure when a type invariant does not hold.
  void check_invariants() const;
};

/// Pairwise hard threshold: pair m of row i survives iff its norm >= varpi(i, m).
template <typename Derived, typename DerivedT>
Mat<typename Derived::Scalar> apply_theta_thresholds(const Eigen::MatrixBase<Derived>& theta_tilde,
                                                     const Eigen::MatrixBase<DerivedT>& thresholds) {
  using Scalar = typename Derived::Scalar;
  require(theta_tilde.cols() == 2 * thresholds.cols() && theta_tilde.rows() == thresholds.rows(),
          "theta and threshold shapes do not conform");
  require((thresholds.array() >= Scalar(0)).all(), "thresholds must be nonnegative");
  Mat<Scalar> out = theta_tilde;
  for (Index i = 0; i < thresholds.rows(); ++i) {
    for (Index m = 0; m < thresholds.cols(); ++m) {
      const Scalar a = theta_tilde(i, 2 * m);
      const Scalar b = theta_tilde(i, 2 * m + 1);
      if (std::hypot(a, b) < thresholds(i, m)) {
        out(i, 2 * m) = 0;
        out(i, 2 * m + 1) = 0;
      }
    }
  }
  return out;
}

template <typename Derived, typename DerivedT>
Mat<typename Derived::Scalar> apply_gamma_thresholds(const Eigen::MatrixBase<Derived>& gamma_tilde,
                                                     const Eigen::MatrixBase<DerivedT>& thresholds) {
  using Scalar = typename Derived::Scalar;
  require(gamma_tilde.rows() == thresholds.rows() && gamma_tilde.cols() == thresholds.cols(),
          "gamma and threshold shapes do not conform");
  require((thresholds.array() >= Scalar(0)).all(), "thresholds must be nonnegative");
  return (gamma_tilde.array().abs() >= thresholds.array()).select(gamma_tilde, Scalar(0));
}

/// Row-vector version used inside the sampler.
inline void threshold_theta_row(const VectorXd& theta_tilde, const VectorXd& varpi, VectorXd& theta) {
  theta = theta_tilde;
  for (Index m = 0; m < varpi.size(); ++m) {
    if (std::hypot(theta_tilde[2 * m], theta_tilde[2 * m + 1]) < varpi[m]) {
      theta[2 * m] = 0;
      theta[2 * m + 1] = 0;
    }
  }
}

inline void threshold_gamma_row(const VectorXd& gamma_tilde, const VectorXd& varpi_star, VectorXd& gamma) {
  gamma = (gamma_tilde.array().abs() >= varpi_star.array()).select(gamma_tilde, 0.0);
}

/// Row i is B theta_i + C gamma_i + eta lambda_i.
template <typename Scalar>
Mat<Scalar> fitted_mean(const Mat<Scalar>& theta, const Mat<Scalar>& gamma, const Mat<Scalar>& Lambda,
                        const Mat<Scalar>& Eta, const DesignPair<Scalar>& designs) {
  require(Lambda.cols() == Eta.cols(), "Lambda and eta have different numbers of factors");
  require(theta.cols() == designs.B.cols() && gamma.cols() == designs.C.cols(),
          "coefficient blocks do not match the designs");
  Mat<Scalar> mean = theta * designs.B.transpose() + gamma * designs.C.transpose();
  if (Lambda.cols() > 0) mean.noalias() += Lambda * Eta.transpose();
  return mean;
}

inline MatrixXd fitted_mean(const ModelState& s, const DesignPair<double>& designs) {
  return fitted_mean<double>(s.theta, s.gamma, s.Lambda, s.Eta, designs);
}

/// log N(residual | 0, sigma2 I) for one row.
inline double gaussian_row_loglik(double sq_norm, double sigma2, Index n) {
  return -0.5 * static_cast<double>(n) * std::log(2 * std::numbers::pi * sigma2) - 0.5 * sq_norm / sigma2;
}

/// sum_i log N(y_i | fitted row i, sigma_i^2 I_T).
double log_likelihood(const ModelState& s, const MatrixXd& y, const DesignPair<double>& designs);

}  // namespace rhythm

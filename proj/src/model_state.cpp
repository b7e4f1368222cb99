#include "rhythm/model_state.hpp"

#include <sstream>

namespace rhythm {

ExpressionMatrix center_rows(MatrixXd values, std::vector<std::string> probe_ids, TimeGrid<double> grid) {
  require(values.rows() == static_cast<Index>(probe_ids.size()), "probe id count does not match rows");
  require(values.cols() == grid.size(), "column count does not match the time grid");
  require(values.allFinite(), "expression values must be finite");
  const VectorXd means = values.rowwise().mean();
  values.colwise() -= means;
  return ExpressionMatrix{std::move(values), std::move(probe_ids), std::move(grid)};
}

void HyperParams::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0) || !std::isfinite(v)) throw InvalidInput(std::string(name) + " must be positive");
  };
  positive(a_sigma, "a_sigma");
  positive(b_sigma, "b_sigma");
  positive(rho, "rho");
  positive(a1, "a1");
  positive(a2, "a2");
  positive(a_theta, "a_theta");
  positive(b_theta, "b_theta");
  positive(a_gamma, "a_gamma");
  positive(b_gamma, "b_gamma");
  if (k_init < 1) throw InvalidInput("k_init must be at least 1");
}

void ModelState::recompute_tau() {
  tau.resize(zeta.size());
  double prod = 1.0;
  for (Index h = 0; h < zeta.size(); ++h) {
    prod *= zeta[h];
    tau[h] = prod;
  }
}

void ModelState::check_invariants() const {
  std::ostringstream err;
  const Index p = n_probes();
  const Index k = n_factors();
  if (theta_tilde.rows() != p || varpi.rows() != p || gamma.rows() != p || Lambda.rows() != p ||
      phi.rows() != p || sigma2.size() != p) {
    err << "row counts disagree; ";
  }
  if (Eta.cols() != k || W.cols() != k || Z.cols() != k || phi.cols() != k || zeta.size() != k ||
      tau.size() != k) {
    err << "factor counts disagree; ";
  }
  if ((sigma2.array() <= 0).any()) err << "nonpositive variance; ";
  if ((phi.array() <= 0).any() || (zeta.array() <= 0).any()) err << "nonpositive shrinkage; ";
  if (!(K_theta > 0) || !(K_gamma > 0)) err << "nonpositive bound; ";
  if ((varpi.array() > K_theta).any() || (varpi_star.array() > K_gamma).any()) err << "threshold above bound; ";
  double prod = 1.0;
  for (Index h = 0; h < k; ++h) {
    prod *= zeta[h];
    if (std::abs(tau[h] - prod) > 1e-12 * std::abs(prod)) {
      err << "tau is not the cumulative product of zeta; ";
      break;
    }
  }
  for (Index i = 0; i < p; ++i) {
    for (Index m = 0; m < n_periods(); ++m) {
      const bool on = std::hypot(theta_tilde(i, 2 * m), theta_tilde(i, 2 * m + 1)) >= varpi(i, m);
      const bool stored_on = theta(i, 2 * m) != 0 || theta(i, 2 * m + 1) != 0;
      if (on) {
        if (theta(i, 2 * m) != theta_tilde(i, 2 * m) || theta(i, 2 * m + 1) != theta_tilde(i, 2 * m + 1)) {
          err << "active theta pair differs from latent; ";
          i = p;
          break;
        }
      } else if (stored_on) {
        err << "shrunk theta pair is nonzero; ";
        i = p;
        break;
      }
    }
  }
  const MatrixXd g = apply_gamma_thresholds(gamma_tilde, varpi_star);
  if (g != gamma) err << "gamma does not match its thresholded latent; ";
  if (!theta_tilde.allFinite() || !gamma_tilde.allFinite() || !Lambda.allFinite() || !Eta.allFinite() ||
      !W.allFinite() || !Z.allFinite()) {
    err << "nonfinite entries; ";
  }
  const std::string msg = err.str();
  if (!msg.empty()) throw NumericalFailure("model state invariant violated: " + msg);
}

double log_likelihood(const ModelState& s, const MatrixXd& y, const DesignPair<double>& designs) {
  require(y.rows() == s.n_probes() && y.cols() == designs.n_time(), "data shape does not match the state");
  if (!s.theta.allFinite() || !s.gamma.allFinite() || !s.Lambda.allFinite() || !s.Eta.allFinite() ||
      !s.sigma2.allFinite()) {
    throw NumericalFailure("log_likelihood: nonfinite parameters");
  }
  require((s.sigma2.array() > 0).all(), "residual variances must be positive");
  const MatrixXd resid = y - fitted_mean(s, designs);
  double ll = 0.0;
  for (Index i = 0; i < y.rows(); ++i) {
    ll += gaussian_row_loglik(resid.row(i).squaredNorm(), s.sigma2[i], y.cols());
  }
  return ll;
}

}  // namespace rhythm

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "rhythm/errors.hpp"
#include "rhythm/rng.hpp"

namespace rhythm {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi); }

/// Pareto with shape a and scale b: density a b^a / x^(a+1) on x >= b.
struct ParetoDist {
  double shape;
  double scale;

  ParetoDist(double a, double b) : shape(a), scale(b) {
    require(a > 0 && b > 0 && std::isfinite(a) && std::isfinite(b), "Pareto parameters must be positive");
  }

  double logpdf(double x) const {
    if (!(x >= scale)) return -std::numeric_limits<double>::infinity();
    return std::log(shape) + shape * std::log(scale) - (shape + 1) * std::log(x);
  }
  double cdf(double x) const { return x < scale ? 0.0 : 1.0 - std::pow(scale / x, shape); }
  /// Inverse CDF applied to the upper tail: u = 1 maps to the scale.
  double quantile_upper(double u) const { return scale * std::pow(u, -1.0 / shape); }

  template <typename Rng>
  double sample(Rng& rng) const {
    return quantile_upper(uniform_open(rng));
  }
};

/// Adaptive Simpson quadrature on [a, b] to absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth = 50);

/// Prior probability that a coefficient survives a Unif(0, K) threshold when
/// its latent value is standard normal: (1/K) int_0^K 2 (1 - Phi(w)) dw.
double prob_nonshrink_given_K(double K);

/// Draw K ~ Pareto(a, b) n times and map each through prob_nonshrink_given_K.
std::vector<double> marginal_sparsity_distribution(double a, double b, std::size_t n_draws, Xoshiro256& rng);

struct MgpsDraw {
  Eigen::MatrixXd Lambda;
  Eigen::MatrixXd phi;
  Eigen::VectorXd zeta;
  Eigen::VectorXd tau;
};

/// Multiplicative gamma process shrinkage prior draw for a p x k loading matrix.
MgpsDraw mgps_prior_draw(Eigen::Index p, Eigen::Index k, double rho, double a1, double a2, Xoshiro256& rng);

}  // namespace rhythm

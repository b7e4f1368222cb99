#include "rhythm/priors.hpp"

#include <algorithm>

namespace rhythm {
namespace {

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// Beyond this point 2(1 - Phi(w)) < 1e-300.
constexpr double kTailCut = 38.0;

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int max_depth) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
  return simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

double prob_nonshrink_given_K(double K) {
  require(K > 0 && !std::isnan(K), "K must be positive");
  const auto survive = [](double w) { return std::erfc(w / std::numbers::sqrt2); };
  const double upper = std::min(K, kTailCut);
  const double integral = adaptive_simpson(survive, 0.0, upper, 1e-10);
  return std::clamp(integral / K, std::numeric_limits<double>::min(), 1.0);
}

std::vector<double> marginal_sparsity_distribution(double a, double b, std::size_t n_draws, Xoshiro256& rng) {
  const ParetoDist prior(a, b);
  std::vector<double> out;
  out.reserve(n_draws);
  for (std::size_t d = 0; d < n_draws; ++d) out.push_back(prob_nonshrink_given_K(prior.sample(rng)));
  return out;
}

MgpsDraw mgps_prior_draw(Eigen::Index p, Eigen::Index k, double rho, double a1, double a2, Xoshiro256& rng) {
  require(rho > 0 && a1 > 0 && a2 > 0, "MGPS hyperparameters must be positive");
  MgpsDraw d;
  d.zeta.resize(k);
  for (Eigen::Index h = 0; h < k; ++h) d.zeta[h] = gamma_rate(rng, h == 0 ? a1 : a2, 1.0);
  d.tau.resize(k);
  double prod = 1.0;
  for (Eigen::Index h = 0; h < k; ++h) {
    prod *= d.zeta[h];
    d.tau[h] = prod;
  }
  d.phi.resize(p, k);
  d.Lambda.resize(p, k);
  for (Eigen::Index h = 0; h < k; ++h) {
    for (Eigen::Index i = 0; i < p; ++i) {
      d.phi(i, h) = gamma_rate(rng, rho / 2, rho / 2);
      d.Lambda(i, h) = normal(rng) / std::sqrt(d.phi(i, h) * d.tau[h]);
    }
  }
  return d;
}

}  // namespace rhythm

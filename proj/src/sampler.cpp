#include "rhythm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "rhythm/binary_io.hpp"
#include "rhythm/errors.hpp"
#include "rhythm/priors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rhythm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

int thread_count(const ChainConfig& config) {
#ifdef _OPENMP
  return config.n_threads > 0 ? config.n_threads : omp_get_max_threads();
#else
  (void)config;
  return 1;
#endif
}

}  // namespace

std::string to_string(Mode m) { return m == Mode::kDependent ? "dependent" : "independent"; }

Mode mode_from_string(const std::string& s) {
  if (s == "dependent") return Mode::kDependent;
  if (s == "independent") return Mode::kIndependent;
  throw InvalidInput("unknown mode '" + s + "' (expected dependent or independent)");
}

double AdaptSchedule::probability(long sweep) const {
  if (!enabled || sweep < start) return 0.0;
  return std::min(1.0, std::exp(c0 + c1 * static_cast<double>(sweep)));
}

void ChainConfig::validate() const {
  require(n_iter > 0, "n_iter must be positive");
  require(burn_in >= 0 && burn_in < n_iter, "burn_in must be in [0, n_iter)");
  require(thin >= 1, "thin must be at least 1");
  require(adapt.epsilon > 0, "adaptation epsilon must be positive");
  require(adapt.min_k >= 1 && adapt.max_k >= adapt.min_k, "adaptation rank bounds are inconsistent");
  require(record_lambda_every >= 1, "record_lambda_every must be at least 1");
}

SamplerContext::SamplerContext(const MatrixXd& y, const DesignPair<double>& designs, const HyperParams& hyper,
                               Mode mode)
    : y_(&y), designs_(&designs), hyper_(hyper), mode_(mode) {
  hyper_.validate();
  require(y.cols() == designs.n_time(), "data columns do not match the design rows");
  require(designs.C.rows() == designs.n_time(), "design matrices disagree on the number of times");
  Eigen::SelfAdjointEigenSolver<MatrixXd> eb(designs.B.transpose() * designs.B);
  Eigen::SelfAdjointEigenSolver<MatrixXd> ec(designs.C.transpose() * designs.C);
  QB_ = eb.eigenvectors();
  dB_ = eb.eigenvalues().cwiseMax(0.0);
  QC_ = ec.eigenvectors();
  dC_ = ec.eigenvalues().cwiseMax(0.0);
}

MatrixXd GaussianConditional::covariance() const {
  return precision.llt().solve(MatrixXd::Identity(precision.rows(), precision.cols()));
}

// ---- W and Z -----------------------------------------------------------------

MatrixXd regression_map_precision(const MatrixXd& Lambda) {
  MatrixXd P = Lambda.transpose() * Lambda;
  P.diagonal().array() += 1.0;
  return P;
}

MatrixXd regression_map_posterior_mean(const MatrixXd& latent, const MatrixXd& Lambda) {
  require(latent.rows() == Lambda.rows(), "latent rows must match Lambda rows");
  const Eigen::LLT<MatrixXd> llt(regression_map_precision(Lambda));
  // Row l of the map is P^{-1} sum_i x_{il} lambda_i.
  return llt.solve(Lambda.transpose() * latent).transpose();
}

MatrixXd update_regression_map(const MatrixXd& latent, const MatrixXd& Lambda, Xoshiro256& rng) {
  const Index k = Lambda.cols();
  const Eigen::LLT<MatrixXd> llt(regression_map_precision(Lambda));
  if (llt.info() != Eigen::Success) throw NumericalFailure("regression map precision is not positive definite");
  MatrixXd out = llt.solve(Lambda.transpose() * latent).transpose();
  for (Index l = 0; l < out.rows(); ++l) {
    const VectorXd z = normal_vector(rng, k);
    out.row(l) += llt.matrixU().solve(z).transpose();
  }
  return out;
}

// ---- lambda_i ----------------------------------------------------------------

GaussianConditional lambda_row_conditional(const ModelState& s, const SamplerContext& ctx, Index i) {
  const auto& d = ctx.designs();
  const double inv_s2 = 1.0 / s.sigma2[i];
  const VectorXd resid = ctx.y().row(i).transpose() - d.B * s.theta.row(i).transpose() -
                         d.C * s.gamma.row(i).transpose();
  GaussianConditional g;
  g.precision = inv_s2 * (s.Eta.transpose() * s.Eta) + s.W.transpose() * s.W + s.Z.transpose() * s.Z;
  g.precision.diagonal() += (s.phi.row(i).transpose().array() * s.tau.array()).matrix();
  const VectorXd b = inv_s2 * (s.Eta.transpose() * resid) + s.W.transpose() * s.theta_tilde.row(i).transpose() +
                     s.Z.transpose() * s.gamma_tilde.row(i).transpose();
  g.mean = g.precision.llt().solve(b);
  return g;
}

namespace {

VectorXd update_lambda_row_fast(const ModelState& s, const SamplerContext& ctx, Index i, const MatrixXd& shared,
                                const MatrixXd& EtaT_Eta, Xoshiro256& rng) {
  const auto& d = ctx.designs();
  const double inv_s2 = 1.0 / s.sigma2[i];
  const VectorXd resid = ctx.y().row(i).transpose() - d.B * s.theta.row(i).transpose() -
                         d.C * s.gamma.row(i).transpose();
  MatrixXd P = inv_s2 * EtaT_Eta + shared;
  P.diagonal() += (s.phi.row(i).transpose().array() * s.tau.array()).matrix();
  const VectorXd b = inv_s2 * (s.Eta.transpose() * resid) + s.W.transpose() * s.theta_tilde.row(i).transpose() +
                     s.Z.transpose() * s.gamma_tilde.row(i).transpose();
  const Eigen::LLT<MatrixXd> llt(P);
  if (llt.info() != Eigen::Success) throw NumericalFailure("lambda precision is not positive definite");
  return gaussian_from_precision(llt, b, rng);
}

}  // namespace

VectorXd update_lambda_row(const ModelState& s, const SamplerContext& ctx, Index i, Xoshiro256& rng) {
  const MatrixXd shared = s.W.transpose() * s.W + s.Z.transpose() * s.Z;
  return update_lambda_row_fast(s, ctx, i, shared, s.Eta.transpose() * s.Eta, rng);
}

// ---- MH steps for the latent coefficients --------------------------------------

namespace {

struct MhBlock {
  const MatrixXd& design;
  const MatrixXd& Q;
  const VectorXd& d;
};

// Shared body of the theta and gamma updates. `partial` is y_i minus every
// term except the block being updated; `prior_mean` is W lambda_i or Z lambda_i.
template <typename Threshold>
MhOutcome independence_mh(const MhBlock& blk, const VectorXd& partial, const VectorXd& prior_mean, double sigma2,
                          const Threshold& threshold, VectorXd& latent, VectorXd& effective, Xoshiro256& rng) {
  const double inv_s2 = 1.0 / sigma2;
  const VectorXd prec_eig = (blk.d * inv_s2).array() + 1.0;
  const VectorXd b = inv_s2 * (blk.design.transpose() * partial) + prior_mean;
  const VectorXd mean = blk.Q * ((blk.Q.transpose() * b).array() / prec_eig.array()).matrix();
  const VectorXd z = normal_vector(rng, b.size());
  VectorXd cand = mean + blk.Q * (z.array() / prec_eig.array().sqrt()).matrix();
  VectorXd cand_eff;
  threshold(cand, cand_eff);

  const double log_u = std::log(uniform_open(rng));
  MhOutcome out;
  if (cand_eff == cand && effective == latent) {
    // Target and proposal coincide on both states.
    out.log_ratio = std::numeric_limits<double>::infinity();
    out.accepted = true;
  } else {
    const auto loglik = [&](const VectorXd& eff) {
      return -0.5 * inv_s2 * (partial - blk.design * eff).squaredNorm();
    };
    const auto logprior = [&](const VectorXd& x) { return -0.5 * (x - prior_mean).squaredNorm(); };
    const auto logq = [&](const VectorXd& x) {
      const VectorXd r = blk.Q.transpose() * (x - mean);
      return -0.5 * (r.array().square() * prec_eig.array()).sum();
    };
    out.log_ratio = loglik(cand_eff) - loglik(effective) + logprior(cand) - logprior(latent) + logq(latent) -
                    logq(cand);
    out.accepted = std::isfinite(out.log_ratio) ? log_u < out.log_ratio : false;
  }
  if (out.accepted) {
    latent = std::move(cand);
    effective = std::move(cand_eff);
  }
  return out;
}

}  // namespace

MhOutcome update_theta_tilde_mh(ModelState& s, const SamplerContext& ctx, Index i, Xoshiro256& rng) {
  const auto& d = ctx.designs();
  const VectorXd lambda = s.Lambda.row(i).transpose();
  VectorXd partial = ctx.y().row(i).transpose() - d.C * s.gamma.row(i).transpose();
  if (s.n_factors() > 0) partial -= s.Eta * lambda;
  const VectorXd prior_mean = s.W * lambda;
  const VectorXd varpi = s.varpi.row(i).transpose();
  VectorXd latent = s.theta_tilde.row(i).transpose();
  VectorXd effective = s.theta.row(i).transpose();
  const MhOutcome out = independence_mh(
      MhBlock{d.B, ctx.QB(), ctx.dB()}, partial, prior_mean, s.sigma2[i],
      [&](const VectorXd& x, VectorXd& eff) { threshold_theta_row(x, varpi, eff); }, latent, effective, rng);
  s.theta_tilde.row(i) = latent.transpose();
  s.theta.row(i) = effective.transpose();
  return out;
}

MhOutcome update_gamma_tilde_mh(ModelState& s, const SamplerContext& ctx, Index i, Xoshiro256& rng) {
  const auto& d = ctx.designs();
  const VectorXd lambda = s.Lambda.row(i).transpose();
  VectorXd partial = ctx.y().row(i).transpose() - d.B * s.theta.row(i).transpose();
  if (s.n_factors() > 0) partial -= s.Eta * lambda;
  const VectorXd prior_mean = s.Z * lambda;
  const VectorXd varpi_star = s.varpi_star.row(i).transpose();
  VectorXd latent = s.gamma_tilde.row(i).transpose();
  VectorXd effective = s.gamma.row(i).transpose();
  const MhOutcome out = independence_mh(
      MhBlock{d.C, ctx.QC(), ctx.dC()}, partial, prior_mean, s.sigma2[i],
      [&](const VectorXd& x, VectorXd& eff) { threshold_gamma_row(x, varpi_star, eff); }, latent, effective, rng);
  s.gamma_tilde.row(i) = latent.transpose();
  s.gamma.row(i) = effective.transpose();
  return out;
}

// ---- latent thresholds -----------------------------------------------------------

namespace {

VectorXd full_residual(const ModelState& s, const SamplerContext& ctx, Index i) {
  const auto& d = ctx.designs();
  VectorXd r = ctx.y().row(i).transpose() - d.B * s.theta.row(i).transpose() - d.C * s.gamma.row(i).transpose();
  if (s.n_factors() > 0) r -= s.Eta * s.Lambda.row(i).transpose();
  return r;
}

// log pi* = log A - log(A + D) where A weights the "active" branch by its
// prior mass `norm` and D weights the "shrunk" branch by `bound - norm`.
double log_pi_star(double loglik_active, double loglik_zero, double norm, double bound) {
  const double log_a = norm > 0 ? loglik_active + std::log(norm) : kNegInf;
  const double log_d = bound > norm ? loglik_zero + std::log(bound - norm) : kNegInf;
  return log_a - log_sum_exp(log_a, log_d);
}

// Draws a threshold from the two-piece uniform conditional.
double draw_threshold(double norm, double bound, double log_pi, Xoshiro256& rng) {
  if (norm > bound) return bound * uniform_open(rng);
  const double u = uniform_open(rng);
  const double v = uniform_open(rng);
  if (std::log(u) < log_pi) return norm * v;
  return norm + (bound - norm) * v;
}

struct PairLogliks {
  double active;
  double zero;
};

// `resid_without` is the residual with pair m removed.
PairLogliks theta_pair_logliks(const VectorXd& resid_without, const MatrixXd& B, const VectorXd& latent_pair,
                               Index m, double sigma2) {
  const VectorXd fit = B.middleCols(2 * m, 2) * latent_pair;
  return {-0.5 * (resid_without - fit).squaredNorm() / sigma2, -0.5 * resid_without.squaredNorm() / sigma2};
}

void theta_thresholds_for_probe(ModelState& s, const SamplerContext& ctx, Index i, Xoshiro256& rng) {
  const auto& B = ctx.designs().B;
  VectorXd r = full_residual(s, ctx, i);
  for (Index m = 0; m < s.n_periods(); ++m) {
    const Eigen::Vector2d current = s.theta.row(i).segment<2>(2 * m).transpose();
    const Eigen::Vector2d latent = s.theta_tilde.row(i).segment<2>(2 * m).transpose();
    r += B.middleCols(2 * m, 2) * current;
    const double norm = std::hypot(latent[0], latent[1]);
    double lp = 0.0;
    if (norm <= s.K_theta) {
      const PairLogliks ll = theta_pair_logliks(r, B, latent, m, s.sigma2[i]);
      lp = log_pi_star(ll.active, ll.zero, norm, s.K_theta);
    }
    const double w = draw_threshold(norm, s.K_theta, lp, rng);
    s.varpi(i, m) = w;
    const Eigen::Vector2d next = norm >= w ? latent : Eigen::Vector2d::Zero();
    s.theta.row(i).segment<2>(2 * m) = next.transpose();
    r -= B.middleCols(2 * m, 2) * next;
  }
}

void gamma_thresholds_for_probe(ModelState& s, const SamplerContext& ctx, Index i, Xoshiro256& rng) {
  const auto& C = ctx.designs().C;
  VectorXd r = full_residual(s, ctx, i);
  for (Index l = 0; l < s.n_local(); ++l) {
    const double latent = s.gamma_tilde(i, l);
    r += C.col(l) * s.gamma(i, l);
    const double norm = std::abs(latent);
    double lp = 0.0;
    if (norm <= s.K_gamma) {
      const double active = -0.5 * (r - C.col(l) * latent).squaredNorm() / s.sigma2[i];
      const double zero = -0.5 * r.squaredNorm() / s.sigma2[i];
      lp = log_pi_star(active, zero, norm, s.K_gamma);
    }
    const double w = draw_threshold(norm, s.K_gamma, lp, rng);
    s.varpi_star(i, l) = w;
    s.gamma(i, l) = norm >= w ? latent : 0.0;
    r -= C.col(l) * s.gamma(i, l);
  }
}

}  // namespace

double theta_threshold_pi_star(const ModelState& s, const SamplerContext& ctx, Index i, Index m) {
  const auto& B = ctx.designs().B;
  VectorXd r = full_residual(s, ctx, i);
  r += B.middleCols(2 * m, 2) * s.theta.row(i).segment(2 * m, 2).transpose();
  const VectorXd latent = s.theta_tilde.row(i).segment(2 * m, 2).transpose();
  const double norm = std::hypot(latent[0], latent[1]);
  if (norm > s.K_theta) return 1.0;
  const PairLogliks ll = theta_pair_logliks(r, B, latent, m, s.sigma2[i]);
  return std::exp(log_pi_star(ll.active, ll.zero, norm, s.K_theta));
}

double gamma_threshold_pi_star(const ModelState& s, const SamplerContext& ctx, Index i, Index l) {
  const auto& C = ctx.designs().C;
  VectorXd r = full_residual(s, ctx, i);
  r += C.col(l) * s.gamma(i, l);
  const double latent = s.gamma_tilde(i, l);
  const double norm = std::abs(latent);
  if (norm > s.K_gamma) return 1.0;
  const double active = -0.5 * (r - C.col(l) * latent).squaredNorm() / s.sigma2[i];
  const double zero = -0.5 * r.squaredNorm() / s.sigma2[i];
  return std::exp(log_pi_star(active, zero, norm, s.K_gamma));
}

void update_theta_threshold(ModelState& s, const SamplerContext& ctx, Index i, Index m, Xoshiro256& rng) {
  require(s.K_theta > 0, "K_theta must be positive");
  const auto& B = ctx.designs().B;
  VectorXd r = full_residual(s, ctx, i);
  r += B.middleCols(2 * m, 2) * s.theta.row(i).segment(2 * m, 2).transpose();
  const VectorXd latent = s.theta_tilde.row(i).segment(2 * m, 2).transpose();
  const double norm = std::hypot(latent[0], latent[1]);
  double lp = 0.0;
  if (norm <= s.K_theta) {
    const PairLogliks ll = theta_pair_logliks(r, B, latent, m, s.sigma2[i]);
    lp = log_pi_star(ll.active, ll.zero, norm, s.K_theta);
  }
  const double w = draw_threshold(norm, s.K_theta, lp, rng);
  s.varpi(i, m) = w;
  if (norm >= w) {
    s.theta.row(i).segment(2 * m, 2) = latent.transpose();
  } else {
    s.theta.row(i).segment(2 * m, 2).setZero();
  }
}

void update_gamma_threshold(ModelState& s, const SamplerContext& ctx, Index i, Index l, Xoshiro256& rng) {
  require(s.K_gamma > 0, "K_gamma must be positive");
  const double norm = std::abs(s.gamma_tilde(i, l));
  const double lp = norm <= s.K_gamma ? std::log(gamma_threshold_pi_star(s, ctx, i, l)) : 0.0;
  const double w = draw_threshold(norm, s.K_gamma, lp, rng);
  s.varpi_star(i, l) = w;
  s.gamma(i, l) = norm >= w ? s.gamma_tilde(i, l) : 0.0;
}

void update_pareto_bounds(ModelState& s, const HyperParams& hyper, Xoshiro256& rng) {
  const double n_theta = static_cast<double>(s.varpi.size());
  const double n_gamma = static_cast<double>(s.varpi_star.size());
  const double max_theta = s.varpi.size() > 0 ? s.varpi.maxCoeff() : 0.0;
  const double max_gamma = s.varpi_star.size() > 0 ? s.varpi_star.maxCoeff() : 0.0;
  s.K_theta = ParetoDist(hyper.a_theta + n_theta, std::max(hyper.b_theta, max_theta)).sample(rng);
  s.K_gamma = ParetoDist(hyper.a_gamma + n_gamma, std::max(hyper.b_gamma, max_gamma)).sample(rng);
}

double update_sigma_precision(const VectorXd& residual, const HyperParams& hyper, Xoshiro256& rng,
                              double rate_scale) {
  return gamma_rate(rng, hyper.a_sigma + 0.5 * static_cast<double>(residual.size()),
                    rate_scale * (hyper.b_sigma + 0.5 * residual.squaredNorm()));
}

// ---- factors -----------------------------------------------------------------

GaussianConditional eta_conditional(const VectorXd& column_residual, const MatrixXd& Lambda, const VectorXd& sigma2) {
  GaussianConditional g;
  const MatrixXd scaled = sigma2.cwiseInverse().asDiagonal() * Lambda;
  g.precision = Lambda.transpose() * scaled;
  g.precision.diagonal().array() += 1.0;
  g.mean = g.precision.llt().solve(scaled.transpose() * column_residual);
  return g;
}

void update_eta(ModelState& s, const SamplerContext& ctx, std::uint64_t seed, long sweep) {
  const auto& d = ctx.designs();
  const MatrixXd R = ctx.y() - s.theta * d.B.transpose() - s.gamma * d.C.transpose();
  const MatrixXd scaled = s.sigma2.cwiseInverse().asDiagonal() * s.Lambda;
  MatrixXd P = s.Lambda.transpose() * scaled;
  P.diagonal().array() += 1.0;
  const Eigen::LLT<MatrixXd> llt(P);
  if (llt.info() != Eigen::Success) throw NumericalFailure("eta precision is not positive definite");
  const MatrixXd B_all = scaled.transpose() * R;  // k x T
  for (Index j = 0; j < R.cols(); ++j) {
    Xoshiro256 rng = substream(seed, static_cast<std::uint64_t>(sweep), Stream::kEta, static_cast<std::uint64_t>(j));
    s.Eta.row(j) = gaussian_from_precision(llt, B_all.col(j), rng).transpose();
  }
}

double zeta_shape(const ModelState& s, const HyperParams& hyper, Index h) {
  const double p = static_cast<double>(s.n_probes());
  const double k = static_cast<double>(s.n_factors());
  return (h == 0 ? hyper.a1 : hyper.a2) + 0.5 * p * (k - static_cast<double>(h));
}

double zeta_rate(const ModelState& s, Index h) {
  // tau_l^{(h)} = tau_l / zeta_h for l >= h.
  double sum = 0.0;
  for (Index l = h; l < s.n_factors(); ++l) {
    const double tau_excl = s.tau[l] / s.zeta[h];
    sum += tau_excl * (s.phi.col(l).array() * s.Lambda.col(l).array().square()).sum();
  }
  return 1.0 + 0.5 * sum;
}

void update_phi(ModelState& s, const HyperParams& hyper, Xoshiro256& rng) {
  for (Index h = 0; h < s.n_factors(); ++h) {
    for (Index i = 0; i < s.n_probes(); ++i) {
      const double lam = s.Lambda(i, h);
      s.phi(i, h) = gamma_rate(rng, 0.5 * (hyper.rho + 1.0), 0.5 * (hyper.rho + s.tau[h] * lam * lam));
    }
  }
}

void update_zeta(ModelState& s, const HyperParams& hyper, Index h, Xoshiro256& rng) {
  s.zeta[h] = gamma_rate(rng, zeta_shape(s, hyper, h), zeta_rate(s, h));
  s.recompute_tau();
}

void update_mgps(ModelState& s, const HyperParams& hyper, Xoshiro256& rng) {
  update_phi(s, hyper, rng);
  for (Index h = 0; h < s.n_factors(); ++h) update_zeta(s, hyper, h, rng);
}

namespace {

void keep_columns(MatrixXd& m, const std::vector<Index>& keep) {
  MatrixXd out(m.rows(), static_cast<Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) out.col(static_cast<Index>(c)) = m.col(keep[c]);
  m = std::move(out);
}

}  // namespace

Index adapt_rank(ModelState& s, const SamplerContext& ctx, long sweep, const AdaptSchedule& schedule,
                 Xoshiro256& rng) {
  const double prob = schedule.probability(sweep);
  if (prob <= 0.0 || uniform_open(rng) >= prob) return s.n_factors();
  const Index k = s.n_factors();
  std::vector<Index> shrunk;
  std::vector<Index> keep;
  for (Index h = 0; h < k; ++h) {
    if ((s.Lambda.col(h).array().abs() < schedule.epsilon).all()) {
      shrunk.push_back(h);
    } else {
      keep.push_back(h);
    }
  }
  if (shrunk.empty()) {
    if (k >= schedule.max_k) return k;
    const auto& hyper = ctx.hyper();
    const Index p = s.n_probes();
    const double zeta_new = gamma_rate(rng, hyper.a2, 1.0);
    const double tau_new = (k > 0 ? s.tau[k - 1] : 1.0) * zeta_new;
    s.zeta.conservativeResize(k + 1);
    s.zeta[k] = zeta_new;
    s.recompute_tau();
    s.phi.conservativeResize(p, k + 1);
    s.Lambda.conservativeResize(p, k + 1);
    for (Index i = 0; i < p; ++i) {
      s.phi(i, k) = gamma_rate(rng, 0.5 * hyper.rho, 0.5 * hyper.rho);
      s.Lambda(i, k) = normal(rng) / std::sqrt(s.phi(i, k) * tau_new);
    }
    s.Eta.conservativeResize(s.Eta.rows(), k + 1);
    for (Index j = 0; j < s.Eta.rows(); ++j) s.Eta(j, k) = normal(rng);
    s.W.conservativeResize(s.W.rows(), k + 1);
    for (Index r = 0; r < s.W.rows(); ++r) s.W(r, k) = normal(rng);
    s.Z.conservativeResize(s.Z.rows(), k + 1);
    for (Index r = 0; r < s.Z.rows(); ++r) s.Z(r, k) = normal(rng);
    return k + 1;
  }
  // Keep the earliest redundant columns when deletion would undershoot min_k.
  for (const Index h : shrunk) {
    if (static_cast<Index>(keep.size()) >= schedule.min_k) break;
    keep.push_back(h);
  }
  std::sort(keep.begin(), keep.end());
  if (static_cast<Index>(keep.size()) == k) return k;
  keep_columns(s.Lambda, keep);
  keep_columns(s.Eta, keep);
  keep_columns(s.W, keep);
  keep_columns(s.Z, keep);
  keep_columns(s.phi, keep);
  VectorXd zeta(static_cast<Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) zeta[static_cast<Index>(c)] = s.zeta[keep[c]];
  s.zeta = zeta;
  s.recompute_tau();
  return s.n_factors();
}

// ---- sweep -------------------------------------------------------------------

SweepStats gibbs_sweep(ModelState& s, const SamplerContext& ctx, const ChainConfig& config, long sweep) {
  const auto& d = ctx.designs();
  const auto& hyper = ctx.hyper();
  const std::uint64_t seed = config.seed;
  const auto sw = static_cast<std::uint64_t>(sweep);
  const bool dependent = ctx.mode() == Mode::kDependent;
  const Index p = s.n_probes();

  if (dependent) {
    Xoshiro256 rw = substream(seed, sw, Stream::kW, 0);
    s.W = update_regression_map(s.theta_tilde, s.Lambda, rw);
    Xoshiro256 rz = substream(seed, sw, Stream::kZ, 0);
    s.Z = update_regression_map(s.gamma_tilde, s.Lambda, rz);
  }

  // Per-probe block. Each probe's updates read only shared quantities that
  // stay fixed until the block ends, so probes are independent here.
  const MatrixXd shared = s.W.transpose() * s.W + s.Z.transpose() * s.Z;
  const MatrixXd EtaT_Eta = s.Eta.transpose() * s.Eta;
  long theta_acc = 0;
  long gamma_acc = 0;
  const int nt = thread_count(config);
  (void)nt;
#pragma omp parallel for schedule(static) num_threads(nt) reduction(+ : theta_acc, gamma_acc)
  for (Index i = 0; i < p; ++i) {
    const auto ui = static_cast<std::uint64_t>(i);
    if (dependent) {
      Xoshiro256 rl = substream(seed, sw, Stream::kLambda, ui);
      s.Lambda.row(i) = update_lambda_row_fast(s, ctx, i, shared, EtaT_Eta, rl).transpose();
    }
    Xoshiro256 rt = substream(seed, sw, Stream::kThetaMH, ui);
    theta_acc += update_theta_tilde_mh(s, ctx, i, rt).accepted ? 1 : 0;
    Xoshiro256 rg = substream(seed, sw, Stream::kGammaMH, ui);
    gamma_acc += update_gamma_tilde_mh(s, ctx, i, rg).accepted ? 1 : 0;
    if (config.zero_thresholds) continue;
    Xoshiro256 rvt = substream(seed, sw, Stream::kThetaThreshold, ui);
    theta_thresholds_for_probe(s, ctx, i, rvt);
    Xoshiro256 rvg = substream(seed, sw, Stream::kGammaThreshold, ui);
    gamma_thresholds_for_probe(s, ctx, i, rvg);
  }

  if (!config.zero_thresholds) {
    Xoshiro256 rb = substream(seed, sw, Stream::kBounds, 0);
    update_pareto_bounds(s, hyper, rb);
  }

#pragma omp parallel for schedule(static) num_threads(nt)
  for (Index i = 0; i < p; ++i) {
    Xoshiro256 rs = substream(seed, sw, Stream::kSigma, static_cast<std::uint64_t>(i));
    s.sigma2[i] = 1.0 / update_sigma_precision(full_residual(s, ctx, i), hyper, rs, ctx.sigma_rate_scale);
  }

  if (dependent) {
    update_eta(s, ctx, seed, sweep);
    Xoshiro256 rm = substream(seed, sw, Stream::kMgps, 0);
    update_mgps(s, hyper, rm);
    if (config.adapt.enabled) {
      Xoshiro256 ra = substream(seed, sw, Stream::kAdapt, 0);
      adapt_rank(s, ctx, sweep, config.adapt, ra);
    }
  }
  (void)d;
  return SweepStats{theta_acc, gamma_acc, p};
}

// ---- state construction ------------------------------------------------------------

namespace {

void finish_coefficients(ModelState& s, const HyperParams& hyper, Xoshiro256& rng, bool draw_bounds) {
  const Index p = s.theta_tilde.rows();
  if (draw_bounds) {
    s.K_theta = ParetoDist(hyper.a_theta, hyper.b_theta).sample(rng);
    s.K_gamma = ParetoDist(hyper.a_gamma, hyper.b_gamma).sample(rng);
  }
  for (Index i = 0; i < p; ++i) {
    for (Index m = 0; m < s.varpi.cols(); ++m) s.varpi(i, m) = s.K_theta * uniform_open(rng);
    for (Index l = 0; l < s.varpi_star.cols(); ++l) s.varpi_star(i, l) = s.K_gamma * uniform_open(rng);
  }
  s.theta = apply_theta_thresholds(s.theta_tilde, s.varpi);
  s.gamma = apply_gamma_thresholds(s.gamma_tilde, s.varpi_star);
}

void allocate(ModelState& s, const Dimensions& dims) {
  s.theta_tilde = MatrixXd::Zero(dims.p, dims.n_fourier);
  s.theta = MatrixXd::Zero(dims.p, dims.n_fourier);
  s.varpi = MatrixXd::Zero(dims.p, dims.n_fourier / 2);
  s.gamma_tilde = MatrixXd::Zero(dims.p, dims.n_local);
  s.gamma = MatrixXd::Zero(dims.p, dims.n_local);
  s.varpi_star = MatrixXd::Zero(dims.p, dims.n_local);
  s.Lambda = MatrixXd::Zero(dims.p, dims.k);
  s.Eta = MatrixXd::Zero(dims.T, dims.k);
  s.phi = MatrixXd::Ones(dims.p, dims.k);
  s.zeta = VectorXd::Ones(dims.k);
  s.tau = VectorXd::Ones(dims.k);
  s.W = MatrixXd::Zero(dims.n_fourier, dims.k);
  s.Z = MatrixXd::Zero(dims.n_local, dims.k);
  s.sigma2 = VectorXd::Ones(dims.p);
}

}  // namespace

ModelState draw_from_prior(const Dimensions& dims, const HyperParams& hyper, Mode mode, Xoshiro256& rng) {
  hyper.validate();
  ModelState s;
  allocate(s, dims);
  if (mode == Mode::kDependent) {
    MgpsDraw mg = mgps_prior_draw(dims.p, dims.k, hyper.rho, hyper.a1, hyper.a2, rng);
    s.Lambda = mg.Lambda;
    s.phi = mg.phi;
    s.zeta = mg.zeta;
    s.tau = mg.tau;
    for (Index j = 0; j < dims.T; ++j)
      for (Index h = 0; h < dims.k; ++h) s.Eta(j, h) = normal(rng);
    for (Index r = 0; r < dims.n_fourier; ++r)
      for (Index h = 0; h < dims.k; ++h) s.W(r, h) = normal(rng);
    for (Index r = 0; r < dims.n_local; ++r)
      for (Index h = 0; h < dims.k; ++h) s.Z(r, h) = normal(rng);
  }
  for (Index i = 0; i < dims.p; ++i) {
    const VectorXd lambda = s.Lambda.row(i).transpose();
    s.theta_tilde.row(i) = (s.W * lambda + normal_vector(rng, dims.n_fourier)).transpose();
    s.gamma_tilde.row(i) = (s.Z * lambda + normal_vector(rng, dims.n_local)).transpose();
  }
  finish_coefficients(s, hyper, rng, true);
  for (Index i = 0; i < dims.p; ++i) s.sigma2[i] = 1.0 / gamma_rate(rng, hyper.a_sigma, hyper.b_sigma);
  return s;
}

ModelState initial_state(const SamplerContext& ctx, const ChainConfig& config) {
  const auto& d = ctx.designs();
  const auto& hyper = ctx.hyper();
  const Dimensions dims{ctx.y().rows(), d.n_time(), d.n_fourier(), d.n_local(), hyper.k_init};
  Xoshiro256 rng = substream(config.seed, 0, Stream::kInit, 0);
  ModelState s;
  allocate(s, dims);
  if (ctx.mode() == Mode::kDependent) {
    const MgpsDraw mg = mgps_prior_draw(dims.p, dims.k, hyper.rho, hyper.a1, hyper.a2, rng);
    s.phi = mg.phi;
    s.zeta = mg.zeta;
    s.tau = mg.tau;
    for (Index j = 0; j < dims.T; ++j)
      for (Index h = 0; h < dims.k; ++h) s.Eta(j, h) = normal(rng);
  }
  s.K_theta = hyper.b_theta;
  s.K_gamma = hyper.b_gamma;
  finish_coefficients(s, hyper, rng, false);
  if (config.zero_thresholds) {
    s.varpi.setZero();
    s.varpi_star.setZero();
    s.theta = s.theta_tilde;
    s.gamma = s.gamma_tilde;
  }
  for (Index i = 0; i < dims.p; ++i) {
    const auto row = ctx.y().row(i);
    const double var = (row.array() - row.mean()).square().sum() / std::max<Index>(1, row.size() - 1);
    s.sigma2[i] = var > 0 ? var : 1.0;
  }
  return s;
}

MatrixXd simulate_data(const ModelState& s, const DesignPair<double>& designs, Xoshiro256& rng) {
  MatrixXd y = fitted_mean(s, designs);
  for (Index j = 0; j < y.cols(); ++j)
    for (Index i = 0; i < y.rows(); ++i) y(i, j) += std::sqrt(s.sigma2[i]) * normal(rng);
  return y;
}

// ---- chain driver -------------------------------------------------------------

std::uint64_t run_hash(const ExpressionMatrix& data, const DesignPair<double>& designs, const HyperParams& hyper,
                       const ChainConfig& config, Mode mode) {
  bin::Fnv1a h;
  h.update_value<std::int64_t>(data.values.rows());
  h.update_value<std::int64_t>(data.values.cols());
  h.update(data.values.data(), static_cast<std::size_t>(data.values.size()) * sizeof(double));
  for (const auto& id : data.probe_ids) h.update_string(id);
  h.update(designs.B.data(), static_cast<std::size_t>(designs.B.size()) * sizeof(double));
  h.update(designs.C.data(), static_cast<std::size_t>(designs.C.size()) * sizeof(double));
  for (const double v : {hyper.a_sigma, hyper.b_sigma, hyper.rho, hyper.a1, hyper.a2, hyper.a_theta, hyper.b_theta,
                         hyper.a_gamma, hyper.b_gamma}) {
    h.update_value(v);
  }
  h.update_value<std::int64_t>(hyper.k_init);
  h.update_value<std::int64_t>(config.n_iter);
  h.update_value<std::int64_t>(config.burn_in);
  h.update_value<std::int64_t>(config.thin);
  h.update_value(config.seed);
  h.update_value<std::int64_t>(config.record_lambda_every);
  h.update_value<std::int64_t>(config.adapt.enabled ? 1 : 0);
  for (const double v : {config.adapt.c0, config.adapt.c1, config.adapt.epsilon}) h.update_value(v);
  h.update_value<std::int64_t>(config.adapt.start);
  h.update_value<std::int64_t>(config.adapt.min_k);
  h.update_value<std::int64_t>(config.adapt.max_k);
  h.update_value<std::int64_t>(config.zero_thresholds ? 1 : 0);
  h.update_string(to_string(mode));
  return h.digest();
}

ChainRunner::ChainRunner(const ExpressionMatrix& data, const DesignPair<double>& designs, const HyperParams& hyper,
                         const ChainConfig& config, Mode mode, std::vector<double> periods)
    : data_(&data),
      designs_(&designs),
      hyper_(hyper),
      config_(config),
      mode_(mode),
      ctx_(data.values, designs, hyper, mode) {
  config_.validate();
  require(static_cast<Index>(periods.size()) == designs.n_periods(), "period list does not match the Fourier design");
  state_ = initial_state(ctx_, config_);
  archive_.p = data.n_probes();
  archive_.q = designs.n_periods();
  archive_.n_local = designs.n_local();
  archive_.T = designs.n_time();
  archive_.mode = to_string(mode);
  archive_.periods = std::move(periods);
  archive_.probe_ids = data.probe_ids;
  archive_.time_hours.assign(data.grid.hours.data(), data.grid.hours.data() + data.grid.hours.size());
  archive_.factor_sum = MatrixXd::Zero(archive_.p, archive_.T);
  archive_.factor_sq_sum = MatrixXd::Zero(archive_.p, archive_.T);
  archive_.fitted_sum = MatrixXd::Zero(archive_.p, archive_.T);
  hash_ = run_hash(data, designs, hyper, config_, mode);
}

void ChainRunner::set_checkpointing(std::string path, long every) {
  checkpoint_path_ = std::move(path);
  checkpoint_every_ = every;
}

void ChainRunner::record(const SweepStats& stats) {
  const long after = sweep_ - config_.burn_in;
  if (after <= 0 || after % config_.thin != 0) return;
  if (static_cast<long>(archive_.n_samples) >= config_.retained()) return;
  const double p = static_cast<double>(std::max<long>(1, stats.probes));
  const std::uint64_t sample = archive_.n_samples;
  archive_.append(state_.theta, state_.gamma, state_.sigma2, state_.n_factors(), state_.K_theta, state_.K_gamma,
                  static_cast<double>(stats.theta_accepted) / p, static_cast<double>(stats.gamma_accepted) / p);
  if (sample % static_cast<std::uint64_t>(config_.record_lambda_every) == 0) {
    archive_.snapshots.push_back(FactorSnapshot{sample, state_.Lambda, state_.Eta});
  }
  const MatrixXd factor = state_.Lambda * state_.Eta.transpose();
  archive_.factor_sum += factor;
  archive_.factor_sq_sum += factor.array().square().matrix();
  archive_.fitted_sum += fitted_mean(state_, *designs_);
}

void ChainRunner::run_until(long last_sweep, const ProgressFn& progress, long progress_every) {
  last_sweep = std::min(last_sweep, config_.n_iter);
  while (sweep_ < last_sweep) {
    ++sweep_;
    const SweepStats stats = gibbs_sweep(state_, ctx_, config_, sweep_);
    if (!state_.theta_tilde.allFinite() || !state_.sigma2.allFinite() || !state_.Lambda.allFinite()) {
      throw NumericalFailure("nonfinite state at sweep " + std::to_string(sweep_));
    }
    record(stats);
    if (progress && progress_every > 0 && (sweep_ % progress_every == 0 || sweep_ == config_.n_iter)) {
      const double p = static_cast<double>(std::max<long>(1, stats.probes));
      progress(ProgressReport{sweep_, config_.n_iter, static_cast<double>(stats.theta_accepted) / p,
                              static_cast<double>(stats.gamma_accepted) / p, state_.n_factors()});
    }
    if (!checkpoint_path_.empty() && checkpoint_every_ > 0 && sweep_ % checkpoint_every_ == 0) {
      save_checkpoint(checkpoint_path_);
    }
  }
}

namespace {

constexpr char kCheckpointMagic[8] = {'R', 'H', 'Y', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_state(std::ostream& os, const ModelState& s) {
  for (const MatrixXd* m : {&s.theta_tilde, &s.theta, &s.varpi, &s.gamma_tilde, &s.gamma, &s.varpi_star, &s.Lambda,
                            &s.Eta, &s.phi, &s.W, &s.Z}) {
    bin::put_matrix(os, *m);
  }
  bin::put_matrix(os, s.zeta);
  bin::put_matrix(os, s.tau);
  bin::put_matrix(os, s.sigma2);
  bin::put(os, s.K_theta);
  bin::put(os, s.K_gamma);
}

ModelState read_state(std::istream& is) {
  ModelState s;
  for (MatrixXd* m : {&s.theta_tilde, &s.theta, &s.varpi, &s.gamma_tilde, &s.gamma, &s.varpi_star, &s.Lambda,
                      &s.Eta, &s.phi, &s.W, &s.Z}) {
    *m = bin::get_matrix(is);
  }
  s.zeta = bin::get_column(is);
  s.tau = bin::get_column(is);
  s.sigma2 = bin::get_column(is);
  s.K_theta = bin::get<double>(is);
  s.K_gamma = bin::get<double>(is);
  return s;
}

}  // namespace

void ChainRunner::save_checkpoint(const std::string& path) const {
  std::ostringstream os(std::ios::binary);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  bin::put(os, kCheckpointVersion);
  bin::put(os, hash_);
  bin::put<std::int64_t>(os, sweep_);
  // Substreams are keyed by sweep, so the sweep counter is the whole RNG position.
  write_state(os, state_);
  archive_.serialize(os);
  bin::write_atomically(path, os.str());
}

ChainRunner ChainRunner::resume(const std::string& checkpoint_path, const ExpressionMatrix& data,
                                const DesignPair<double>& designs, const HyperParams& hyper,
                                const ChainConfig& config, Mode mode, std::vector<double> periods) {
  ChainRunner runner(data, designs, hyper, config, mode, std::move(periods));
  std::istringstream is(bin::read_file(checkpoint_path), std::ios::binary);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::string(magic, 8) != std::string(kCheckpointMagic, 8)) {
    throw InvalidInput(checkpoint_path + " is not a checkpoint file");
  }
  const auto version = bin::get<std::uint32_t>(is);
  if (version != kCheckpointVersion) throw ResumeMismatch("unsupported checkpoint version " + std::to_string(version));
  const auto hash = bin::get<std::uint64_t>(is);
  if (hash != runner.hash_) {
    throw ResumeMismatch("checkpoint was written by a run with different data or configuration");
  }
  runner.sweep_ = bin::get<std::int64_t>(is);
  runner.state_ = read_state(is);
  runner.archive_ = PosteriorArchive::deserialize(is);
  return runner;
}

PosteriorArchive run_chain(const ExpressionMatrix& data, const DesignPair<double>& designs, const HyperParams& hyper,
                           const ChainConfig& config, Mode mode, std::vector<double> periods) {
  ChainRunner runner(data, designs, hyper, config, mode, std::move(periods));
  runner.run();
  return runner.take_archive();
}

}  // namespace rhythm

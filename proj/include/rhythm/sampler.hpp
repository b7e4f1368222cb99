#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "rhythm/archive.hpp"
#include "rhythm/basis.hpp"
#include "rhythm/model_state.hpp"
#include "rhythm/rng.hpp"

namespace rhythm {

enum class Mode { kDependent, kIndependent };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

/// Rank adaptation for the shrinkage prior: at sweep t >= start, adapt with
/// probability exp(c0 + c1 t).
struct AdaptSchedule {
  bool enabled = true;
  double c0 = -1.0;
  double c1 = -5e-4;
  int start = 500;
  double epsilon = 1e-4;
  int min_k = 1;
  int max_k = 50;

  double probability(long sweep) const;
};

struct ChainConfig {
  long n_iter = 50000;
  long burn_in = 20000;
  long thin = 5;
  std::uint64_t seed = 0;
  AdaptSchedule adapt;
  /// Factor snapshots are kept for every n-th retained sample.
  long record_lambda_every = 10;
  /// 0 lets OpenMP pick; results are identical for any value.
  int n_threads = 0;
  /// Degenerate chain with every threshold pinned at 0 (no shrinkage).
  bool zero_thresholds = false;

  void validate() const;
  long retained() const { return (n_iter - burn_in) / thin; }
};

/// Read-only inputs shared by every update in a sweep.
class SamplerContext {
 public:
  SamplerContext(const MatrixXd& y, const DesignPair<double>& designs, const HyperParams& hyper, Mode mode);

  const MatrixXd& y() const { return *y_; }
  const DesignPair<double>& designs() const { return *designs_; }
  const HyperParams& hyper() const { return hyper_; }
  Mode mode() const { return mode_; }

  // B^T B = QB diag(dB) QB^T, likewise for C; the MH proposals reuse them.
  const MatrixXd& QB() const { return QB_; }
  const VectorXd& dB() const { return dB_; }
  const MatrixXd& QC() const { return QC_; }
  const VectorXd& dC() const { return dC_; }

  /// Multiplies the rate of the sigma update. Only the joint-distribution
  /// test changes it, to confirm that a broken conditional is detected.
  double sigma_rate_scale = 1.0;

 private:
  const MatrixXd* y_;
  const DesignPair<double>* designs_;
  HyperParams hyper_;
  Mode mode_;
  MatrixXd QB_, QC_;
  VectorXd dB_, dC_;
};

/// Gaussian full conditional in information form: precision and P^{-1} b.
struct GaussianConditional {
  MatrixXd precision;
  VectorXd mean;
  MatrixXd covariance() const;
};

// ---- individual conditional updates -------------------------------------

/// Rows of W (or Z): N((L^T L + I)^{-1} L^T x_l, (L^T L + I)^{-1}) for each
/// column x_l of the latent matrix.
MatrixXd regression_map_posterior_mean(const MatrixXd& latent, const MatrixXd& Lambda);
MatrixXd regression_map_precision(const MatrixXd& Lambda);
MatrixXd update_regression_map(const MatrixXd& latent, const MatrixXd& Lambda, Xoshiro256& rng);

/// Full conditional of lambda_i.
GaussianConditional lambda_row_conditional(const ModelState& s, const SamplerContext& ctx, Index i);
VectorXd update_lambda_row(const ModelState& s, const SamplerContext& ctx, Index i, Xoshiro256& rng);

struct MhOutcome {
  bool accepted = false;
  /// log of the acceptance ratio; +inf marks the exact-cancellation case.
  double log_ratio = 0.0;
};

/// Independence MH step for theta_tilde_i with proposal from the
/// un-thresholded model. Updates theta_tilde and theta rows in place.
MhOutcome update_theta_tilde_mh(ModelState& s, const SamplerContext& ctx, Index i, Xoshiro256& rng);
MhOutcome update_gamma_tilde_mh(ModelState& s, const SamplerContext& ctx, Index i, Xoshiro256& rng);

/// Probability that the threshold falls below the current latent norm.
double theta_threshold_pi_star(const ModelState& s, const SamplerContext& ctx, Index i, Index m);
double gamma_threshold_pi_star(const ModelState& s, const SamplerContext& ctx, Index i, Index l);
void update_theta_threshold(ModelState& s, const SamplerContext& ctx, Index i, Index m, Xoshiro256& rng);
void update_gamma_threshold(ModelState& s, const SamplerContext& ctx, Index i, Index l, Xoshiro256& rng);

/// Conjugate Pareto draws for K_theta and K_gamma.
void update_pareto_bounds(ModelState& s, const HyperParams& hyper, Xoshiro256& rng);

/// Residual precision sigma_i^{-2} ~ Ga(a + T/2, b + |r|^2 / 2).
double update_sigma_precision(const VectorXd& residual, const HyperParams& hyper, Xoshiro256& rng,
                              double rate_scale = 1.0);

/// Full conditional of eta_j given the column residual y^(j) - Theta b_j - Gamma c_j.
GaussianConditional eta_conditional(const VectorXd& column_residual, const MatrixXd& Lambda,
                                    const VectorXd& sigma2);
void update_eta(ModelState& s, const SamplerContext& ctx, std::uint64_t seed, long sweep);

void update_phi(ModelState& s, const HyperParams& hyper, Xoshiro256& rng);
/// Single zeta_h draw; tau is recomputed.
void update_zeta(ModelState& s, const HyperParams& hyper, Index h, Xoshiro256& rng);
/// phi then zeta (in column order), with tau recomputed after each zeta.
void update_mgps(ModelState& s, const HyperParams& hyper, Xoshiro256& rng);
/// Rate of the zeta_h conditional given the current state.
double zeta_rate(const ModelState& s, Index h);
double zeta_shape(const ModelState& s, const HyperParams& hyper, Index h);

/// Drop all-shrunk loading columns or append one; returns the new rank.
Index adapt_rank(ModelState& s, const SamplerContext& ctx, long sweep, const AdaptSchedule& schedule,
                 Xoshiro256& rng);

struct SweepStats {
  long theta_accepted = 0;
  long gamma_accepted = 0;
  long probes = 0;
};

/// One full scan: W, Z, {lambda_i}, {theta_tilde_i}, {gamma_tilde_i},
/// {varpi}, {varpi*}, K_theta, K_gamma, {sigma_i}, {eta_j}, MGPS, adaptation.
SweepStats gibbs_sweep(ModelState& s, const SamplerContext& ctx, const ChainConfig& config, long sweep);

// ---- state construction --------------------------------------------------

struct Dimensions {
  Index p = 0;
  Index T = 0;
  Index n_fourier = 0;
  Index n_local = 0;
  Index k = 1;
};

/// Starting state for a chain.
ModelState initial_state(const SamplerContext& ctx, const ChainConfig& config);

/// Joint prior draw of every parameter (fixed rank k).
ModelState draw_from_prior(const Dimensions& dims, const HyperParams& hyper, Mode mode, Xoshiro256& rng);

/// y_i ~ N(B theta_i + C gamma_i + eta lambda_i, sigma_i^2 I).
MatrixXd simulate_data(const ModelState& s, const DesignPair<double>& designs, Xoshiro256& rng);

// ---- chain driver --------------------------------------------------------

struct ProgressReport {
  long sweep;
  long n_iter;
  double theta_accept_rate;
  double gamma_accept_rate;
  Index k;
};
using ProgressFn = std::function<void(const ProgressReport&)>;

/// Drives one chain, records the archive and writes checkpoints.
class ChainRunner {
 public:
  ChainRunner(const ExpressionMatrix& data, const DesignPair<double>& designs, const HyperParams& hyper,
              const ChainConfig& config, Mode mode, std::vector<double> periods);

  /// Continue from a checkpoint written by an identical run.
  static ChainRunner resume(const std::string& checkpoint_path, const ExpressionMatrix& data,
                            const DesignPair<double>& designs, const HyperParams& hyper,
                            const ChainConfig& config, Mode mode, std::vector<double> periods);

  /// Run sweeps until `last_sweep` (inclusive, capped at n_iter).
  void run_until(long last_sweep, const ProgressFn& progress = {}, long progress_every = 0);
  void run(const ProgressFn& progress = {}, long progress_every = 0) { run_until(config_.n_iter, progress, progress_every); }

  void save_checkpoint(const std::string& path) const;
  /// Write a checkpoint every `every` sweeps while running.
  void set_checkpointing(std::string path, long every);

  long completed_sweeps() const { return sweep_; }
  bool finished() const { return sweep_ >= config_.n_iter; }
  const ModelState& state() const { return state_; }
  const PosteriorArchive& archive() const { return archive_; }
  PosteriorArchive take_archive() { return std::move(archive_); }
  std::uint64_t config_hash() const { return hash_; }

 private:
  void record(const SweepStats& stats);

  const ExpressionMatrix* data_;
  const DesignPair<double>* designs_;
  HyperParams hyper_;
  ChainConfig config_;
  Mode mode_;
  SamplerContext ctx_;
  ModelState state_;
  PosteriorArchive archive_;
  long sweep_ = 0;
  std::uint64_t hash_ = 0;
  std::string checkpoint_path_;
  long checkpoint_every_ = 0;
};

/// Hash of everything that determines a chain: data, designs, hyperparameters, config and mode.
std::uint64_t run_hash(const ExpressionMatrix& data, const DesignPair<double>& designs, const HyperParams& hyper,
                       const ChainConfig& config, Mode mode);

PosteriorArchive run_chain(const ExpressionMatrix& data, const DesignPair<double>& designs,
                           const HyperParams& hyper, const ChainConfig& config, Mode mode,
                           std::vector<double> periods);

}  // namespace rhythm

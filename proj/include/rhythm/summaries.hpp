#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rhythm/archive.hpp"

namespace rhythm {

/// Fraction of samples in which `target` is the only active period pair.
/// Default target is the last pair (24 h under the usual ordering).
double prob_circadian(const PosteriorArchive& a, std::int64_t i, std::optional<std::int64_t> target = {});

/// Fraction of samples with exactly one active pair, whichever it is.
double prob_periodic(const PosteriorArchive& a, std::int64_t i);

/// Entry m: fraction of samples in which period m alone is active.
std::vector<double> prob_per_period(const PosteriorArchive& a, std::int64_t i);

/// Fraction of samples with pair m shrunk to zero.
double prob_pair_zero(const PosteriorArchive& a, std::int64_t i, std::int64_t m);

struct RhythmScore {
  std::string probe_id;
  double prob_periodic = 0;
  std::vector<double> prob_per_period;
  double prob_circadian = 0;
  double beta = 1;  // 1 - prob_circadian
};

std::vector<RhythmScore> rhythm_scores(const PosteriorArchive& a, std::optional<std::int64_t> target = {});

struct AmplitudePhase {
  double amplitude = 0;
  /// atan(theta_sin / theta_cos), in (-pi/2, pi/2]. Absent for the zero pair.
  std::optional<double> phase;
  /// atan2(theta_sin, theta_cos), in (-pi, pi].
  std::optional<double> phase_quadrant;
};

/// Pair (sin, cos) of A cos(2 pi t / w - psi) = A sin(psi) sin(.) + A cos(psi) cos(.).
AmplitudePhase amplitude_phase(double theta_sin, double theta_cos);
Eigen::Vector2d pair_from_amplitude_phase(double amplitude, double psi);

struct Quantiles {
  double lo = 0, mid = 0, hi = 0;
  std::size_t n = 0;  // draws used; 0 when the pair was never active
};

/// Linear-interpolation sample quantile (type 7). Sorts a copy.
double sample_quantile(std::vector<double> v, double prob);
Quantiles quantiles(const std::vector<double>& v, double lo = 0.025, double mid = 0.5, double hi = 0.975);

struct PairPosterior {
  double zero_fraction = 1;
  Quantiles amplitude;
  Quantiles phase;
  Quantiles phase_quadrant;
};

/// Amplitude and phase quantiles over the samples where pair (i, m) is active.
std::vector<PairPosterior> pair_posteriors(const PosteriorArchive& a, std::int64_t m);

struct DiscoveryList {
  double k_star = 0;
  double kappa = 0;
  std::vector<std::size_t> selected;  // indices into the input, ascending beta
  double expected_fdr = 0;
};

/// Largest set {beta <= kappa} whose mean beta is at most k_star. Tied betas
/// enter or leave together.
DiscoveryList fdr_select(const std::vector<double>& betas, double k_star);

/// Standardized Lambda Lambda^T + diag(sigma2).
Eigen::MatrixXd correlation_from_factors(const Eigen::MatrixXd& Lambda, const Eigen::VectorXd& sigma2);

/// Posterior correlation from the factor snapshots. By default the covariance
/// is averaged over snapshots and standardized once; with `per_sample` the
/// per-snapshot correlations are averaged instead.
Eigen::MatrixXd posterior_correlation(const PosteriorArchive& a, bool per_sample = false);

struct Edge {
  std::int64_t i;
  std::int64_t j;
  double corr;
};

std::vector<Edge> correlation_edges(const Eigen::MatrixXd& corr, double threshold);

struct RocPoint {
  double threshold;
  long tp, fp;
  double tpr, fpr, fdr;
};

struct RocResult {
  std::vector<RocPoint> points;  // starts at (0, 0)
  double auc = 0;
};

/// Threshold sweep over the distinct scores, high to low; higher = more periodic.
RocResult roc_and_fdr_curves(const std::vector<double>& scores, const std::vector<bool>& truth);

// ---- CSV output ---------------------------------------------------------------

/// Per-probe table: zero fraction of each pair, probabilities, amplitude and
/// phase quantiles for the target period.
void write_summary_csv(const std::string& path, const PosteriorArchive& a, std::int64_t target);
void write_discoveries_csv(const std::string& path, const DiscoveryList& list, const std::vector<RhythmScore>& scores);
void write_edges_csv(const std::string& path, const std::vector<Edge>& edges, const std::vector<std::string>& ids);
void write_roc_csv(const std::string& path, const RocResult& roc);

}  // namespace rhythm

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rhythm/basis.hpp"
#include "rhythm/model_state.hpp"
#include "rhythm/rng.hpp"

namespace rhythm {

struct SynthConfig {
  Index p = 500;
  /// Sampling times in hours; empty means 0, 1, ..., T-1.
  std::vector<double> times_hours;
  Index T = 24;
  std::vector<double> periods{4, 6, 8, 12, 24};
  Index n_local = 10;
  KernelKind kernel = KernelKind::kGaussian;
  double bandwidth = 25;
  /// One value for every probe, or p values.
  std::vector<double> sigma2{0.5};
  Index k_true = 6;
  double loading_value_sd = 3;
  std::pair<Index, Index> loading_count_range{99, 124};
  std::pair<double, double> theta_threshold_range{0, 6};
  std::pair<double, double> gamma_threshold_range{0, 10};
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<double> resolved_times() const;
  double sigma2_of(Index i) const { return sigma2.size() == 1 ? sigma2[0] : sigma2[static_cast<std::size_t>(i)]; }
};

/// Defaults of the dependent study.
SynthConfig dependent_defaults();
/// Defaults of the independent study: no loadings, sigma^2 = 1, theta thresholds Unif(0, 5).
SynthConfig independent_defaults();

struct GroundTruth {
  std::vector<double> periods;
  Index target = 0;  // index of the circadian period
  std::vector<std::vector<Index>> active_periods;
  std::vector<bool> periodic;   // exactly one pair active
  std::vector<bool> circadian;  // only the target pair active
  MatrixXd theta_tilde, theta, varpi;
  MatrixXd gamma_tilde, gamma, varpi_star;
  MatrixXd Lambda, Eta, W, Z;
  VectorXd sigma2;
  MatrixXd mean;  // noise-free trajectories

  Index n_periodic() const;
  Index n_circadian() const;
};

/// Recompute the active sets and flags from the stored theta.
void refresh_flags(GroundTruth& truth);

struct SynthResult {
  MatrixXd y;
  std::vector<std::string> probe_ids;
  std::vector<double> times_hours;
  DesignPair<double> designs;
  GroundTruth truth;
};

SynthResult generate_dependent(const SynthConfig& config, Xoshiro256& rng);
/// Same recipe with Lambda fixed at zero whatever the loading range says.
SynthResult generate_independent(const SynthConfig& config, Xoshiro256& rng);

/// Nonzero loading count of each column: linear from low to high.
std::vector<Index> loading_counts(const SynthConfig& config);

std::string config_to_json(const SynthConfig& config);
/// Unknown fields are rejected by name; a missing seed is an error.
SynthConfig synth_config_from_json(const std::string& text);
void write_truth_json(const std::string& path, const SynthResult& r, const SynthConfig& config);

}  // namespace rhythm

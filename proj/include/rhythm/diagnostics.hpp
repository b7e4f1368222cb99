#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rhythm/model_state.hpp"
#include "rhythm/sampler.hpp"

namespace rhythm {

/// Initial positive sequence estimator. Throws on a constant trace.
double effective_sample_size(const std::vector<double>& trace);

struct GewekeConfig {
  Dimensions dims{5, 8, 4, 3, 2};  // p, T, 2q, n_local, k
  std::vector<double> periods{4, 8};
  KernelKind kernel = KernelKind::kGaussian;
  double bandwidth = 25;
  HyperParams hyper;
  Mode mode = Mode::kDependent;
  long n_outer = 20000;
  /// Successive-conditional draws are split over this many chains, each
  /// started from an exact prior draw; the standard error comes from the
  /// spread of the chain means.
  long n_chains = 200;
  std::uint64_t seed = 1;
  bool adapt = false;
  double sigma_rate_scale = 1.0;  // 1 = correct sampler

  /// Finite-moment hyperparameters suited to the test.
  static GewekeConfig tiny(Mode mode);
};

struct GewekeStat {
  std::string name;
  double marginal_mean = 0;
  double successive_mean = 0;
  double std_error = 0;
  double ess = 0;  // successive-conditional draws worth of independent ones
  double z = 0;
  bool skipped = false;  // constant under both simulators
};

struct GewekeReport {
  std::vector<GewekeStat> stats;
  double max_abs_z() const;
};

/// Scalar test functions of (state, data) compared between the two simulators.
std::vector<std::string> geweke_function_names();
std::vector<double> geweke_functions(const ModelState& s, const MatrixXd& y, const DesignPair<double>& designs);

GewekeReport geweke_joint_test(const GewekeConfig& config);

void write_geweke_csv(const std::string& path, const GewekeReport& report);

}  // namespace rhythm

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rhythm {

/// Ordinates at the Fourier frequencies j/T, j = 1..floor((T-1)/2).
struct Periodogram {
  std::vector<double> frequencies;  // cycles per sample
  std::vector<double> ordinates;
  /// Ordinate at frequency 1/2 for even T; kept out of the test but needed
  /// to close the sum-of-squares identity.
  double nyquist = 0;
  bool constant = false;

  std::size_t n_ordinates() const { return ordinates.size(); }
};

/// I(f) = |sum_t (y_t - mean) e^{-2 pi i f t}|^2 / T.
Periodogram periodogram(const Eigen::VectorXd& series);

struct GTestResult {
  double g = 0;
  double p_value = 1;
  std::size_t n_ordinates = 0;
};

/// Exact null tail P(g > x) for n iid exponential ordinates.
double fisher_g_pvalue(double x, std::size_t n);

/// Fisher's g = max I / sum I with its exact p-value.
GTestResult fisher_g_test(const Eigen::VectorXd& series);

/// Benjamini-Hochberg step-up adjustment.
std::vector<double> fdr_adjust(const std::vector<double>& p_values);

/// One score per probe plus the direction in which scores favour periodicity.
struct ScoreFile {
  std::string method;
  bool higher_is_periodic = true;
  std::vector<std::string> probe_ids;
  std::vector<double> scores;

  /// Scores oriented so that larger means more periodic.
  std::vector<double> oriented() const;
};

void write_score_file(const std::string& path, const ScoreFile& f);
ScoreFile read_score_file(const std::string& path);

}  // namespace rhythm

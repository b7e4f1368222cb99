#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "rhythm/rng.hpp"

namespace testing {

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double ss = 0;
  for (const double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

/// Mean within `z` standard errors of `target`.
inline bool mean_close(const std::vector<double>& v, double target, double z) {
  const double se = std::sqrt(variance(v) / static_cast<double>(v.size()));
  return std::abs(mean(v) - target) <= z * se;
}

/// Sample variance within `z` standard errors of `target`, using the sample
/// fourth central moment for the standard error.
inline bool variance_close(const std::vector<double>& v, double target, double z) {
  const double m = mean(v);
  double m4 = 0;
  for (const double x : v) m4 += std::pow(x - m, 4);
  m4 /= static_cast<double>(v.size());
  const double s2 = variance(v);
  const double se = std::sqrt(std::max(m4 - s2 * s2, 0.0) / static_cast<double>(v.size()));
  return std::abs(s2 - target) <= z * se;
}

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_statistic(std::vector<double> v, const std::function<double(double)>& cdf) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = cdf(v[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// Asymptotic Kolmogorov p-value with the usual small-sample correction.
inline double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0;
  for (int j = 1; j <= 100; ++j) {
    const double term = 2 * ((j % 2) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

inline Eigen::MatrixXd random_matrix(rhythm::Xoshiro256& rng, Eigen::Index r, Eigen::Index c, double scale = 1) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = scale * rhythm::normal(rng);
  return m;
}

inline Eigen::MatrixXd random_uniform(rhythm::Xoshiro256& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = lo + (hi - lo) * rhythm::uniform_open(rng);
  return m;
}

/// Integer in [lo, hi].
inline int random_int(rhythm::Xoshiro256& rng, int lo, int hi) {
  return lo + static_cast<int>(rhythm::uniform_open(rng) * (hi - lo + 1));
}

}  // namespace testing

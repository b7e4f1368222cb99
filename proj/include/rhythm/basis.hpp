#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rhythm/errors.hpp"

namespace rhythm {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Sampling times in hours together with their affine image on [0, 1].
template <typename Scalar = double>
struct TimeGrid {
  Vec<Scalar> hours;
  Vec<Scalar> unit;

  Eigen::Index size() const { return hours.size(); }
};

/// Candidate periods in hours, shortest first.
template <typename Scalar = double>
struct PeriodSet {
  std::vector<Scalar> hours;

  std::size_t size() const { return hours.size(); }
};

enum class KernelKind { kGaussian, kBspline };

inline std::string to_string(KernelKind k) {
  return k == KernelKind::kGaussian ? "gaussian" : "bspline";
}

inline KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "gaussian") return KernelKind::kGaussian;
  if (s == "bspline") return KernelKind::kBspline;
  throw InvalidInput("unknown kernel kind '" + s + "'");
}

/// Fixed periodic (B, T x 2q) and local (C, T x n_local) design matrices.
template <typename Scalar = double>
struct DesignPair {
  Mat<Scalar> B;
  Mat<Scalar> C;
  KernelKind kernel_kind = KernelKind::kGaussian;
  Scalar bandwidth{};
  /// Kernel centres for gaussian, full clamped knot vector for bspline.
  std::vector<Scalar> knots;

  Eigen::Index n_time() const { return B.rows(); }
  Eigen::Index n_fourier() const { return B.cols(); }
  Eigen::Index n_periods() const { return B.cols() / 2; }
  Eigen::Index n_local() const { return C.cols(); }
};

template <typename Scalar>
TimeGrid<Scalar> standardize_times(const Vec<Scalar>& hours) {
  require(hours.size() >= 2, "need at least two sampling times");
  for (Eigen::Index j = 0; j < hours.size(); ++j) {
    require(std::isfinite(static_cast<double>(hours[j])), "sampling times must be finite");
    if (j > 0) require(hours[j] > hours[j - 1], "sampling times must be strictly increasing");
  }
  const Scalar t0 = hours[0];
  const Scalar span = hours[hours.size() - 1] - t0;
  TimeGrid<Scalar> grid;
  grid.hours = hours;
  grid.unit = (hours.array() - t0) / span;
  grid.unit[grid.unit.size() - 1] = Scalar(1);
  return grid;
}

inline TimeGrid<double> standardize_times(const std::vector<double>& hours) {
  return standardize_times<double>(Eigen::Map<const Eigen::VectorXd>(hours.data(),
                                                                     static_cast<Eigen::Index>(hours.size())));
}

template <typename Scalar>
Scalar min_spacing(const TimeGrid<Scalar>& grid) {
  Scalar m = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index j = 1; j < grid.size(); ++j) m = std::min(m, grid.hours[j] - grid.hours[j - 1]);
  return m;
}

template <typename Scalar>
void validate_periods(const TimeGrid<Scalar>& grid, const PeriodSet<Scalar>& periods) {
  require(!periods.hours.empty(), "at least one period is required");
  const Scalar nyquist = 2 * min_spacing(grid);
  for (std::size_t m = 0; m < periods.size(); ++m) {
    if (m > 0) require(periods.hours[m] > periods.hours[m - 1], "periods must be strictly increasing");
    if (!(periods.hours[m] > nyquist)) {
      throw InvalidInput("period " + std::to_string(static_cast<double>(periods.hours[m])) +
                         " h violates the Nyquist limit of " + std::to_string(static_cast<double>(nyquist)) + " h");
    }
  }
}

/// Column 2m is sin(2 pi t / w_m), column 2m+1 is cos(2 pi t / w_m), t in hours.
template <typename Scalar>
Mat<Scalar> fourier_design(const TimeGrid<Scalar>& grid, const PeriodSet<Scalar>& periods) {
  validate_periods(grid, periods);
  const Eigen::Index q = static_cast<Eigen::Index>(periods.size());
  Mat<Scalar> B(grid.size(), 2 * q);
  const Scalar two_pi = 2 * std::numbers::pi_v<Scalar>;
  for (Eigen::Index m = 0; m < q; ++m) {
    for (Eigen::Index j = 0; j < grid.size(); ++j) {
      const Scalar arg = two_pi * grid.hours[j] / periods.hours[static_cast<std::size_t>(m)];
      B(j, 2 * m) = std::sin(arg);
      B(j, 2 * m + 1) = std::cos(arg);
    }
  }
  return B;
}

/// Cox-de Boor evaluation of every B-spline of the given order on `knots` at x.
template <typename Scalar>
Vec<Scalar> bspline_row(const std::vector<Scalar>& knots, int order, Scalar x) {
  const int n_basis = static_cast<int>(knots.size()) - order;
  const int n_span = static_cast<int>(knots.size()) - 1;
  std::vector<Scalar> b(static_cast<std::size_t>(n_span), Scalar(0));
  // Right endpoint belongs to the last non-degenerate span.
  int span = -1;
  for (int s = 0; s < n_span; ++s) {
    if (knots[s] < knots[s + 1] && x >= knots[s] && x < knots[s + 1]) span = s;
  }
  if (span < 0) {
    for (int s = n_span - 1; s >= 0; --s) {
      if (knots[s] < knots[s + 1]) {
        span = s;
        break;
      }
    }
  }
  b[static_cast<std::size_t>(span)] = 1;
  for (int d = 1; d < order; ++d) {
    for (int i = 0; i + d < n_span; ++i) {
      Scalar v = 0;
      const Scalar left = knots[i + d] - knots[i];
      const Scalar right = knots[i + d + 1] - knots[i + 1];
      if (left > 0) v += (x - knots[i]) / left * b[i];
      if (right > 0) v += (knots[i + d + 1] - x) / right * b[i + 1];
      b[i] = v;
    }
  }
  Vec<Scalar> row(n_basis);
  for (int i = 0; i < n_basis; ++i) row[i] = b[static_cast<std::size_t>(i)];
  return row;
}

inline constexpr int kBsplineOrder = 4;

/// Local design on the unit time axis: gaussian kernels exp(-psi (t - xi)^2)
/// at equally spaced centres including 0 and 1, or clamped cubic B-splines.
template <typename Scalar>
DesignPair<Scalar> local_design(const TimeGrid<Scalar>& grid, Eigen::Index n_local, KernelKind kind,
                                Scalar bandwidth) {
  require(n_local >= 1, "local basis needs at least one function");
  DesignPair<Scalar> d;
  d.kernel_kind = kind;
  d.bandwidth = bandwidth;
  d.C.resize(grid.size(), n_local);
  if (kind == KernelKind::kGaussian) {
    require(bandwidth > 0 && std::isfinite(static_cast<double>(bandwidth)), "gaussian bandwidth must be positive");
    for (Eigen::Index l = 0; l < n_local; ++l) {
      d.knots.push_back(n_local == 1 ? Scalar(0.5) : Scalar(l) / Scalar(n_local - 1));
    }
    for (Eigen::Index j = 0; j < grid.size(); ++j) {
      for (Eigen::Index l = 0; l < n_local; ++l) {
        const Scalar dist = grid.unit[j] - d.knots[static_cast<std::size_t>(l)];
        d.C(j, l) = std::exp(-bandwidth * dist * dist);
      }
    }
  } else {
    require(n_local >= kBsplineOrder, "cubic B-spline basis needs at least 4 functions");
    const Eigen::Index n_interior = n_local - kBsplineOrder;
    for (int r = 0; r < kBsplineOrder; ++r) d.knots.push_back(0);
    for (Eigen::Index s = 1; s <= n_interior; ++s) d.knots.push_back(Scalar(s) / Scalar(n_interior + 1));
    for (int r = 0; r < kBsplineOrder; ++r) d.knots.push_back(1);
    for (Eigen::Index j = 0; j < grid.size(); ++j) {
      d.C.row(j) = bspline_row(d.knots, kBsplineOrder, grid.unit[j]).transpose();
    }
  }
  return d;
}

/// Both design matrices for one experiment.
template <typename Scalar>
DesignPair<Scalar> make_designs(const TimeGrid<Scalar>& grid, const PeriodSet<Scalar>& periods,
                                Eigen::Index n_local, KernelKind kind, Scalar bandwidth) {
  DesignPair<Scalar> d = local_design(grid, n_local, kind, bandwidth);
  d.B = fourier_design(grid, periods);
  return d;
}

}  // namespace rhythm

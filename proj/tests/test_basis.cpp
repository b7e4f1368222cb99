#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "rhythm/basis.hpp"
#include "rhythm/rng.hpp"

using namespace rhythm;

namespace {

std::vector<double> hours_range(double start, double step, int n) {
  std::vector<double> h;
  for (int i = 0; i < n; ++i) h.push_back(start + step * i);
  return h;
}

}  // namespace

TEST_CASE("standardize_times maps onto the unit interval") {
  const auto g = standardize_times(hours_range(0, 2, 24));
  REQUIRE(g.size() == 24);
  for (int j = 0; j < 24; ++j) CHECK(g.unit[j] == doctest::Approx(2.0 * j / 46).epsilon(1e-15));
  CHECK(g.unit[0] == 0.0);
  CHECK(g.unit[23] == 1.0);
  CHECK(g.hours[5] == 10.0);

  const auto g13 = standardize_times(hours_range(0, 4, 13));
  for (int j = 0; j < 13; ++j) CHECK(g13.unit[j] == doctest::Approx(j / 12.0).epsilon(1e-15));
}

TEST_CASE("standardize_times rejects degenerate grids") {
  CHECK_THROWS_AS(standardize_times(std::vector<double>{5}), InvalidInput);
  CHECK_THROWS_AS(standardize_times(std::vector<double>{0, 1, 1, 2}), InvalidInput);
  CHECK_THROWS_AS(standardize_times(std::vector<double>{0, 2, 1}), InvalidInput);
}

TEST_CASE("fourier design entries") {
  const auto g = standardize_times(std::vector<double>{0, 6, 12, 18});
  const auto B = fourier_design(g, PeriodSet<double>{{24}});
  REQUIRE(B.rows() == 4);
  REQUIRE(B.cols() == 2);
  CHECK(B(0, 0) == 0.0);
  CHECK(B(0, 1) == 1.0);
  CHECK(B(1, 0) == doctest::Approx(1.0));
  CHECK(std::abs(B(1, 1)) < 1e-15);
}

TEST_CASE("fourier design column norms match direct evaluation") {
  const auto g = standardize_times(hours_range(0, 1, 24));
  const std::vector<double> periods{4, 6, 8, 12, 24};
  const auto B = fourier_design(g, PeriodSet<double>{periods});
  REQUIRE(B.cols() == 10);
  for (std::size_t m = 0; m < periods.size(); ++m) {
    double ss = 0, cc = 0;
    for (int t = 0; t < 24; ++t) {
      const double a = 2 * std::numbers::pi * t / periods[m];
      ss += std::sin(a) * std::sin(a);
      cc += std::cos(a) * std::cos(a);
    }
    CHECK(B.col(2 * m).squaredNorm() == doctest::Approx(ss).epsilon(1e-12));
    CHECK(B.col(2 * m + 1).squaredNorm() == doctest::Approx(cc).epsilon(1e-12));
  }
}

TEST_CASE("Nyquist violations are rejected") {
  const auto g = standardize_times(hours_range(0, 2, 24));
  CHECK_THROWS_AS(validate_periods(g, PeriodSet<double>{{4, 6, 8, 12, 24}}), InvalidInput);
  CHECK_NOTHROW(validate_periods(g, PeriodSet<double>{{6, 8, 12, 24}}));
  CHECK_THROWS_AS(validate_periods(g, PeriodSet<double>{{12, 8}}), InvalidInput);
}

TEST_CASE("Fourier columns repeat after one period") {
  Xoshiro256 rng(3);
  const std::vector<double> periods{4, 6, 8, 12, 24};
  for (int rep = 0; rep < 20; ++rep) {
    const double t0 = 100 * uniform_open(rng);
    const auto g = standardize_times(hours_range(t0, 1, 72));
    const auto B = fourier_design(g, PeriodSet<double>{periods});
    for (std::size_t m = 0; m < periods.size(); ++m) {
      const auto w = static_cast<Eigen::Index>(periods[m]);
      for (Eigen::Index j = 0; j + w < 72; ++j) {
        CHECK(std::abs(B(j, 2 * m) - B(j + w, 2 * m)) < 1e-9);
        CHECK(std::abs(B(j, 2 * m + 1) - B(j + w, 2 * m + 1)) < 1e-9);
      }
    }
  }
}

TEST_CASE("gaussian kernels") {
  const auto g = standardize_times(std::vector<double>{0, 0.2, 0.5, 1});
  const auto d = local_design(g, 3, KernelKind::kGaussian, 25.0);
  REQUIRE(d.C.rows() == 4);
  REQUIRE(d.C.cols() == 3);
  // centres 0, 0.5, 1
  CHECK(d.C(0, 0) == 1.0);
  CHECK(d.C(2, 1) == 1.0);
  CHECK(d.C(3, 2) == 1.0);
  CHECK(d.C(1, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(d.C.minCoeff() > 0.0);
  CHECK(d.C.maxCoeff() <= 1.0);
  CHECK_THROWS_AS(local_design(g, 3, KernelKind::kGaussian, 0.0), InvalidInput);
  CHECK_THROWS_AS(local_design(g, 0, KernelKind::kGaussian, 1.0), InvalidInput);
}

TEST_CASE("gaussian kernels depend only on unit times") {
  const auto a = local_design(standardize_times(hours_range(0, 2, 24)), 10, KernelKind::kGaussian, 25.0);
  const auto b = local_design(standardize_times(hours_range(7, 0.5, 24)), 10, KernelKind::kGaussian, 25.0);
  CHECK((a.C - b.C).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("b-splines form a partition of unity") {
  const auto g = standardize_times(hours_range(0, 1, 37));
  const auto d = local_design(g, 10, KernelKind::kBspline, 0.0);
  REQUIRE(d.C.cols() == 10);
  for (Eigen::Index j = 0; j < d.C.rows(); ++j) {
    CHECK(d.C.row(j).sum() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(d.C.row(j).minCoeff() >= 0.0);
  }
  // clamped ends
  CHECK(d.C(0, 0) == doctest::Approx(1.0));
  CHECK(d.C(36, 9) == doctest::Approx(1.0));
  CHECK_THROWS_AS(local_design(g, 3, KernelKind::kBspline, 0.0), InvalidInput);
}

TEST_CASE("designs are reproducible") {
  const auto g = standardize_times(hours_range(0, 1, 24));
  const auto a = make_designs(g, PeriodSet<double>{{4, 6, 8, 12, 24}}, 10, KernelKind::kGaussian, 25.0);
  const auto b = make_designs(g, PeriodSet<double>{{4, 6, 8, 12, 24}}, 10, KernelKind::kGaussian, 25.0);
  CHECK(a.B == b.B);
  CHECK(a.C == b.C);
}

TEST_CASE("float scalar instantiation") {
  Eigen::VectorXf h(4);
  h << 0, 1, 2, 3;
  const auto g = standardize_times<float>(h);
  const auto d = make_designs<float>(g, PeriodSet<float>{{4, 6}}, 3, KernelKind::kGaussian, 25.0f);
  CHECK(d.B.cols() == 4);
  CHECK(d.C.cols() == 3);
}

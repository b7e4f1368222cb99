#include <cmath>
#include <numbers>

#include "doctest.h"
#include "rhythm/model_state.hpp"
#include "support.hpp"

using namespace rhythm;

namespace {

DesignPair<double> small_designs(int T = 24) {
  std::vector<double> h;
  for (int t = 0; t < T; ++t) h.push_back(t);
  return make_designs(standardize_times(h), PeriodSet<double>{{8, 12, 24}}, 4, KernelKind::kGaussian, 25.0);
}

ModelState random_state(Xoshiro256& rng, Index p, Index k, const DesignPair<double>& d) {
  ModelState s;
  s.theta_tilde = testing::random_matrix(rng, p, d.n_fourier());
  s.varpi = testing::random_uniform(rng, p, d.n_periods(), 0, 2);
  s.theta = apply_theta_thresholds(s.theta_tilde, s.varpi);
  s.gamma_tilde = testing::random_matrix(rng, p, d.n_local());
  s.varpi_star = testing::random_uniform(rng, p, d.n_local(), 0, 2);
  s.gamma = apply_gamma_thresholds(s.gamma_tilde, s.varpi_star);
  s.Lambda = testing::random_matrix(rng, p, k);
  s.Eta = testing::random_matrix(rng, d.n_time(), k);
  s.phi = testing::random_uniform(rng, p, k, 0.5, 2);
  s.zeta = testing::random_uniform(rng, k, 1, 0.5, 2);
  s.recompute_tau();
  s.W = testing::random_matrix(rng, d.n_fourier(), k);
  s.Z = testing::random_matrix(rng, d.n_local(), k);
  s.sigma2 = testing::random_uniform(rng, p, 1, 0.3, 3);
  s.K_theta = 2;
  s.K_gamma = 2;
  return s;
}

}  // namespace

TEST_CASE("theta threshold boundaries") {
  Eigen::MatrixXd t(1, 2);
  t << 3, 4;
  Eigen::MatrixXd w(1, 1);
  w << 5;
  CHECK(apply_theta_thresholds(t, w) == t);
  t << 0.1, 0.1;
  w << 1;
  CHECK(apply_theta_thresholds(t, w).isZero(0));
  w << -1;
  CHECK_THROWS_AS(apply_theta_thresholds(t, w), InvalidInput);
}

TEST_CASE("gamma threshold boundaries") {
  Eigen::MatrixXd g(1, 2);
  g << 0.5, -2;
  Eigen::MatrixXd w(1, 2);
  w << 0.5, 3;
  const auto out = apply_gamma_thresholds(g, w);
  CHECK(out(0, 0) == 0.5);
  CHECK(out(0, 1) == 0.0);
}

TEST_CASE("thresholding matches a loop oracle, is idempotent and monotone") {
  Xoshiro256 rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const int p = testing::random_int(rng, 1, 8);
    const int q = testing::random_int(rng, 1, 5);
    const Eigen::MatrixXd tt = testing::random_matrix(rng, p, 2 * q);
    const Eigen::MatrixXd w = testing::random_uniform(rng, p, q, 0, 2.5);
    const Eigen::MatrixXd th = apply_theta_thresholds(tt, w);
    for (int i = 0; i < p; ++i) {
      for (int m = 0; m < q; ++m) {
        const double norm = std::sqrt(tt(i, 2 * m) * tt(i, 2 * m) + tt(i, 2 * m + 1) * tt(i, 2 * m + 1));
        const bool keep = norm >= w(i, m);
        CHECK(th(i, 2 * m) == (keep ? tt(i, 2 * m) : 0.0));
        CHECK(th(i, 2 * m + 1) == (keep ? tt(i, 2 * m + 1) : 0.0));
        // pairs are zeroed jointly
        CHECK((th(i, 2 * m) == 0.0) == (th(i, 2 * m + 1) == 0.0));
      }
    }
    CHECK(apply_theta_thresholds(th, w) == th);
    const Eigen::MatrixXd raised = w.array() + testing::random_uniform(rng, p, q, 0, 1).array();
    const Eigen::MatrixXd th2 = apply_theta_thresholds(tt, raised);
    for (int i = 0; i < p; ++i)
      for (int c = 0; c < 2 * q; ++c)
        if (th(i, c) == 0.0) CHECK(th2(i, c) == 0.0);

    const Eigen::MatrixXd gt = testing::random_matrix(rng, p, q);
    const Eigen::MatrixXd gw = testing::random_uniform(rng, p, q, 0, 2);
    const Eigen::MatrixXd g = apply_gamma_thresholds(gt, gw);
    for (int i = 0; i < p; ++i)
      for (int l = 0; l < q; ++l) CHECK(g(i, l) == (std::abs(gt(i, l)) >= gw(i, l) ? gt(i, l) : 0.0));
    CHECK(apply_gamma_thresholds(g, gw) == g);
  }
}

TEST_CASE("fitted mean") {
  const auto d = small_designs();
  Xoshiro256 rng(5);
  SUBCASE("zero state") {
    ModelState s = random_state(rng, 3, 2, d);
    s.theta.setZero();
    s.gamma.setZero();
    s.Lambda.setZero();
    CHECK(fitted_mean(s, d).isZero(0));
  }
  SUBCASE("single pure cosine") {
    ModelState s = random_state(rng, 2, 2, d);
    s.theta.setZero();
    s.gamma.setZero();
    s.Lambda.setZero();
    s.theta(1, 5) = 2.5;  // cos column of the 24 h pair
    const auto mu = fitted_mean(s, d);
    for (int t = 0; t < 24; ++t) {
      CHECK(mu(0, t) == 0.0);
      CHECK(mu(1, t) == doctest::Approx(2.5 * std::cos(2 * std::numbers::pi * t / 24)));
    }
  }
  SUBCASE("triple loop oracle") {
    for (int rep = 0; rep < 10; ++rep) {
      const ModelState s = random_state(rng, 5, 3, d);
      const auto mu = fitted_mean(s, d);
      for (Index i = 0; i < 5; ++i) {
        for (Index t = 0; t < 24; ++t) {
          double v = 0;
          for (Index c = 0; c < d.B.cols(); ++c) v += d.B(t, c) * s.theta(i, c);
          for (Index c = 0; c < d.C.cols(); ++c) v += d.C(t, c) * s.gamma(i, c);
          for (Index h = 0; h < 3; ++h) v += s.Eta(t, h) * s.Lambda(i, h);
          CHECK(std::abs(mu(i, t) - v) < 1e-10);
        }
      }
    }
  }
  SUBCASE("rank mismatch") {
    ModelState s = random_state(rng, 2, 2, d);
    s.Eta = Eigen::MatrixXd::Zero(24, 3);
    CHECK_THROWS(fitted_mean(s, d));
  }
}

TEST_CASE("log likelihood") {
  const auto d = small_designs();
  Xoshiro256 rng(8);
  ModelState s = random_state(rng, 4, 2, d);
  SUBCASE("at the mode") {
    s.sigma2.setOnes();
    const Eigen::MatrixXd y = fitted_mean(s, d);
    CHECK(log_likelihood(s, y, d) == doctest::Approx(-0.5 * 4 * 24 * std::log(2 * std::numbers::pi)));
  }
  SUBCASE("single cell") {
    CHECK(gaussian_row_loglik(1.0, 1.0, 1) == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi) - 0.5));
  }
  SUBCASE("scalar density oracle") {
    const Eigen::MatrixXd y = fitted_mean(s, d) + testing::random_matrix(rng, 4, 24);
    const auto mu = fitted_mean(s, d);
    double ll = 0;
    for (Index i = 0; i < 4; ++i)
      for (Index t = 0; t < 24; ++t) {
        const double z = (y(i, t) - mu(i, t)) / std::sqrt(s.sigma2[i]);
        ll += -0.5 * z * z - 0.5 * std::log(2 * std::numbers::pi * s.sigma2[i]);
      }
    CHECK(std::abs(log_likelihood(s, y, d) - ll) < 1e-10);
  }
  SUBCASE("moving sigma2 away from the residual MLE lowers the likelihood") {
    const Eigen::MatrixXd y = fitted_mean(s, d) + testing::random_matrix(rng, 4, 24);
    const auto mu = fitted_mean(s, d);
    for (Index i = 0; i < 4; ++i) s.sigma2[i] = (y.row(i) - mu.row(i)).squaredNorm() / 24;
    double prev = log_likelihood(s, y, d);
    const double mle = s.sigma2[2];
    for (const double f : {1.5, 2.0, 4.0, 10.0}) {
      s.sigma2[2] = mle * f;
      const double ll = log_likelihood(s, y, d);
      CHECK(ll < prev);
      prev = ll;
    }
    prev = -INFINITY;
    for (const double f : {0.05, 0.2, 0.5, 0.9}) {
      s.sigma2[2] = mle * f;
      const double ll = log_likelihood(s, y, d);
      CHECK(ll > prev);
      prev = ll;
    }
  }
  SUBCASE("nonfinite parameters are rejected") {
    const Eigen::MatrixXd y = fitted_mean(s, d);
    s.theta(0, 0) = NAN;
    CHECK_THROWS_AS(log_likelihood(s, y, d), NumericalFailure);
  }
}

TEST_CASE("center_rows removes row means") {
  Xoshiro256 rng(2);
  const Eigen::MatrixXd v = testing::random_matrix(rng, 6, 24).array() + 7.0;
  std::vector<double> h;
  for (int t = 0; t < 24; ++t) h.push_back(t);
  const auto e = center_rows(v, std::vector<std::string>(6, "x"), standardize_times(h));
  CHECK(e.values.rowwise().mean().cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("invariant checker") {
  const auto d = small_designs();
  Xoshiro256 rng(9);
  ModelState s = random_state(rng, 4, 3, d);
  CHECK_NOTHROW(s.check_invariants());
  ModelState bad = s;
  bad.tau[1] *= 2;
  CHECK_THROWS_AS(bad.check_invariants(), NumericalFailure);
  bad = s;
  bad.varpi(0, 0) = 5;
  CHECK_THROWS_AS(bad.check_invariants(), NumericalFailure);
  bad = s;
  bad.theta(0, 0) = 0.123;
  bad.theta(0, 1) = 0;
  bad.theta_tilde(0, 0) = 0.0;
  bad.theta_tilde(0, 1) = 0.0;
  bad.varpi(0, 0) = 1;
  CHECK_THROWS_AS(bad.check_invariants(), NumericalFailure);
}

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "rhythm/priors.hpp"
#include "support.hpp"

using namespace rhythm;

namespace {

// (1/K) int_0^K 2 (1 - Phi(w)) dw from the antiderivative w Phi(w) + phi(w).
double nonshrink_closed_form(double K) {
  return (2 * K - 2 * (K * normal_cdf(K) + normal_pdf(K) - normal_pdf(0))) / K;
}

}  // namespace

TEST_CASE("non-shrinkage probability against the closed form") {
  for (const double K : {1e-6, 0.01, 0.3, 1.0, 2.5, 5.0, 10.0, 37.0, 80.0, 1e4}) {
    CHECK(std::abs(prob_nonshrink_given_K(K) - nonshrink_closed_form(K)) < 1e-8);
  }
  CHECK(prob_nonshrink_given_K(1e-9) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(prob_nonshrink_given_K(1e8) < 1e-7);
  CHECK_THROWS_AS(prob_nonshrink_given_K(0.0), InvalidInput);
  CHECK_THROWS_AS(prob_nonshrink_given_K(-1.0), InvalidInput);
}

TEST_CASE("non-shrinkage probability at K = 1 against Monte Carlo") {
  Xoshiro256 rng(101);
  std::vector<double> v(1000000);
  for (auto& x : v) x = std::erfc(uniform_open(rng) / std::numbers::sqrt2);
  CHECK(testing::mean_close(v, prob_nonshrink_given_K(1.0), 3));
}

TEST_CASE("non-shrinkage probability is strictly decreasing and in (0, 1)") {
  Xoshiro256 rng(4);
  for (int rep = 0; rep < 200; ++rep) {
    const double a = std::exp(-5 + 10 * uniform_open(rng));
    const double b = a * (1 + uniform_open(rng));
    const double pa = prob_nonshrink_given_K(a);
    const double pb = prob_nonshrink_given_K(b);
    CHECK(pa > 0);
    CHECK(pa < 1);
    CHECK(pb < pa);
  }
}

TEST_CASE("marginal sparsity with a = 1, b = 10 exceeds 0.92") {
  Xoshiro256 rng(21);
  const auto p = marginal_sparsity_distribution(1, 10, 100000, rng);
  std::vector<double> shrink;
  for (const double x : p) {
    CHECK(x > 0);
    CHECK(x < 1);
    shrink.push_back(1 - x);
  }
  CHECK(testing::mean(shrink) > 0.92);
}

TEST_CASE("a = 1, b = 5 gives an approximately uniform p") {
  Xoshiro256 rng(22);
  const auto p = marginal_sparsity_distribution(1, 5, 2000, rng);
  const double upper = *std::max_element(p.begin(), p.end());
  const double d = testing::ks_statistic(p, [upper](double x) { return std::clamp(x / upper, 0.0, 1.0); });
  CHECK(testing::ks_pvalue(d, p.size()) > 0.01);
}

TEST_CASE("larger b lowers p stochastically") {
  Xoshiro256 rng(23);
  std::vector<double> prev_q;
  for (const double b : {1.0, 5.0, 10.0, 50.0}) {
    auto p = marginal_sparsity_distribution(1, b, 20000, rng);
    std::vector<double> q;
    for (const double prob : {0.1, 0.25, 0.5, 0.75, 0.9}) {
      std::nth_element(p.begin(), p.begin() + static_cast<long>(prob * p.size()), p.end());
      q.push_back(p[static_cast<std::size_t>(prob * p.size())]);
    }
    if (!prev_q.empty())
      for (std::size_t j = 0; j < q.size(); ++j) CHECK(q[j] < prev_q[j]);
    prev_q = q;
  }
  Xoshiro256 r2(24);
  for (const double x : marginal_sparsity_distribution(1, 1e9, 100, r2)) CHECK(x < 1e-8);
}

TEST_CASE("Pareto distribution") {
  const ParetoDist d(2, 1);
  CHECK(d.quantile_upper(1.0) == 1.0);
  CHECK(d.quantile_upper(0.5) == doctest::Approx(std::sqrt(2.0)));
  CHECK(d.logpdf(0.5) == -INFINITY);
  CHECK(d.logpdf(2.0) == doctest::Approx(std::log(2.0) - 3 * std::log(2.0)));
  CHECK_THROWS_AS(ParetoDist(0, 1), InvalidInput);
  CHECK_THROWS_AS(ParetoDist(1, -1), InvalidInput);

  Xoshiro256 rng(31);
  const ParetoDist e(3, 2);
  std::vector<double> v(1000000);
  for (auto& x : v) {
    x = e.sample(rng);
    REQUIRE(x >= 2.0);
  }
  CHECK(testing::mean_close(v, 3.0, 3));

  std::vector<double> w(100000);
  for (auto& x : w) x = d.sample(rng);
  const double ks = testing::ks_statistic(w, [&](double x) { return d.cdf(x); });
  CHECK(testing::ks_pvalue(ks, w.size()) > 0.001);
}

TEST_CASE("MGPS prior draw") {
  Xoshiro256 rng(41);
  SUBCASE("tau is the cumulative product of zeta") {
    const auto d = mgps_prior_draw(7, 5, 3, 2.1, 3.1, rng);
    double prod = 1;
    for (int h = 0; h < 5; ++h) {
      prod *= d.zeta[h];
      CHECK(d.tau[h] == doctest::Approx(prod).epsilon(1e-14));
    }
    CHECK((d.phi.array() > 0).all());
    CHECK((d.zeta.array() > 0).all());
  }
  SUBCASE("column variance decreases with large a2") {
    const int k = 5;
    std::vector<double> var(k, 0.0);
    for (int rep = 0; rep < 10000; ++rep) {
      const auto d = mgps_prior_draw(20, k, 3, 2.1, 20, rng);
      for (int h = 0; h < k; ++h) var[h] += d.Lambda.col(h).squaredNorm() / 20;
    }
    for (int h = 1; h < k; ++h) CHECK(var[h] < var[h - 1]);
  }
  SUBCASE("large rho sends phi to 1") {
    std::vector<double> scaled;
    for (int rep = 0; rep < 2000; ++rep) {
      const auto d = mgps_prior_draw(10, 2, 1e6, 2.1, 3.1, rng);
      CHECK(std::abs(d.phi.maxCoeff() - 1) < 0.02);
      CHECK(std::abs(d.phi.minCoeff() - 1) < 0.02);
      for (int i = 0; i < 10; ++i) scaled.push_back(d.Lambda(i, 1) * std::sqrt(d.tau[1]));
    }
    CHECK(testing::variance_close(scaled, 1.0, 4));
  }
}

TEST_CASE("adaptive Simpson on smooth integrands") {
  CHECK(adaptive_simpson([](double x) { return std::sin(x); }, 0, std::numbers::pi, 1e-12) ==
        doctest::Approx(2.0).epsilon(1e-11));
  CHECK(adaptive_simpson([](double x) { return std::exp(x); }, 0, 1, 1e-12) ==
        doctest::Approx(std::numbers::e - 1).epsilon(1e-11));
}

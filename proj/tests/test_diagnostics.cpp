#include <cmath>

#include "doctest.h"
#include "rhythm/diagnostics.hpp"
#include "rhythm/errors.hpp"
#include "support.hpp"

using namespace rhythm;

TEST_CASE("ESS of iid draws is close to n") {
  Xoshiro256 rng(1);
  std::vector<double> v(1000);
  for (double& x : v) x = normal(rng);
  const double ess = effective_sample_size(v);
  CHECK(ess >= 700);
  CHECK(ess <= 1000);
}

TEST_CASE("ESS of AR(1) tracks n (1 - rho) / (1 + rho)") {
  Xoshiro256 rng(2);
  for (const double rho : {0.5, 0.9}) {
    const std::size_t n = 50000;
    std::vector<double> v(n);
    double x = normal(rng) / std::sqrt(1 - rho * rho);
    for (double& out : v) {
      x = rho * x + normal(rng);
      out = x;
    }
    const double expected = static_cast<double>(n) * (1 - rho) / (1 + rho);
    const double ess = effective_sample_size(v);
    CHECK(ess > expected / 1.5);
    CHECK(ess < expected * 1.5);
  }
}

TEST_CASE("ESS input checks") {
  CHECK_THROWS_AS(effective_sample_size({1, 1, 1, 1, 1}), InvalidInput);
  CHECK_THROWS_AS(effective_sample_size({1, 2, 3}), InvalidInput);
  // anti-correlated chains are capped at n
  std::vector<double> alt;
  for (int i = 0; i < 100; ++i) alt.push_back(i % 2 ? 1.0 : -1.0);
  CHECK(effective_sample_size(alt) <= 100);
}

TEST_CASE("joint test refuses adaptation and bad sizes") {
  GewekeConfig c = GewekeConfig::tiny(Mode::kDependent);
  c.adapt = true;
  CHECK_THROWS_AS(geweke_joint_test(c), InvalidInput);
  c = GewekeConfig::tiny(Mode::kDependent);
  c.n_outer = 500;
  c.n_chains = 1000;
  CHECK_THROWS_AS(geweke_joint_test(c), InvalidInput);
  c = GewekeConfig::tiny(Mode::kDependent);
  c.periods = {4};
  CHECK_THROWS_AS(geweke_joint_test(c), InvalidInput);
}

TEST_CASE("joint test is reproducible and flags a broken sampler") {
  GewekeConfig c = GewekeConfig::tiny(Mode::kIndependent);
  c.n_outer = 4000;
  c.n_chains = 40;
  const GewekeReport a = geweke_joint_test(c);
  const GewekeReport b = geweke_joint_test(c);
  REQUIRE(a.stats.size() == geweke_function_names().size());
  for (std::size_t i = 0; i < a.stats.size(); ++i) {
    CHECK(a.stats[i].name == geweke_function_names()[i]);
    CHECK(a.stats[i].z == b.stats[i].z);
  }
  CHECK(a.max_abs_z() < 4.5);

  c.sigma_rate_scale = 0.5;
  CHECK(geweke_joint_test(c).max_abs_z() > 6);
}

TEST_CASE("test functions are finite on a prior draw") {
  const GewekeConfig c = GewekeConfig::tiny(Mode::kDependent);
  Xoshiro256 rng(9);
  const ModelState s = draw_from_prior(c.dims, c.hyper, c.mode, rng);
  const TimeGrid<double> grid = standardize_times({0, 1, 2, 3, 4, 5, 6, 7});
  const auto designs = make_designs(grid, PeriodSet<double>{c.periods}, c.dims.n_local, c.kernel, c.bandwidth);
  const MatrixXd y = simulate_data(s, designs, rng);
  const auto g = geweke_functions(s, y, designs);
  CHECK(g.size() == geweke_function_names().size());
  for (const double v : g) CHECK(std::isfinite(v));
}

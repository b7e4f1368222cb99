#include "rhythm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rhythm/csv.hpp"
#include "rhythm/errors.hpp"

namespace rhythm {

double effective_sample_size(const std::vector<double>& trace) {
  const std::size_t n = trace.size();
  require(n >= 4, "ESS needs at least 4 draws");
  const double mean = std::accumulate(trace.begin(), trace.end(), 0.0) / static_cast<double>(n);
  std::vector<double> c(n);
  for (std::size_t t = 0; t < n; ++t) c[t] = trace[t] - mean;
  const auto autocov = [&](std::size_t lag) {
    double acc = 0;
    for (std::size_t t = 0; t + lag < n; ++t) acc += c[t] * c[t + lag];
    return acc / static_cast<double>(n);
  };
  const double g0 = autocov(0);
  if (!(g0 > 0)) throw InvalidInput("ESS is undefined for a constant trace");
  // Sum pairs Gamma_m = g(2m) + g(2m+1) while they stay positive.
  double tau = -g0;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double pair = autocov(2 * m) + autocov(2 * m + 1);
    if (pair <= 0) break;
    tau += 2 * pair;
  }
  return std::min(static_cast<double>(n), static_cast<double>(n) * g0 / tau);
}

GewekeConfig GewekeConfig::tiny(Mode mode) {
  GewekeConfig c;
  c.mode = mode;
  // Heavy-tailed defaults (a_theta = 1) give test functions without a variance.
  c.hyper.a_sigma = 3;
  c.hyper.b_sigma = 2;
  c.hyper.rho = 10;
  c.hyper.a1 = 3;
  c.hyper.a2 = 4;
  c.hyper.a_theta = 6;
  c.hyper.b_theta = 1;
  c.hyper.a_gamma = 6;
  c.hyper.b_gamma = 1;
  c.hyper.k_init = static_cast<int>(c.dims.k);
  return c;
}

double GewekeReport::max_abs_z() const {
  double m = 0;
  for (const auto& s : stats)
    m = std::max(m, std::abs(s.z));
  return m;
}

std::vector<std::string> geweke_function_names() {
  return {"theta_tilde_mean", "theta_tilde_sq",  "gamma_tilde_mean", "gamma_tilde_sq", "theta_sq",
          "gamma_sq",         "theta_active",    "gamma_active",     "sigma_precision", "log_sigma2",
          "K_theta",          "K_gamma",         "varpi_mean",       "varpi_star_mean", "lambda_sq",
          "lambda_cross",     "eta_sq",          "W_sq",             "Z_sq",            "phi_mean",
          "log_zeta1",        "y_sq",            "y_dot_periodic",   "resid_sq_precision"};
}

std::vector<double> geweke_functions(const ModelState& s, const MatrixXd& y, const DesignPair<double>& d) {
  const auto mean_sq = [](const MatrixXd& m) { return m.size() ? m.squaredNorm() / static_cast<double>(m.size()) : 0.0; };
  const auto mean = [](const MatrixXd& m) { return m.size() ? m.mean() : 0.0; };
  double theta_on = 0;
  for (Index i = 0; i < s.theta.rows(); ++i)
    for (Index m = 0; m < s.n_periods(); ++m) theta_on += (s.theta(i, 2 * m) != 0 || s.theta(i, 2 * m + 1) != 0);
  theta_on /= static_cast<double>(s.varpi.size());
  const double gamma_on = (s.gamma.array() != 0.0).cast<double>().mean();
  double cross = 0;
  if (s.n_factors() > 0 && s.n_probes() > 1) cross = s.Lambda.row(0).dot(s.Lambda.row(1));
  const MatrixXd periodic = s.theta * d.B.transpose();
  const MatrixXd resid = y - fitted_mean(s, d);
  const VectorXd prec = s.sigma2.cwiseInverse();
  return {mean(s.theta_tilde),
          mean_sq(s.theta_tilde),
          mean(s.gamma_tilde),
          mean_sq(s.gamma_tilde),
          mean_sq(s.theta),
          mean_sq(s.gamma),
          theta_on,
          gamma_on,
          prec.mean(),
          s.sigma2.array().log().mean(),
          s.K_theta,
          s.K_gamma,
          mean(s.varpi),
          mean(s.varpi_star),
          mean_sq(s.Lambda),
          cross,
          mean_sq(s.Eta),
          mean_sq(s.W),
          mean_sq(s.Z),
          mean(s.phi),
          s.zeta.size() ? std::log(s.zeta[0]) : 0.0,
          mean_sq(y),
          (y.array() * periodic.array()).mean(),
          (prec.asDiagonal() * resid.array().square().matrix()).mean()};
}

GewekeReport geweke_joint_test(const GewekeConfig& c) {
  require(!c.adapt, "the joint-distribution test needs a fixed factor rank; disable adaptation");
  require(c.n_outer >= 100, "n_outer must be at least 100");
  require(c.n_chains >= 2 && c.n_outer / c.n_chains >= 1, "need at least two chains and one sweep per chain");
  require(static_cast<Index>(2 * c.periods.size()) == c.dims.n_fourier, "periods do not match dims.n_fourier");
  std::vector<double> hours(static_cast<std::size_t>(c.dims.T));
  std::iota(hours.begin(), hours.end(), 0.0);
  const TimeGrid<double> grid = standardize_times(hours);
  const DesignPair<double> designs = make_designs(grid, PeriodSet<double>{c.periods}, c.dims.n_local, c.kernel, c.bandwidth);
  HyperParams hyper = c.hyper;
  hyper.k_init = static_cast<int>(c.dims.k);
  const auto names = geweke_function_names();
  const std::size_t F = names.size();
  const auto M = static_cast<std::size_t>(c.n_outer);

  // Marginal-conditional: independent joint draws.
  std::vector<std::vector<double>> mc(F, std::vector<double>(M));
  for (std::size_t r = 0; r < M; ++r) {
    Xoshiro256 rng = substream(c.seed, r, Stream::kInit, 1);
    const ModelState s = draw_from_prior(c.dims, hyper, c.mode, rng);
    const MatrixXd y = simulate_data(s, designs, rng);
    const auto g = geweke_functions(s, y, designs);
    for (std::size_t f = 0; f < F; ++f) mc[f][r] = g[f];
  }

  // Successive-conditional: alternate a sweep with a fresh data draw. Every
  // chain starts at the joint prior, so all its draws are stationary.
  const auto R = static_cast<std::size_t>(c.n_chains);
  const std::size_t L = M / R;
  std::vector<std::vector<double>> sc(F, std::vector<double>(R * L));
  std::vector<std::vector<double>> chain_means(F, std::vector<double>(R, 0.0));
  for (std::size_t ch = 0; ch < R; ++ch) {
    Xoshiro256 start = substream(c.seed, ch, Stream::kInit, 2);
    ModelState s = draw_from_prior(c.dims, hyper, c.mode, start);
    MatrixXd y = simulate_data(s, designs, start);
    SamplerContext ctx(y, designs, hyper, c.mode);
    ctx.sigma_rate_scale = c.sigma_rate_scale;
    ChainConfig chain;
    std::uint64_t mix = c.seed ^ (0x9E3779B97F4A7C15ULL * (ch + 1));
    chain.seed = Xoshiro256::splitmix64(mix);
    chain.adapt.enabled = false;
    chain.n_threads = 1;
    for (std::size_t r = 0; r < L; ++r) {
      gibbs_sweep(s, ctx, chain, static_cast<long>(r + 1));
      Xoshiro256 rng = substream(chain.seed, r, Stream::kData, 0);
      y = simulate_data(s, designs, rng);
      const auto g = geweke_functions(s, y, designs);
      for (std::size_t f = 0; f < F; ++f) {
        sc[f][ch * L + r] = g[f];
        chain_means[f][ch] += g[f] / static_cast<double>(L);
      }
    }
  }

  GewekeReport report;
  for (std::size_t f = 0; f < F; ++f) {
    GewekeStat st;
    st.name = names[f];
    const auto moments = [](const std::vector<double>& v) {
      const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0;
      for (const double x : v) ss += (x - m) * (x - m);
      return std::pair{m, ss / static_cast<double>(v.size() - 1)};
    };
    const auto [m1, v1] = moments(mc[f]);
    const auto [m2, v2] = moments(sc[f]);
    st.marginal_mean = m1;
    st.successive_mean = m2;
    if (v1 == 0 && v2 == 0) {
      st.skipped = true;
      st.z = m1 == m2 ? 0 : std::numeric_limits<double>::infinity();
      report.stats.push_back(st);
      continue;
    }
    const auto [cm, cv] = moments(chain_means[f]);
    (void)cm;
    const double var_sc = cv / static_cast<double>(R);
    st.ess = var_sc > 0 ? std::min(static_cast<double>(R * L), v2 / var_sc) : static_cast<double>(R * L);
    st.std_error = std::sqrt(v1 / static_cast<double>(M) + var_sc);
    st.z = (m1 - m2) / st.std_error;
    report.stats.push_back(st);
  }
  return report;
}

void write_geweke_csv(const std::string& path, const GewekeReport& report) {
  auto os = open_output(path);
  os << "function,marginal_mean,successive_mean,std_error,ess,z,skipped\n";
  for (const auto& s : report.stats) {
    os << s.name << ',' << fmt_double(s.marginal_mean) << ',' << fmt_double(s.successive_mean) << ','
       << fmt_double(s.std_error) << ',' << fmt_double(s.ess) << ',' << fmt_double(s.z) << ',' << (s.skipped ? 1 : 0)
       << '\n';
  }
}

}  // namespace rhythm

#include "rhythm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "rhythm/csv.hpp"
#include "rhythm/errors.hpp"

namespace rhythm {

using nlohmann::json;

void SynthConfig::validate() const {
  require(p > 0, "p must be positive");
  require(times_hours.empty() ? T >= 4 : times_hours.size() >= 4, "at least 4 time points are required");
  require(!periods.empty(), "periods must not be empty");
  require(n_local > 0, "n_local must be positive");
  require(bandwidth > 0, "bandwidth must be positive");
  require(sigma2.size() == 1 || static_cast<Index>(sigma2.size()) == p, "sigma2 needs 1 or p entries");
  for (const double s : sigma2) require(s > 0, "sigma2 must be positive");
  require(k_true >= 1, "k_true must be at least 1");
  require(loading_value_sd >= 0, "loading_value_sd must be nonnegative");
  require(loading_count_range.first >= 0 && loading_count_range.first <= loading_count_range.second,
          "loading_count_range must be ordered and nonnegative");
  require(loading_count_range.second <= p, "loading count exceeds p");
  require(theta_threshold_range.first >= 0 && theta_threshold_range.first <= theta_threshold_range.second,
          "theta_threshold_range must be ordered and nonnegative");
  require(gamma_threshold_range.first >= 0 && gamma_threshold_range.first <= gamma_threshold_range.second,
          "gamma_threshold_range must be ordered and nonnegative");
}

std::vector<double> SynthConfig::resolved_times() const {
  if (!times_hours.empty()) return times_hours;
  std::vector<double> t(static_cast<std::size_t>(T));
  std::iota(t.begin(), t.end(), 0.0);
  return t;
}

SynthConfig dependent_defaults() { return SynthConfig{}; }

SynthConfig independent_defaults() {
  SynthConfig c;
  c.sigma2 = {1.0};
  c.loading_count_range = {0, 0};
  c.theta_threshold_range = {0, 5};
  return c;
}

Index GroundTruth::n_periodic() const { return std::count(periodic.begin(), periodic.end(), true); }
Index GroundTruth::n_circadian() const { return std::count(circadian.begin(), circadian.end(), true); }

void refresh_flags(GroundTruth& t) {
  const Index p = t.theta.rows();
  const Index q = t.theta.cols() / 2;
  t.active_periods.assign(static_cast<std::size_t>(p), {});
  t.periodic.assign(static_cast<std::size_t>(p), false);
  t.circadian.assign(static_cast<std::size_t>(p), false);
  for (Index i = 0; i < p; ++i) {
    auto& act = t.active_periods[static_cast<std::size_t>(i)];
    for (Index m = 0; m < q; ++m)
      if (t.theta(i, 2 * m) != 0.0 || t.theta(i, 2 * m + 1) != 0.0) act.push_back(m);
    t.periodic[static_cast<std::size_t>(i)] = act.size() == 1;
    t.circadian[static_cast<std::size_t>(i)] = act.size() == 1 && act[0] == t.target;
  }
}

std::vector<Index> loading_counts(const SynthConfig& c) {
  std::vector<Index> out(static_cast<std::size_t>(c.k_true));
  const auto [lo, hi] = c.loading_count_range;
  for (Index h = 0; h < c.k_true; ++h) {
    const double frac = c.k_true > 1 ? static_cast<double>(h) / static_cast<double>(c.k_true - 1) : 0.0;
    out[static_cast<std::size_t>(h)] = static_cast<Index>(std::lround(static_cast<double>(lo) + frac * static_cast<double>(hi - lo)));
  }
  return out;
}

namespace {

SynthResult generate(const SynthConfig& c, Xoshiro256& rng, bool with_factors) {
  c.validate();
  SynthResult r;
  r.times_hours = c.resolved_times();
  const TimeGrid<double> grid = standardize_times(r.times_hours);
  const PeriodSet<double> periods{c.periods};
  validate_periods(grid, periods);
  r.designs = make_designs(grid, periods, c.n_local, c.kernel, c.bandwidth);
  const Index p = c.p;
  const Index T = grid.size();
  const Index q = static_cast<Index>(c.periods.size());
  const Index L = c.n_local;
  const Index k = c.k_true;

  GroundTruth& t = r.truth;
  t.periods = c.periods;
  const auto it24 = std::find(c.periods.begin(), c.periods.end(), 24.0);
  t.target = it24 != c.periods.end() ? static_cast<Index>(it24 - c.periods.begin()) : q - 1;

  t.Lambda = MatrixXd::Zero(p, k);
  if (with_factors) {
    const std::vector<Index> counts = loading_counts(c);
    std::vector<Index> rows(static_cast<std::size_t>(p));
    for (Index h = 0; h < k; ++h) {
      std::iota(rows.begin(), rows.end(), 0);
      std::shuffle(rows.begin(), rows.end(), rng);
      for (Index n = 0; n < counts[static_cast<std::size_t>(h)]; ++n)
        t.Lambda(rows[static_cast<std::size_t>(n)], h) = c.loading_value_sd * normal(rng);
    }
  }
  t.Eta = MatrixXd::Zero(T, k);
  for (Index h = 0; h < k; ++h)
    for (Index j = 0; j < T; ++j) t.Eta(j, h) = normal(rng);
  t.W = MatrixXd::Zero(2 * q, k);
  t.Z = MatrixXd::Zero(L, k);
  for (Index h = 0; h < k; ++h) {
    for (Index l = 0; l < 2 * q; ++l) t.W(l, h) = normal(rng);
    for (Index l = 0; l < L; ++l) t.Z(l, h) = normal(rng);
  }
  t.theta_tilde = MatrixXd::Zero(p, 2 * q);
  t.gamma_tilde = MatrixXd::Zero(p, L);
  for (Index i = 0; i < p; ++i) {
    const VectorXd lam = t.Lambda.row(i).transpose();
    t.theta_tilde.row(i) = (t.W * lam + normal_vector(rng, 2 * q)).transpose();
    t.gamma_tilde.row(i) = (t.Z * lam + normal_vector(rng, L)).transpose();
  }
  const auto uniform_in = [&](std::pair<double, double> range) {
    return range.first + (range.second - range.first) * uniform_open(rng);
  };
  t.varpi = MatrixXd::Zero(p, q);
  t.varpi_star = MatrixXd::Zero(p, L);
  for (Index i = 0; i < p; ++i) {
    for (Index m = 0; m < q; ++m) t.varpi(i, m) = uniform_in(c.theta_threshold_range);
    for (Index l = 0; l < L; ++l) t.varpi_star(i, l) = uniform_in(c.gamma_threshold_range);
  }
  t.theta = apply_theta_thresholds(t.theta_tilde, t.varpi);
  t.gamma = apply_gamma_thresholds(t.gamma_tilde, t.varpi_star);
  t.sigma2 = VectorXd(p);
  for (Index i = 0; i < p; ++i) t.sigma2[i] = c.sigma2_of(i);
  t.mean = fitted_mean<double>(t.theta, t.gamma, t.Lambda, t.Eta, r.designs);
  r.y = t.mean;
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < T; ++j) r.y(i, j) += std::sqrt(t.sigma2[i]) * normal(rng);
  refresh_flags(t);
  r.probe_ids.resize(static_cast<std::size_t>(p));
  for (Index i = 0; i < p; ++i) r.probe_ids[static_cast<std::size_t>(i)] = "probe_" + std::to_string(i + 1);
  return r;
}

}  // namespace

SynthResult generate_dependent(const SynthConfig& config, Xoshiro256& rng) { return generate(config, rng, true); }

SynthResult generate_independent(const SynthConfig& config, Xoshiro256& rng) { return generate(config, rng, false); }

// ---- JSON --------------------------------------------------------------------

std::string config_to_json(const SynthConfig& c) {
  json j;
  j["p"] = c.p;
  j["T"] = c.T;
  j["times_hours"] = c.resolved_times();
  j["periods"] = c.periods;
  j["n_local"] = c.n_local;
  j["kernel"] = to_string(c.kernel);
  j["bandwidth"] = c.bandwidth;
  j["sigma2"] = c.sigma2;
  j["k_true"] = c.k_true;
  j["loading_value_sd"] = c.loading_value_sd;
  j["loading_count_range"] = {c.loading_count_range.first, c.loading_count_range.second};
  j["theta_threshold_range"] = {c.theta_threshold_range.first, c.theta_threshold_range.second};
  j["gamma_threshold_range"] = {c.gamma_threshold_range.first, c.gamma_threshold_range.second};
  j["seed"] = c.seed;
  return j.dump(2);
}

namespace {

template <typename T>
T field(const json& j, const char* name) {
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config field '") + name + "': " + e.what());
  }
}

}  // namespace

SynthConfig synth_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config is not valid JSON: ") + e.what());
  }
  require(j.is_object(), "config must be a JSON object");
  require(j.contains("seed"), "config field 'seed' is required: set an explicit seed");
  SynthConfig c = dependent_defaults();
  if (j.contains("preset")) {
    const auto preset = field<std::string>(j, "preset");
    if (preset == "independent") {
      c = independent_defaults();
    } else {
      require(preset == "dependent", "config field 'preset' must be dependent or independent");
    }
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key == "preset") continue;
    if (key == "p") c.p = field<Index>(j, "p");
    else if (key == "T") c.T = field<Index>(j, "T");
    else if (key == "times_hours") c.times_hours = field<std::vector<double>>(j, "times_hours");
    else if (key == "periods") c.periods = field<std::vector<double>>(j, "periods");
    else if (key == "n_local") c.n_local = field<Index>(j, "n_local");
    else if (key == "kernel") c.kernel = kernel_kind_from_string(field<std::string>(j, "kernel"));
    else if (key == "bandwidth") c.bandwidth = field<double>(j, "bandwidth");
    else if (key == "sigma2") {
      c.sigma2 = it->is_array() ? field<std::vector<double>>(j, "sigma2") : std::vector<double>{field<double>(j, "sigma2")};
    } else if (key == "k_true") c.k_true = field<Index>(j, "k_true");
    else if (key == "loading_value_sd") c.loading_value_sd = field<double>(j, "loading_value_sd");
    else if (key == "loading_count_range") c.loading_count_range = field<std::pair<Index, Index>>(j, "loading_count_range");
    else if (key == "theta_threshold_range") c.theta_threshold_range = field<std::pair<double, double>>(j, "theta_threshold_range");
    else if (key == "gamma_threshold_range") c.gamma_threshold_range = field<std::pair<double, double>>(j, "gamma_threshold_range");
    else if (key == "seed") c.seed = field<std::uint64_t>(j, "seed");
    else throw InvalidInput("unknown config field '" + key + "'");
  }
  if (!c.times_hours.empty() && !j.contains("T")) c.T = static_cast<Index>(c.times_hours.size());
  require(c.times_hours.empty() || static_cast<Index>(c.times_hours.size()) == c.T,
          "config fields 'T' and 'times_hours' disagree");
  c.validate();
  return c;
}

void write_truth_json(const std::string& path, const SynthResult& r, const SynthConfig& config) {
  const GroundTruth& t = r.truth;
  const auto rows = [](const MatrixXd& m) {
    json a = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(m.cols()));
      for (Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(i, c);
      a.push_back(row);
    }
    return a;
  };
  json j;
  j["config"] = json::parse(config_to_json(config));
  j["periods"] = t.periods;
  j["target_period"] = t.periods[static_cast<std::size_t>(t.target)];
  j["n_periodic"] = t.n_periodic();
  j["n_circadian"] = t.n_circadian();
  json probes = json::array();
  for (std::size_t i = 0; i < r.probe_ids.size(); ++i) {
    json pr;
    pr["id"] = r.probe_ids[i];
    std::vector<double> act;
    for (const Index m : t.active_periods[i]) act.push_back(t.periods[static_cast<std::size_t>(m)]);
    pr["active_periods"] = act;
    pr["periodic"] = static_cast<bool>(t.periodic[i]);
    pr["circadian"] = static_cast<bool>(t.circadian[i]);
    pr["sigma2"] = t.sigma2[static_cast<Index>(i)];
    probes.push_back(pr);
  }
  j["probes"] = probes;
  j["theta"] = rows(t.theta);
  j["gamma"] = rows(t.gamma);
  j["Lambda"] = rows(t.Lambda);
  j["Eta"] = rows(t.Eta);
  auto os = open_output(path);
  os << j.dump(1) << '\n';
}

}  // namespace rhythm

#include "rhythm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "rhythm/csv.hpp"
#include "rhythm/errors.hpp"

namespace rhythm {

Periodogram periodogram(const Eigen::VectorXd& series) {
  const Eigen::Index T = series.size();
  require(T >= 4, "periodogram needs at least 4 observations");
  require(series.allFinite(), "series contains non-finite values");
  const Eigen::VectorXd y = series.array() - series.mean();
  Periodogram out;
  out.constant = (y.array() == 0.0).all();
  const auto ordinate = [&](Eigen::Index j) {
    std::complex<double> acc = 0;
    for (Eigen::Index t = 0; t < T; ++t) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(j * t % T) / static_cast<double>(T);
      acc += y[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    return std::norm(acc) / static_cast<double>(T);
  };
  for (Eigen::Index j = 1; j <= (T - 1) / 2; ++j) {
    out.frequencies.push_back(static_cast<double>(j) / static_cast<double>(T));
    out.ordinates.push_back(ordinate(j));
  }
  if (T % 2 == 0) out.nyquist = ordinate(T / 2);
  return out;
}

double fisher_g_pvalue(double x, std::size_t n) {
  require(n >= 2, "g-test needs at least two ordinates");
  if (x <= 1.0 / static_cast<double>(n)) return 1.0;
  if (x >= 1.0) return 0.0;
  // Alternating inclusion-exclusion sum; terms with 1 - jx <= 0 vanish.
  const auto jmax = static_cast<std::size_t>(std::floor(1.0 / x));
  long double sum = 0;
  for (std::size_t j = 1; j <= std::min(jmax, n); ++j) {
    const double base = 1.0 - static_cast<double>(j) * x;
    if (base <= 0) break;
    const long double log_term = std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(j) + 1) -
                                 std::lgamma(static_cast<double>(n - j) + 1) +
                                 static_cast<double>(n - 1) * std::log(base);
    const long double term = std::exp(log_term);
    sum += (j % 2 == 1) ? term : -term;
  }
  return std::clamp(static_cast<double>(sum), 0.0, 1.0);
}

GTestResult fisher_g_test(const Eigen::VectorXd& series) {
  const Periodogram pg = periodogram(series);
  GTestResult r;
  r.n_ordinates = pg.n_ordinates();
  require(r.n_ordinates >= 3, "g-test needs at least 3 ordinates");
  const double total = std::accumulate(pg.ordinates.begin(), pg.ordinates.end(), 0.0);
  if (pg.constant || total <= 0) {
    r.g = 0;
    r.p_value = 1;
    return r;
  }
  r.g = *std::max_element(pg.ordinates.begin(), pg.ordinates.end()) / total;
  r.p_value = fisher_g_pvalue(r.g, r.n_ordinates);
  return r;
}

std::vector<double> fdr_adjust(const std::vector<double>& p_values) {
  const std::size_t m = p_values.size();
  for (const double p : p_values) require(p >= 0 && p <= 1, "p-values must lie in [0, 1]");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<double> q(m);
  double running = 1.0;
  for (std::size_t r = m; r-- > 0;) {
    const std::size_t idx = order[r];
    running = std::min(running, p_values[idx] * static_cast<double>(m) / static_cast<double>(r + 1));
    q[idx] = running;
  }
  return q;
}

std::vector<double> ScoreFile::oriented() const {
  std::vector<double> out = scores;
  if (!higher_is_periodic)
    for (double& v : out) v = -v;
  return out;
}

void write_score_file(const std::string& path, const ScoreFile& f) {
  require(f.probe_ids.size() == f.scores.size(), "score file ids and scores differ in length");
  auto os = open_output(path);
  os << "# method=" << f.method << '\n';
  os << "probe_id,score,direction\n";
  const char* dir = f.higher_is_periodic ? "higher" : "lower";
  for (std::size_t i = 0; i < f.scores.size(); ++i) os << f.probe_ids[i] << ',' << fmt_double(f.scores[i]) << ',' << dir << '\n';
}

ScoreFile read_score_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot read " + path);
  ScoreFile f;
  std::string line;
  bool header = false;
  bool direction_seen = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# method=", 0) == 0) {
      f.method = line.substr(9);
      continue;
    }
    if (line[0] == '#') continue;
    if (!header) {
      require(line == "probe_id,score,direction", path + ": expected header probe_id,score,direction");
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string id, score, dir;
    std::getline(ss, id, ',');
    std::getline(ss, score, ',');
    std::getline(ss, dir, ',');
    require(dir == "higher" || dir == "lower", path + ":" + std::to_string(lineno) + ": direction must be higher or lower");
    const bool higher = dir == "higher";
    require(!direction_seen || higher == f.higher_is_periodic, path + ": mixed score directions");
    direction_seen = true;
    f.higher_is_periodic = higher;
    double v = 0;
    try {
      std::size_t used = 0;
      v = std::stod(score, &used);
      require(used == score.size(), "trailing characters");
    } catch (const std::exception&) {
      throw InvalidInput(path + ":" + std::to_string(lineno) + ": bad score '" + score + "'");
    }
    f.probe_ids.push_back(id);
    f.scores.push_back(v);
  }
  require(header, path + ": missing header");
  if (f.method.empty()) f.method = path;
  return f;
}

}  // namespace rhythm

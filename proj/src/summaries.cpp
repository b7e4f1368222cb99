#include "rhythm/summaries.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "rhythm/csv.hpp"
#include "rhythm/errors.hpp"

namespace rhythm {

using Eigen::Index;

namespace {

void check_probe(const PosteriorArchive& a, std::int64_t i) {
  require(a.n_samples > 0, "archive holds no retained samples");
  require(i >= 0 && i < a.p, "probe index out of range");
  require(a.q >= 1, "archive has no period pairs");
}

std::int64_t resolve_target(const PosteriorArchive& a, std::optional<std::int64_t> target) {
  const std::int64_t m = target.value_or(a.q - 1);
  require(m >= 0 && m < a.q, "target period index out of range");
  return m;
}

// Index of the single active pair in a sample, -1 for none, -2 for several.
std::int64_t lone_active(const PosteriorArchive& a, std::uint64_t s, std::int64_t i) {
  std::int64_t found = -1;
  for (std::int64_t m = 0; m < a.q; ++m) {
    if (!a.theta_active(s, i, m)) continue;
    if (found != -1) return -2;
    found = m;
  }
  return found;
}

}  // namespace

double prob_circadian(const PosteriorArchive& a, std::int64_t i, std::optional<std::int64_t> target) {
  check_probe(a, i);
  const std::int64_t m = resolve_target(a, target);
  std::uint64_t hits = 0;
  for (std::uint64_t s = 0; s < a.n_samples; ++s) hits += lone_active(a, s, i) == m ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(a.n_samples);
}

double prob_periodic(const PosteriorArchive& a, std::int64_t i) {
  check_probe(a, i);
  std::uint64_t hits = 0;
  for (std::uint64_t s = 0; s < a.n_samples; ++s) hits += lone_active(a, s, i) >= 0 ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(a.n_samples);
}

std::vector<double> prob_per_period(const PosteriorArchive& a, std::int64_t i) {
  check_probe(a, i);
  std::vector<double> out(static_cast<std::size_t>(a.q), 0.0);
  for (std::uint64_t s = 0; s < a.n_samples; ++s) {
    const std::int64_t m = lone_active(a, s, i);
    if (m >= 0) out[static_cast<std::size_t>(m)] += 1.0;
  }
  for (double& v : out) v /= static_cast<double>(a.n_samples);
  return out;
}

double prob_pair_zero(const PosteriorArchive& a, std::int64_t i, std::int64_t m) {
  check_probe(a, i);
  require(m >= 0 && m < a.q, "period index out of range");
  std::uint64_t zeros = 0;
  for (std::uint64_t s = 0; s < a.n_samples; ++s) zeros += a.theta_active(s, i, m) ? 0 : 1;
  return static_cast<double>(zeros) / static_cast<double>(a.n_samples);
}

std::vector<RhythmScore> rhythm_scores(const PosteriorArchive& a, std::optional<std::int64_t> target) {
  const std::int64_t tm = resolve_target(a, target);
  std::vector<RhythmScore> out;
  out.reserve(static_cast<std::size_t>(a.p));
  for (std::int64_t i = 0; i < a.p; ++i) {
    RhythmScore r;
    r.probe_id = i < static_cast<std::int64_t>(a.probe_ids.size()) ? a.probe_ids[static_cast<std::size_t>(i)]
                                                                   : std::to_string(i);
    r.prob_per_period = prob_per_period(a, i);
    r.prob_periodic = std::accumulate(r.prob_per_period.begin(), r.prob_per_period.end(), 0.0);
    r.prob_circadian = r.prob_per_period[static_cast<std::size_t>(tm)];
    r.beta = 1.0 - r.prob_circadian;
    out.push_back(std::move(r));
  }
  return out;
}

AmplitudePhase amplitude_phase(double theta_sin, double theta_cos) {
  AmplitudePhase out;
  out.amplitude = std::hypot(theta_sin, theta_cos);
  if (theta_sin == 0.0 && theta_cos == 0.0) return out;
  if (theta_cos == 0.0) {
    // Ratio is +-inf; the principal value of atan is +-pi/2, folded to +pi/2.
    out.phase = std::numbers::pi / 2;
  } else {
    out.phase = std::atan(theta_sin / theta_cos);
    if (*out.phase == -std::numbers::pi / 2) out.phase = std::numbers::pi / 2;
  }
  out.phase_quadrant = std::atan2(theta_sin, theta_cos);
  if (*out.phase_quadrant == -std::numbers::pi) out.phase_quadrant = std::numbers::pi;
  return out;
}

Eigen::Vector2d pair_from_amplitude_phase(double amplitude, double psi) {
  return {amplitude * std::sin(psi), amplitude * std::cos(psi)};
}

double sample_quantile(std::vector<double> v, double prob) {
  require(!v.empty(), "quantile of an empty sample");
  require(prob >= 0 && prob <= 1, "quantile probability must lie in [0, 1]");
  std::sort(v.begin(), v.end());
  const double h = prob * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Quantiles quantiles(const std::vector<double>& v, double lo, double mid, double hi) {
  Quantiles q;
  q.n = v.size();
  if (v.empty()) return q;
  q.lo = sample_quantile(v, lo);
  q.mid = sample_quantile(v, mid);
  q.hi = sample_quantile(v, hi);
  return q;
}

std::vector<PairPosterior> pair_posteriors(const PosteriorArchive& a, std::int64_t m) {
  require(a.n_samples > 0, "archive holds no retained samples");
  require(m >= 0 && m < a.q, "period index out of range");
  const auto p = static_cast<std::size_t>(a.p);
  std::vector<std::vector<double>> amp(p), ph(p), phq(p);
  for (std::uint64_t s = 0; s < a.n_samples; ++s) {
    const Eigen::MatrixXd th = a.theta(s);
    for (std::size_t i = 0; i < p; ++i) {
      const auto r = static_cast<Index>(i);
      if (!a.theta_active(s, static_cast<std::int64_t>(i), m)) continue;
      const AmplitudePhase ap = amplitude_phase(th(r, 2 * m), th(r, 2 * m + 1));
      amp[i].push_back(ap.amplitude);
      if (ap.phase) {
        ph[i].push_back(*ap.phase);
        phq[i].push_back(*ap.phase_quadrant);
      }
    }
  }
  std::vector<PairPosterior> out(p);
  for (std::size_t i = 0; i < p; ++i) {
    out[i].zero_fraction = 1.0 - static_cast<double>(amp[i].size()) / static_cast<double>(a.n_samples);
    out[i].amplitude = quantiles(amp[i]);
    out[i].phase = quantiles(ph[i]);
    out[i].phase_quadrant = quantiles(phq[i]);
  }
  return out;
}

DiscoveryList fdr_select(const std::vector<double>& betas, double k_star) {
  require(!betas.empty(), "fdr_select needs at least one probability");
  require(k_star >= 0 && k_star <= 1, "target FDR must lie in [0, 1]");
  for (const double b : betas) require(b >= 0 && b <= 1, "posterior probabilities must lie in [0, 1]");
  std::vector<std::size_t> order(betas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return betas[x] < betas[y]; });

  DiscoveryList out;
  out.k_star = k_star;
  double sum = 0;
  std::size_t n = 0;
  std::size_t accepted = 0;
  double accepted_sum = 0;
  // Prefix means of sorted values never decrease, so the first failing group ends the scan.
  while (n < order.size()) {
    const double v = betas[order[n]];
    std::size_t end = n;
    double group = 0;
    while (end < order.size() && betas[order[end]] == v) group += betas[order[end++]];
    if ((sum + group) / static_cast<double>(end) > k_star) break;
    sum += group;
    n = end;
    accepted = n;
    accepted_sum = sum;
    out.kappa = v;
  }
  out.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(accepted));
  out.expected_fdr = accepted > 0 ? accepted_sum / static_cast<double>(accepted) : 0.0;
  return out;
}

Eigen::MatrixXd correlation_from_factors(const Eigen::MatrixXd& Lambda, const Eigen::VectorXd& sigma2) {
  require(Lambda.rows() == sigma2.size(), "Lambda rows must match sigma2");
  Eigen::MatrixXd omega = Lambda * Lambda.transpose();
  omega.diagonal() += sigma2;
  const Eigen::VectorXd inv_sd = omega.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd corr = inv_sd.asDiagonal() * omega * inv_sd.asDiagonal();
  corr.diagonal().setOnes();
  return corr;
}

Eigen::MatrixXd posterior_correlation(const PosteriorArchive& a, bool per_sample) {
  require(a.n_samples > 0, "archive holds no retained samples");
  const Index p = a.p;
  const auto sigma_of = [&](std::uint64_t s) {
    Eigen::VectorXd v(p);
    for (Index i = 0; i < p; ++i) v[i] = a.sigma2_at(s, i);
    return v;
  };
  if (a.snapshots.empty()) {
    // No factor draws (independent mode): Omega is diagonal.
    return Eigen::MatrixXd::Identity(p, p);
  }
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
  for (const auto& snap : a.snapshots) {
    const Eigen::VectorXd s2 = sigma_of(snap.sample);
    if (per_sample) {
      acc += correlation_from_factors(snap.Lambda, s2);
    } else {
      acc += snap.Lambda * snap.Lambda.transpose();
      acc.diagonal() += s2;
    }
  }
  acc /= static_cast<double>(a.snapshots.size());
  if (per_sample) {
    acc.diagonal().setOnes();
    return acc;
  }
  const Eigen::VectorXd inv_sd = acc.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd corr = inv_sd.asDiagonal() * acc * inv_sd.asDiagonal();
  corr.diagonal().setOnes();
  return corr;
}

std::vector<Edge> correlation_edges(const Eigen::MatrixXd& corr, double threshold) {
  require(threshold >= 0 && threshold <= 1, "correlation threshold must lie in [0, 1]");
  require(corr.rows() == corr.cols(), "correlation matrix must be square");
  std::vector<Edge> out;
  for (Index i = 0; i < corr.rows(); ++i)
    for (Index j = i + 1; j < corr.cols(); ++j)
      if (std::abs(corr(i, j)) >= threshold) out.push_back({i, j, corr(i, j)});
  return out;
}

RocResult roc_and_fdr_curves(const std::vector<double>& scores, const std::vector<bool>& truth) {
  require(scores.size() == truth.size(), "scores and truth differ in length");
  const long n_pos = static_cast<long>(std::count(truth.begin(), truth.end(), true));
  const long n_neg = static_cast<long>(truth.size()) - n_pos;
  require(n_pos > 0 && n_neg > 0, "ROC needs both classes in the truth");
  for (const double s : scores) require(!std::isnan(s), "scores must not be NaN");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return scores[x] > scores[y]; });

  RocResult out;
  out.points.push_back({std::numeric_limits<double>::infinity(), 0, 0, 0.0, 0.0, 0.0});
  long tp = 0, fp = 0;
  std::size_t k = 0;
  while (k < order.size()) {
    const double v = scores[order[k]];
    while (k < order.size() && scores[order[k]] == v) {
      if (truth[order[k]]) ++tp; else ++fp;
      ++k;
    }
    const RocPoint& prev = out.points.back();
    RocPoint pt{v, tp, fp, static_cast<double>(tp) / static_cast<double>(n_pos),
                static_cast<double>(fp) / static_cast<double>(n_neg),
                static_cast<double>(fp) / static_cast<double>(tp + fp)};
    out.auc += 0.5 * (pt.fpr - prev.fpr) * (pt.tpr + prev.tpr);
    out.points.push_back(pt);
  }
  return out;
}

// ---- CSV ------------------------------------------------------------------------

namespace {

std::string period_label(double w) { return fmt_double(w, 10) + "h"; }

void put_quantiles(std::ostream& os, const Quantiles& q) {
  if (q.n == 0) {
    os << ",,,";
    return;
  }
  os << ',' << fmt_double(q.lo, 10) << ',' << fmt_double(q.mid, 10) << ',' << fmt_double(q.hi, 10);
}

}  // namespace

void write_summary_csv(const std::string& path, const PosteriorArchive& a, std::int64_t target) {
  require(target >= 0 && target < a.q, "target period index out of range");
  const auto scores = rhythm_scores(a, target);
  const auto pairs = pair_posteriors(a, target);
  auto os = open_output(path);
  os << "probe_id";
  for (std::int64_t m = 0; m < a.q; ++m) {
    const double w = m < static_cast<std::int64_t>(a.periods.size()) ? a.periods[static_cast<std::size_t>(m)] : 0.0;
    os << ",zero_pct_" << period_label(w);
  }
  os << ",p_periodic,p_circadian,beta";
  for (const char* name : {"amplitude", "phase", "phase_quadrant"}) {
    os << ',' << name << "_q025," << name << "_q50," << name << "_q975";
  }
  os << '\n';
  for (std::int64_t i = 0; i < a.p; ++i) {
    const auto& sc = scores[static_cast<std::size_t>(i)];
    os << sc.probe_id;
    for (std::int64_t m = 0; m < a.q; ++m) os << ',' << fmt_double(100.0 * prob_pair_zero(a, i, m), 10);
    os << ',' << fmt_double(sc.prob_periodic, 10) << ',' << fmt_double(sc.prob_circadian, 10) << ','
       << fmt_double(sc.beta, 10);
    const auto& pp = pairs[static_cast<std::size_t>(i)];
    put_quantiles(os, pp.amplitude);
    put_quantiles(os, pp.phase);
    put_quantiles(os, pp.phase_quadrant);
    os << '\n';
  }
}

void write_discoveries_csv(const std::string& path, const DiscoveryList& list, const std::vector<RhythmScore>& scores) {
  auto os = open_output(path);
  os << "# k_star=" << fmt_double(list.k_star, 10) << " kappa=" << fmt_double(list.kappa, 10)
     << " expected_fdr=" << fmt_double(list.expected_fdr, 10) << " selected=" << list.selected.size() << '\n';
  os << "rank,probe_id,beta,p_circadian\n";
  std::size_t rank = 1;
  for (const std::size_t idx : list.selected) {
    const auto& sc = scores.at(idx);
    os << rank++ << ',' << sc.probe_id << ',' << fmt_double(sc.beta, 10) << ',' << fmt_double(sc.prob_circadian, 10)
       << '\n';
  }
}

void write_edges_csv(const std::string& path, const std::vector<Edge>& edges, const std::vector<std::string>& ids) {
  auto os = open_output(path);
  os << "probe_a,probe_b,correlation\n";
  for (const auto& e : edges) {
    os << ids.at(static_cast<std::size_t>(e.i)) << ',' << ids.at(static_cast<std::size_t>(e.j)) << ','
       << fmt_double(e.corr, 10) << '\n';
  }
}

void write_roc_csv(const std::string& path, const RocResult& roc) {
  auto os = open_output(path);
  os << "threshold,tp,fp,tpr,fpr,fdr\n";
  for (const auto& pt : roc.points) {
    os << fmt_double(pt.threshold) << ',' << pt.tp << ',' << pt.fp << ',' << fmt_double(pt.tpr) << ','
       << fmt_double(pt.fpr) << ',' << fmt_double(pt.fdr) << '\n';
  }
}

}  // namespace rhythm

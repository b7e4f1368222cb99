#include <cmath>
#include <numbers>

#include "doctest.h"
#include "rhythm/summaries.hpp"
#include "support.hpp"

using namespace rhythm;

namespace {

// Archive with one probe per row of `masks`; masks[s][i][m] switches pair m on.
PosteriorArchive mask_archive(const std::vector<std::vector<std::vector<bool>>>& masks, Xoshiro256& rng) {
  PosteriorArchive a;
  a.p = static_cast<std::int64_t>(masks[0].size());
  a.q = static_cast<std::int64_t>(masks[0][0].size());
  a.n_local = 1;
  for (std::int64_t i = 0; i < a.p; ++i) a.probe_ids.push_back("g" + std::to_string(i));
  for (std::int64_t m = 0; m < a.q; ++m) a.periods.push_back(4.0 * static_cast<double>(m + 1));
  for (const auto& sample : masks) {
    Eigen::MatrixXd th = Eigen::MatrixXd::Zero(a.p, 2 * a.q);
    for (std::int64_t i = 0; i < a.p; ++i)
      for (std::int64_t m = 0; m < a.q; ++m)
        if (sample[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)]) {
          th(i, 2 * m) = normal(rng) + 3;
          th(i, 2 * m + 1) = normal(rng);
        }
    a.append(th, Eigen::MatrixXd::Zero(a.p, 1), Eigen::VectorXd::Ones(a.p), 1, 1, 1, 1, 1);
  }
  return a;
}

std::vector<std::vector<std::vector<bool>>> random_masks(Xoshiro256& rng, int n, int p, int q, double on) {
  std::vector<std::vector<std::vector<bool>>> out(static_cast<std::size_t>(n));
  for (auto& s : out) {
    s.assign(static_cast<std::size_t>(p), std::vector<bool>(static_cast<std::size_t>(q)));
    for (auto& row : s)
      for (std::size_t m = 0; m < row.size(); ++m) row[m] = uniform_open(rng) < on;
  }
  return out;
}

}  // namespace

TEST_CASE("rhythm probabilities") {
  Xoshiro256 rng(1);
  SUBCASE("only the last pair on") {
    std::vector<std::vector<std::vector<bool>>> masks(10, {{false, false, false, false, true}});
    const auto a = mask_archive(masks, rng);
    CHECK(prob_circadian(a, 0) == 1.0);
    CHECK(prob_periodic(a, 0) == 1.0);
    for (int m = 0; m < 4; ++m) CHECK(prob_pair_zero(a, 0, m) == 1.0);
  }
  SUBCASE("never the last pair") {
    std::vector<std::vector<std::vector<bool>>> masks(10, {{true, false, false, false, false}});
    const auto a = mask_archive(masks, rng);
    CHECK(prob_circadian(a, 0) == 0.0);
    CHECK(prob_periodic(a, 0) == 1.0);
    CHECK(prob_circadian(a, 0, 0) == 1.0);
  }
  SUBCASE("two active pairs and the zero sample contribute nothing") {
    std::vector<std::vector<std::vector<bool>>> masks{{{true, true, false}}, {{false, false, false}}};
    const auto a = mask_archive(masks, rng);
    CHECK(prob_periodic(a, 0) == 0.0);
  }
  SUBCASE("enumeration oracle") {
    for (int rep = 0; rep < 30; ++rep) {
      const int n = testing::random_int(rng, 1, 15);
      const int p = testing::random_int(rng, 1, 5);
      const int q = testing::random_int(rng, 1, 5);
      const auto masks = random_masks(rng, n, p, q, 0.3);
      const auto a = mask_archive(masks, rng);
      const auto scores = rhythm_scores(a);
      for (int i = 0; i < p; ++i) {
        int periodic = 0, circ = 0;
        std::vector<int> per(static_cast<std::size_t>(q), 0);
        for (const auto& s : masks) {
          const auto& row = s[static_cast<std::size_t>(i)];
          const int on = static_cast<int>(std::count(row.begin(), row.end(), true));
          if (on == 1) {
            ++periodic;
            const auto m = std::find(row.begin(), row.end(), true) - row.begin();
            ++per[static_cast<std::size_t>(m)];
            if (m == q - 1) ++circ;
          }
        }
        CHECK(prob_periodic(a, i) == doctest::Approx(periodic / double(n)));
        CHECK(prob_circadian(a, i) == doctest::Approx(circ / double(n)));
        CHECK(prob_circadian(a, i) <= prob_periodic(a, i));
        const auto& sc = scores[static_cast<std::size_t>(i)];
        double total = 0;
        for (int m = 0; m < q; ++m) {
          CHECK(sc.prob_per_period[static_cast<std::size_t>(m)] == doctest::Approx(per[static_cast<std::size_t>(m)] / double(n)));
          total += sc.prob_per_period[static_cast<std::size_t>(m)];
        }
        CHECK(total <= sc.prob_periodic + 1e-12);
        CHECK(sc.beta == doctest::Approx(1 - sc.prob_circadian));
      }
    }
  }
  SUBCASE("empty archive") {
    PosteriorArchive a;
    a.p = 1;
    a.q = 1;
    CHECK_THROWS(prob_circadian(a, 0));
  }
}

TEST_CASE("amplitude and phase") {
  auto ap = amplitude_phase(0, 2.5);
  CHECK(ap.amplitude == 2.5);
  CHECK(*ap.phase == 0.0);
  ap = amplitude_phase(3, 4);
  CHECK(ap.amplitude == 5.0);
  CHECK(*ap.phase == doctest::Approx(0.6435011087932844));
  ap = amplitude_phase(0, 0);
  CHECK(ap.amplitude == 0.0);
  CHECK_FALSE(ap.phase.has_value());
  CHECK_FALSE(ap.phase_quadrant.has_value());
  CHECK(*amplitude_phase(-3, -4).phase_quadrant == doctest::Approx(std::atan2(-3.0, -4.0)));
  CHECK(*amplitude_phase(1, 0).phase == doctest::Approx(std::numbers::pi / 2));
  CHECK(*amplitude_phase(-1, 0).phase == doctest::Approx(std::numbers::pi / 2));
}

TEST_CASE("amplitude-phase round trip through the sinusoid") {
  Xoshiro256 rng(2);
  const double w = 24;
  for (int rep = 0; rep < 2000; ++rep) {
    const double s = 3 * normal(rng);
    const double c = 3 * normal(rng);
    const auto ap = amplitude_phase(s, c);
    // f(t) = A cos(2 pi t / w - psi); project onto sin and cos over one period.
    const int n = 48;
    double ps = 0, pc = 0;
    for (int j = 0; j < n; ++j) {
      const double t = w * j / n;
      const double f = ap.amplitude * std::cos(2 * std::numbers::pi * t / w - *ap.phase_quadrant);
      ps += f * std::sin(2 * std::numbers::pi * t / w);
      pc += f * std::cos(2 * std::numbers::pi * t / w);
    }
    CHECK(std::abs(2 * ps / n - s) < 1e-10);
    CHECK(std::abs(2 * pc / n - c) < 1e-10);
    const Eigen::Vector2d back = pair_from_amplitude_phase(ap.amplitude, *ap.phase_quadrant);
    CHECK(std::abs(back[0] - s) < 1e-10);
    CHECK(std::abs(back[1] - c) < 1e-10);
    // the printed arctan phase recovers the pair up to a sign
    const Eigen::Vector2d alt = pair_from_amplitude_phase(ap.amplitude, *ap.phase);
    CHECK(std::min((alt - back).norm(), (alt + back).norm()) < 1e-10);
    CHECK(amplitude_phase(c, s).amplitude == ap.amplitude);
  }
}

TEST_CASE("sample quantiles") {
  CHECK(sample_quantile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(sample_quantile({5}, 0.975) == 5);
  CHECK(sample_quantile({3, 1, 2}, 0) == 1);
  CHECK(sample_quantile({3, 1, 2}, 1) == 3);
  CHECK(sample_quantile({0, 10}, 0.25) == 2.5);
  CHECK_THROWS(sample_quantile({}, 0.5));
}

TEST_CASE("FDR discovery list") {
  auto d = fdr_select({0, 0, 0}, 0.05);
  CHECK(d.selected.size() == 3);
  CHECK(d.expected_fdr == 0.0);
  d = fdr_select({0.5, 0.01, 0.04}, 0.05);
  REQUIRE(d.selected.size() == 2);
  CHECK(d.selected[0] == 1);
  CHECK(d.selected[1] == 2);
  CHECK(d.kappa == 0.04);
  CHECK(d.expected_fdr == doctest::Approx(0.025));
  CHECK(fdr_select({0.2, 0.2, 0.2}, 0.05).selected.empty());
  CHECK(fdr_select({0.2, 0.0}, 0.0).selected.size() == 1);
  CHECK_THROWS(fdr_select({}, 0.05));
  CHECK_THROWS(fdr_select({1.5}, 0.05));
}

TEST_CASE("FDR selection matches prefix enumeration and is monotone") {
  Xoshiro256 rng(3);
  for (int rep = 0; rep < 2000; ++rep) {
    const int n = testing::random_int(rng, 1, 12);
    std::vector<double> betas;
    for (int i = 0; i < n; ++i) betas.push_back(testing::random_int(rng, 0, 64) / 64.0);
    const double k_star = testing::random_int(rng, 0, 40) / 64.0;
    const auto d = fdr_select(betas, k_star);
    std::vector<double> sorted = betas;
    std::sort(sorted.begin(), sorted.end());
    // largest prefix ending at a tie boundary whose mean stays under k_star
    std::size_t best = 0;
    for (std::size_t len = 1; len <= sorted.size(); ++len) {
      if (len < sorted.size() && sorted[len] == sorted[len - 1]) continue;
      double sum = 0;
      for (std::size_t j = 0; j < len; ++j) sum += sorted[j];
      if (sum / static_cast<double>(len) <= k_star) best = len;
    }
    CHECK(d.selected.size() == best);
    CHECK(d.expected_fdr <= k_star);
    for (const auto idx : d.selected) CHECK(betas[idx] <= d.kappa);
    const auto wider = fdr_select(betas, std::min(1.0, k_star + 0.1));
    CHECK(wider.selected.size() >= d.selected.size());
  }
}

TEST_CASE("correlation from factors") {
  Eigen::MatrixXd L(2, 1);
  L << 1, 1;
  const auto c = correlation_from_factors(L, Eigen::Vector2d(1, 1));
  CHECK(c(0, 1) == doctest::Approx(0.5));
  CHECK(c(1, 0) == doctest::Approx(0.5));
  const auto z = correlation_from_factors(Eigen::MatrixXd::Zero(3, 2), Eigen::Vector3d(1, 2, 3));
  CHECK(z.isIdentity(0));
  CHECK(correlation_edges(z, 0.3).empty());
  CHECK_THROWS(correlation_edges(z, 1.5));

  Xoshiro256 rng(4);
  const Eigen::MatrixXd R = correlation_from_factors(testing::random_matrix(rng, 6, 3),
                                                     testing::random_uniform(rng, 6, 1, 0.1, 1));
  CHECK((R - R.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  for (int i = 0; i < 6; ++i) CHECK(R(i, i) == 1.0);
  const auto edges = correlation_edges(R, 0.45);
  for (const auto& e : edges) CHECK(std::abs(e.corr) >= 0.45);
}

TEST_CASE("posterior correlation averages snapshots") {
  PosteriorArchive a;
  a.p = 2;
  a.q = 1;
  a.n_local = 1;
  Eigen::MatrixXd L(2, 1);
  L << 1, 1;
  for (int s = 0; s < 2; ++s) {
    a.append(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 1), Eigen::VectorXd::Ones(2), 1, 1, 1, 1, 1);
    a.snapshots.push_back(FactorSnapshot{static_cast<std::uint64_t>(s), s == 0 ? L : Eigen::MatrixXd(-L), Eigen::MatrixXd::Zero(1, 1)});
  }
  CHECK(posterior_correlation(a)(0, 1) == doctest::Approx(0.5));
  CHECK(posterior_correlation(a, true)(0, 1) == doctest::Approx(0.5));
  a.snapshots.clear();
  CHECK(posterior_correlation(a).isIdentity(0));
}

TEST_CASE("ROC curve and AUC") {
  auto r = roc_and_fdr_curves({0.9, 0.8, 0.2, 0.1}, {true, true, false, false});
  CHECK(r.auc == 1.0);
  CHECK(r.points.front().tpr == 0.0);
  CHECK(r.points.back().tpr == 1.0);
  CHECK(r.points.back().fpr == 1.0);
  r = roc_and_fdr_curves({0.5, 0.5, 0.5, 0.5}, {true, false, true, false});
  CHECK(r.auc == 0.5);
  CHECK_THROWS(roc_and_fdr_curves({0.1, 0.2}, {true, true}));
  CHECK_THROWS(roc_and_fdr_curves({0.1}, {true, false}));
}

TEST_CASE("AUC equals the Mann-Whitney statistic") {
  Xoshiro256 rng(5);
  for (int rep = 0; rep < 500; ++rep) {
    const int n = testing::random_int(rng, 2, 20);
    std::vector<double> scores;
    std::vector<bool> truth;
    for (int i = 0; i < n; ++i) {
      scores.push_back(testing::random_int(rng, 0, 6));  // plenty of ties
      truth.push_back(uniform_open(rng) < 0.5);
    }
    truth[0] = true;
    truth[1] = false;
    double concordant = 0;
    long n1 = 0, n0 = 0;
    for (int i = 0; i < n; ++i) (truth[i] ? n1 : n0)++;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (truth[i] && !truth[j]) concordant += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
    const auto r = roc_and_fdr_curves(scores, truth);
    CHECK(r.auc == doctest::Approx(concordant / double(n1 * n0)).epsilon(1e-12));
    for (std::size_t k = 1; k < r.points.size(); ++k) {
      CHECK(r.points[k].tpr >= r.points[k - 1].tpr);
      CHECK(r.points[k].fpr >= r.points[k - 1].fpr);
      CHECK(r.points[k].fdr == doctest::Approx(double(r.points[k].fp) / double(r.points[k].fp + r.points[k].tp)));
    }
  }
}

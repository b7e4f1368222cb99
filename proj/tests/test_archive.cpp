#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "rhythm/archive.hpp"
#include "rhythm/model_state.hpp"
#include "support.hpp"

using namespace rhythm;

namespace {

PosteriorArchive random_archive(Xoshiro256& rng, int p, int q, int n_local, int n) {
  PosteriorArchive a;
  a.p = p;
  a.q = q;
  a.n_local = n_local;
  a.T = 6;
  a.mode = "dependent";
  for (int m = 0; m < q; ++m) a.periods.push_back(6.0 * (m + 1));
  for (int i = 0; i < p; ++i) a.probe_ids.push_back("g" + std::to_string(i));
  for (int t = 0; t < 6; ++t) a.time_hours.push_back(2.0 * t);
  a.factor_sum = testing::random_matrix(rng, p, 6);
  a.factor_sq_sum = testing::random_matrix(rng, p, 6);
  a.fitted_sum = testing::random_matrix(rng, p, 6);
  for (int s = 0; s < n; ++s) {
    const Eigen::MatrixXd tt = testing::random_matrix(rng, p, 2 * q);
    const Eigen::MatrixXd th = apply_theta_thresholds(tt, testing::random_uniform(rng, p, q, 0, 1.5));
    const Eigen::MatrixXd gt = testing::random_matrix(rng, p, n_local);
    const Eigen::MatrixXd g = apply_gamma_thresholds(gt, testing::random_uniform(rng, p, n_local, 0, 1));
    a.append(th, g, testing::random_uniform(rng, p, 1, 0.1, 2), 1 + s % 3, 1 + s, 2 + s, 0.5, 0.25);
    if (s % 2 == 0) {
      a.snapshots.push_back(
          FactorSnapshot{static_cast<std::uint64_t>(s), testing::random_matrix(rng, p, 2), testing::random_matrix(rng, 6, 2)});
    }
  }
  return a;
}

}  // namespace

TEST_CASE("bit vector packing") {
  BitVector b;
  Xoshiro256 rng(1);
  std::vector<bool> ref;
  for (int i = 0; i < 200; ++i) {
    const bool bit = uniform_open(rng) < 0.3;
    ref.push_back(bit);
    b.push_back(bit);
  }
  for (int i = 0; i < 200; ++i) CHECK(b[static_cast<std::size_t>(i)] == ref[static_cast<std::size_t>(i)]);
  const BitVector c = BitVector::from_words(b.words(), b.size());
  CHECK(c == b);
}

TEST_CASE("archive stores effective theta exactly") {
  Xoshiro256 rng(2);
  PosteriorArchive a;
  a.p = 3;
  a.q = 2;
  a.n_local = 2;
  std::vector<Eigen::MatrixXd> thetas;
  for (int s = 0; s < 20; ++s) {
    const Eigen::MatrixXd tt = testing::random_matrix(rng, 3, 4);
    thetas.push_back(apply_theta_thresholds(tt, testing::random_uniform(rng, 3, 2, 0, 1.5)));
    a.append(thetas.back(), Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Ones(3), 2, 1, 1, 1, 1);
  }
  CHECK(a.n_samples == 20);
  CHECK(a.masks_consistent());
  for (std::uint64_t s = 0; s < 20; ++s) {
    CHECK(a.theta(s) == thetas[s]);
    for (int i = 0; i < 3; ++i) {
      for (int m = 0; m < 2; ++m) {
        const bool on = thetas[s](i, 2 * m) != 0 || thetas[s](i, 2 * m + 1) != 0;
        CHECK(a.theta_active(s, i, m) == on);
        CHECK(a.theta_pair(s, i, m) == Eigen::Vector2d(thetas[s](i, 2 * m), thetas[s](i, 2 * m + 1)));
      }
    }
  }
}

TEST_CASE("archive stream round trip") {
  Xoshiro256 rng(3);
  const auto a = random_archive(rng, 5, 3, 4, 17);
  std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
  a.serialize(ss);
  const auto b = PosteriorArchive::deserialize(ss);
  CHECK(a == b);
  CHECK(b.masks_consistent());
}

TEST_CASE("archive directory round trip") {
  Xoshiro256 rng(4);
  const auto a = random_archive(rng, 4, 2, 3, 9);
  const auto dir = (std::filesystem::temp_directory_path() / "rhythm_archive_test").string();
  std::filesystem::remove_all(dir);
  write_archive_dir(a, dir, "{\"seed\": 1}");
  const auto b = read_archive_dir(dir);
  CHECK(a == b);
  std::filesystem::remove_all(dir);
  CHECK_THROWS(read_archive_dir(dir));
}

TEST_CASE("truncated stream is rejected") {
  Xoshiro256 rng(5);
  const auto a = random_archive(rng, 3, 2, 2, 4);
  std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
  a.serialize(ss);
  std::string bytes = ss.str();
  bytes.resize(bytes.size() / 2);
  std::istringstream is(bytes, std::ios::binary);
  CHECK_THROWS(PosteriorArchive::deserialize(is));
}

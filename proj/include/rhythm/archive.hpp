#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rhythm {

/// Shape-aware exact equality.
bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Packed bit storage for inclusion masks.
class BitVector {
 public:
  BitVector() = default;

  void push_back(bool bit) {
    if (size_ % 64 == 0) words_.push_back(0);
    if (bit) words_.back() |= std::uint64_t{1} << (size_ % 64);
    ++size_;
  }
  bool operator[](std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }
  std::size_t size() const { return size_; }
  const std::vector<std::uint64_t>& words() const { return words_; }

  static BitVector from_words(std::vector<std::uint64_t> words, std::size_t size);
  bool operator==(const BitVector&) const = default;

 private:
  std::vector<std::uint64_t> words_;
  std::size_t size_ = 0;
};

/// Loadings and factors kept for a subset of retained sweeps.
struct FactorSnapshot {
  std::uint64_t sample = 0;
  Eigen::MatrixXd Lambda;
  Eigen::MatrixXd Eta;

  bool operator==(const FactorSnapshot& o) const;
};

/// Thinned post-burn-in draws of the quantities the summaries need. Effective
/// theta pairs are stored only when active; masks hold the rest.
struct PosteriorArchive {
  std::int64_t p = 0;
  std::int64_t q = 0;
  std::int64_t n_local = 0;
  std::int64_t T = 0;
  std::string mode;
  std::vector<double> periods;
  std::vector<std::string> probe_ids;
  std::vector<double> time_hours;

  std::uint64_t n_samples = 0;
  BitVector theta_mask;              // (sample, probe, period)
  std::vector<double> theta_values;  // active pairs in mask order
  std::vector<std::uint64_t> theta_offsets;  // first value of each sample
  BitVector gamma_mask;              // (sample, probe, local)
  std::vector<double> sigma2;        // (sample, probe)
  std::vector<std::int64_t> k;
  std::vector<double> K_theta;
  std::vector<double> K_gamma;
  std::vector<double> theta_accept_rate;
  std::vector<double> gamma_accept_rate;
  std::vector<FactorSnapshot> snapshots;

  // Running sums over retained samples.
  Eigen::MatrixXd factor_sum;     // eta lambda_i, p x T
  Eigen::MatrixXd factor_sq_sum;  // squared entries
  Eigen::MatrixXd fitted_sum;     // full mean B theta + C gamma + eta lambda

  bool theta_active(std::uint64_t sample, std::int64_t i, std::int64_t m) const {
    return theta_mask[(sample * static_cast<std::uint64_t>(p) + static_cast<std::uint64_t>(i)) *
                          static_cast<std::uint64_t>(q) +
                      static_cast<std::uint64_t>(m)];
  }
  bool gamma_active(std::uint64_t sample, std::int64_t i, std::int64_t l) const {
    return gamma_mask[(sample * static_cast<std::uint64_t>(p) + static_cast<std::uint64_t>(i)) *
                          static_cast<std::uint64_t>(n_local) +
                      static_cast<std::uint64_t>(l)];
  }
  double sigma2_at(std::uint64_t sample, std::int64_t i) const {
    return sigma2[sample * static_cast<std::uint64_t>(p) + static_cast<std::uint64_t>(i)];
  }

  /// Effective p x 2q theta of one sample (zeros where shrunk).
  Eigen::MatrixXd theta(std::uint64_t sample) const;
  /// Effective pair (sin, cos) of probe i, period m in one sample. Linear scan
  /// within the sample.
  Eigen::Vector2d theta_pair(std::uint64_t sample, std::int64_t i, std::int64_t m) const;

  /// Append one retained draw.
  void append(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& gamma, const Eigen::VectorXd& sigma2_draw,
              std::int64_t rank, double k_theta, double k_gamma, double theta_rate, double gamma_rate);

  /// Verifies the stored pairs are zero exactly where masks are off.
  bool masks_consistent() const;

  bool operator==(const PosteriorArchive&) const;

  void serialize(std::ostream& os) const;
  static PosteriorArchive deserialize(std::istream& is);
};

/// Columnar on-disk layout: manifest.json plus one raw little-endian file per column.
void write_archive_dir(const PosteriorArchive& archive, const std::string& dir, const std::string& config_json);
PosteriorArchive read_archive_dir(const std::string& dir);

}  // namespace rhythm

#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

#include <Eigen/Dense>

namespace rhythm {

/// xoshiro256** generator. Satisfies UniformRandomBitGenerator so it plugs
/// into the <random> distributions.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed = 0x9E3779B97F4A7C15ULL) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  const std::array<std::uint64_t, 4>& state() const { return state_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { state_ = s; }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<std::uint64_t, 4> state_{};
};

/// Kinds of update that own an RNG substream inside one sweep.
enum class Stream : std::uint32_t {
  kW = 1,
  kZ,
  kLambda,
  kThetaMH,
  kGammaMH,
  kThetaThreshold,
  kGammaThreshold,
  kBounds,
  kSigma,
  kEta,
  kMgps,
  kAdapt,
  kInit,
  kData,
};

/// Independent generator for (seed, sweep, kind, index). The chain never
/// shares a generator across updates, so results do not depend on the order
/// in which per-probe work is scheduled.
inline Xoshiro256 substream(std::uint64_t seed, std::uint64_t sweep, Stream kind,
                            std::uint64_t index) {
  std::uint64_t x = seed;
  std::uint64_t h = Xoshiro256::splitmix64(x);
  x = h ^ (sweep * 0xD1B54A32D192ED03ULL);
  h = Xoshiro256::splitmix64(x);
  x = h ^ (static_cast<std::uint64_t>(kind) * 0xAEF17502108EF2D9ULL);
  h = Xoshiro256::splitmix64(x);
  x = h ^ (index * 0xF1357AEA2E62A9C5ULL);
  return Xoshiro256(Xoshiro256::splitmix64(x));
}

/// Uniform on the open interval (0, 1).
template <typename Rng>
double uniform_open(Rng& rng) {
  // 53 random mantissa bits, shifted off zero.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

template <typename Rng>
double normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

/// Gamma with shape/rate parameterization.
template <typename Rng>
double gamma_rate(Rng& rng, double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

template <typename Rng>
Eigen::VectorXd normal_vector(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

/// Draw from N(precision^{-1} b, precision^{-1}) given the Cholesky factor of
/// the precision matrix.
template <typename Rng>
Eigen::VectorXd gaussian_from_precision(const Eigen::LLT<Eigen::MatrixXd>& precision_llt,
                                        const Eigen::VectorXd& b, Rng& rng) {
  const Eigen::VectorXd mean = precision_llt.solve(b);
  const Eigen::VectorXd z = normal_vector(rng, b.size());
  // L L^T = P, so L^{-T} z has covariance P^{-1}.
  return mean + precision_llt.matrixU().solve(z);
}

}  // namespace rhythm

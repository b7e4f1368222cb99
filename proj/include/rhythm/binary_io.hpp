#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "rhythm/errors.hpp"

namespace rhythm::bin {

// Host byte order; every supported target is little-endian.
static_assert(std::endian::native == std::endian::little, "binary containers assume little-endian hosts");

template <typename T>
void put(std::ostream& os, const T& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  static_assert(std::is_trivially_copyable_v<T>);
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw InvalidInput("truncated binary container");
  return v;
}

template <typename T>
void put_vector(std::ostream& os, const std::vector<T>& v) {
  put<std::uint64_t>(os, v.size());
  if (!v.empty()) os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
std::vector<T> get_vector(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  std::vector<T> v(n);
  if (n) is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (!is) throw InvalidInput("truncated binary container");
  return v;
}

inline void put_string(std::ostream& os, const std::string& s) {
  put<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw InvalidInput("truncated binary container");
  return s;
}

template <typename Derived>
void put_matrix(std::ostream& os, const Eigen::PlainObjectBase<Derived>& m) {
  put<std::int64_t>(os, m.rows());
  put<std::int64_t>(os, m.cols());
  os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

inline Eigen::MatrixXd get_matrix(std::istream& is) {
  const auto r = get<std::int64_t>(is);
  const auto c = get<std::int64_t>(is);
  if (r < 0 || c < 0) throw InvalidInput("corrupt matrix header");
  Eigen::MatrixXd m(r, c);
  is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!is) throw InvalidInput("truncated binary container");
  return m;
}

inline Eigen::VectorXd get_column(std::istream& is) {
  const Eigen::MatrixXd m = get_matrix(is);
  if (m.cols() != 1 && m.size() != 0) throw InvalidInput("expected a column vector");
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

/// 64-bit FNV-1a.
class Fnv1a {
 public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001B3ULL;
    }
  }
  template <typename T>
  void update_value(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    update(&v, sizeof(T));
  }
  void update_string(const std::string& s) {
    update_value<std::uint64_t>(s.size());
    update(s.data(), s.size());
  }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xCBF29CE484222325ULL;
};

/// Write to `path.tmp` then rename over `path`.
void write_atomically(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

}  // namespace rhythm::bin

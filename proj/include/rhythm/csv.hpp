#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "rhythm/errors.hpp"

namespace rhythm {

/// Shortest decimal that round-trips a double; "nan"/"inf" spelled out.
inline std::string fmt_double(double v, int digits = 17) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InvalidInput("cannot write " + path);
  return os;
}

}  // namespace rhythm

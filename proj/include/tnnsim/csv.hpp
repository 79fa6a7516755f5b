#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace tnnsim::csv {

/// Shortest round-trip rendering used for every CSV number; infinities are
/// written as `inf` / `-inf`.
inline std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace tnnsim::csv

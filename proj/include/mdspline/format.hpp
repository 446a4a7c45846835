#pragma once

// Locale-independent, shortest round-trip formatting of doubles for TSV
// and CSV output.

#include <charconv>
#include <cmath>
#include <string>

namespace mdspline {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace mdspline

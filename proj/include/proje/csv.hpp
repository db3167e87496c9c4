#pragma once

#include <cstdio>
#include <string>

namespace proje {

/// Round-trip-exact decimal formatting for CSV cells.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace proje

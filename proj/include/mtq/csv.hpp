#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <type_traits>

namespace mtq::csv {

/// Round-trip decimal form of a double (17 significant digits).
inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename... Cols>
void row(std::ostream& os, const Cols&... cols) {
  bool first = true;
  auto put = [&](const auto& c) {
    if (!first) os << ',';
    first = false;
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(c)>>)
      os << num(c);
    else
      os << c;
  };
  (put(cols), ...);
  os << '\n';
}

}  // namespace mtq::csv

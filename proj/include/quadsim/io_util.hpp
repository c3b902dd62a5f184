#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace quadsim {

// Shortest round-trip decimal representation; keeps CSV output byte-stable.
inline void append_double(std::string& out, double v) {
  if (std::isinf(v)) {
    out += v > 0 ? "inf" : "-inf";
    return;
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline std::string double_str(double v) {
  std::string s;
  append_double(s, v);
  return s;
}

}  // namespace quadsim

#pragma once

#include <charconv>
#include <string>

namespace gbees {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string formatNumber(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace gbees

#pragma once

#include <charconv>
#include <string>

namespace maskedge::internal {

// Shortest round-trip decimal form; reparsing yields the identical double.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace maskedge::internal

#pragma once

#include <charconv>
#include <string>

namespace esci {

/// Shortest decimal string that parses back to the same binary64 value.
inline std::string format_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace esci

#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace perclap {

/// Shortest round-trip decimal form; locale independent, '.' separator.
inline std::string format_double(double value) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, end);
}

}  // namespace perclap

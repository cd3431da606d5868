#pragma once

#include <charconv>
#include <string>

#include "semcom/tensor.hpp"

namespace semcom {

/// Shortest decimal text that parses back to exactly `v` ("inf" / "-inf" for infinities).
inline std::string format_real(real v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace semcom

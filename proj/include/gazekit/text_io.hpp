#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "gazekit/error.hpp"

namespace gazekit {

/// Round-trip-exact decimal rendering of a double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& token, const std::string& where) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &pos);
  } catch (const std::exception&) {
    fail(ErrorKind::ParseError, where + ": bad number '" + token + "'");
  }
  if (pos != token.size()) fail(ErrorKind::ParseError, where + ": bad number '" + token + "'");
  return v;
}

inline std::vector<std::string> split_whitespace(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

}  // namespace gazekit

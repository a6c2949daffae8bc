// Copyright 2026 The deeplms Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Text serialization helpers shared by the channel file format and canceler
// state snapshots. Doubles are written with 17 significant digits so that a
// write/read cycle reproduces every IEEE-754 value bit-exactly.

#ifndef DLMS_IO_HPP
#define DLMS_IO_HPP

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dlms/linalg.hpp"

namespace dlms {

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

/// One complex value as "re,im" (no spaces).
inline std::string format_complex(Complex z) {
  return format_double(z.real()) + "," + format_double(z.imag());
}

inline double parse_double(const std::string& tok) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    throw std::runtime_error("malformed number: '" + tok + "'");
  return v;
}

inline Complex parse_complex(const std::string& tok) {
  auto comma = tok.find(',');
  if (comma == std::string::npos)
    throw std::runtime_error("malformed complex entry: '" + tok + "'");
  char* end = nullptr;
  double re = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + comma)
    throw std::runtime_error("malformed complex entry: '" + tok + "'");
  double im = std::strtod(tok.c_str() + comma + 1, &end);
  if (*end != '\0')
    throw std::runtime_error("malformed complex entry: '" + tok + "'");
  return {re, im};
}

/// Writes a complex matrix as rows*cols followed by row-major "re,im" tokens,
/// all on one line.
inline void write_matrix(std::ostream& os, const CMatrix& m) {
  os << m.rows() << ' ' << m.cols();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      os << ' ' << format_complex(m(i, j));
  os << '\n';
}

inline CMatrix read_matrix(std::istream& is) {
  Eigen::Index rows = 0, cols = 0;
  if (!(is >> rows >> cols) || rows <= 0 || cols <= 0)
    throw std::runtime_error("malformed matrix header");
  CMatrix m(rows, cols);
  std::string tok;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!(is >> tok)) throw std::runtime_error("truncated matrix record");
      m(i, j) = parse_complex(tok);
    }
  return m;
}

}  // namespace dlms

#endif  // DLMS_IO_HPP

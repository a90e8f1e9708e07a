// src/common.hpp

// Copyright 2026  The eigenmerge authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef EIGENMERGE_COMMON_HPP_
#define EIGENMERGE_COMMON_HPP_

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>

namespace eigenmerge {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian and rely on a little-endian host");

// Error classes, one per exit-code family of the command-line tool.
// UsageError -> 2, DataError -> 3, NumericError -> 4, IoError -> 3.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t Fnv1a64(std::string_view bytes,
                             std::uint64_t state = kFnvOffsetBasis) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= kFnvPrime;
  }
  return state;
}

// Shortest decimal form that parses back to the same double.
inline std::string FormatDouble(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void StoreLeU64(std::uint64_t v, char* out) { std::memcpy(out, &v, 8); }

inline std::uint64_t LoadLeU64(const char* in) {
  std::uint64_t v;
  std::memcpy(&v, in, 8);
  return v;
}

}  // namespace eigenmerge

#endif  // EIGENMERGE_COMMON_HPP_

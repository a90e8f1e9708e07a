// src/rng.hpp

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

#ifndef EIGENMERGE_RNG_HPP_
#define EIGENMERGE_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "common.hpp"

namespace eigenmerge {

// splitmix64 (Steele, Lea, Flood 2014).  Chosen over std::mt19937_64 +
// std::normal_distribution because the distribution adaptors are
// implementation-defined; seeded pipelines must produce the same bytes on
// every toolchain.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t Next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in (0, 1]; never zero, so it is safe under log().
  double NextUnitOpen() {
    return static_cast<double>((Next() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform in [0, 1).
  double NextUnit() { return static_cast<double>(Next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// Standard normal draws via Box-Muller on a splitmix64 stream.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

  double Next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = rng_.NextUnitOpen();
    double u2 = rng_.NextUnit();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  SplitMix64 rng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Distinct deterministic sub-streams from one root seed, keyed by name.
inline std::uint64_t DeriveSeed(std::uint64_t root, std::string_view stream) {
  return Fnv1a64(stream, kFnvOffsetBasis ^ root);
}

}  // namespace eigenmerge

#endif  // EIGENMERGE_RNG_HPP_

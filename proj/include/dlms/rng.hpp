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

#ifndef DLMS_RNG_HPP
#define DLMS_RNG_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>

namespace dlms {

/// Splitmix64 mixing step; used both as a stand-alone mixer and to seed
/// the main generator state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Folds an arbitrary list of ids into a single stream identifier so that
/// logically distinct streams (pilots vs. noise, per tone, per trial) never
/// collide for any reasonable seed choice.
inline std::uint64_t derive_stream(std::initializer_list<std::uint64_t> ids) {
  std::uint64_t acc = 0x8f1b5c4d2a9e6073ULL;
  for (std::uint64_t id : ids) {
    acc ^= id + 0x9e3779b97f4a7c15ULL + (acc << 6) + (acc >> 2);
    splitmix64(acc);
  }
  return acc;
}

/// Seeded xoshiro256++ stream. Each instance is an independent, reproducible
/// random stream identified by (seed, stream). Instances are cheap to create
/// and must not be shared between threads.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}

  RngStream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t sm = seed ^ (stream * 0xda942042e4dd58b5ULL);
    for (auto& word : state_) word = splitmix64(sm);
    // xoshiro state must not be all-zero; splitmix output never is for all
    // four words simultaneously, but guard anyway.
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log1p(-u1));  // log(1-u1), u1 < 1
    double c = std::cos(6.283185307179586476925286766559 * u2);
    double s = std::sin(6.283185307179586476925286766559 * u2);
    cached_ = r * s;
    have_cached_ = true;
    return r * c;
  }

  /// Circularly symmetric complex Gaussian (x + jy)/sqrt(2) scaled by sigma,
  /// i.e. E{|z|^2} = sigma^2.
  std::complex<double> complex_normal(double sigma = 1.0) {
    const double inv_sqrt2 = 0.70710678118654752440;
    return {sigma * inv_sqrt2 * normal(), sigma * inv_sqrt2 * normal()};
  }

  /// QPSK symbol drawn uniformly from {(+-1 +-j)/sqrt(2)}; unit modulus.
  std::complex<double> qpsk() {
    const double a = 0.70710678118654752440;
    std::uint64_t bits = next_u64();
    return {(bits & 1) ? a : -a, (bits & 2) ? a : -a};
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace dlms

#endif  // DLMS_RNG_HPP

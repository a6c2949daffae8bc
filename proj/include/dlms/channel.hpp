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

// Synthetic per-tone MIMO channel model for a vectored copper binder.
//
// The generator produces one complex N x N matrix per frequency bin with a
// controllable diagonal-dominance profile: direct gains decay with frequency
// and loop length, crosstalk coupling grows with frequency, and the row
// dominance ratio |h_ii| / sum_{j != i} |h_ij| crosses 1 at a configurable
// frequency. A block construction turns a uniform binder into a near-far
// scenario with mixed loop lengths.

#ifndef DLMS_CHANNEL_HPP
#define DLMS_CHANNEL_HPP

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlms/io.hpp"
#include "dlms/linalg.hpp"
#include "dlms/rng.hpp"

namespace dlms {

/// Channel state of one frequency bin: un-normalized channel matrix H whose
/// columns are the per-user channel vectors, plus the noise variance of the
/// power-normalized received signal r = H^H d + v, v ~ CN(0, noise_variance I).
struct ToneChannel {
  int tone_index = 0;
  double frequency_hz = 0.0;
  CMatrix H;               // N x N, diagonal entries must be nonzero
  double noise_variance = 1e-8;

  int n_users() const { return static_cast<int>(H.rows()); }
};

struct NoiseProfile {
  double psd_low_dbm_hz = -140.0;   // below break_hz
  double psd_high_dbm_hz = -150.0;  // at and above break_hz
  double break_hz = 30e6;

  double psd_dbm_hz(double f_hz) const {
    return f_hz < break_hz ? psd_low_dbm_hz : psd_high_dbm_hz;
  }
};

/// Parameters of the synthetic binder.
///
/// Direct path: |h_ii(f)| = 10^(-atten_db(f)/20) with
///   atten_db(f) = direct_atten_db_per_m_sqrt_mhz * length_m * sqrt(f/1MHz),
/// phases uniform per (tone, user). Crosstalk: h_ij = c(f) * g_ij with
/// g_ij iid CN(0,1) and c(f) calibrated so the expected row dominance ratio
/// equals 1 at dominance_crossover_hz and falls as (crossover/f)^growth
/// beyond it (times the extra direct-path attenuation).
struct CableConfig {
  int n_users = 10;
  int tone_count = 32;
  double first_tone_hz = 17e6;
  double tone_spacing_hz = 2.5e6;
  double length_m = 100.0;
  double direct_atten_db_per_m_sqrt_mhz = 0.035;
  double fext_coupling_strength = 1.0;  // 0 disables crosstalk entirely
  double fext_growth_exponent = 1.5;
  double dominance_crossover_hz = 30e6;
  double tx_psd_dbm_hz = -65.0;
  NoiseProfile noise;

  double tone_frequency(int k) const { return first_tone_hz + k * tone_spacing_hz; }
};

namespace detail {

inline double direct_magnitude(const CableConfig& cfg, double f_hz) {
  double atten_db =
      cfg.direct_atten_db_per_m_sqrt_mhz * cfg.length_m * std::sqrt(f_hz / 1e6);
  return std::pow(10.0, -atten_db / 20.0);
}

// E|g| for g ~ CN(0,1)
constexpr double kMeanAbsCn = 0.88622692545275801365;

inline double coupling_scale(const CableConfig& cfg, double f_hz) {
  if (cfg.fext_coupling_strength == 0.0 || cfg.n_users < 2) return 0.0;
  double mag_at_crossover = direct_magnitude(cfg, cfg.dominance_crossover_hz);
  double c0 = mag_at_crossover / (kMeanAbsCn * (cfg.n_users - 1));
  return cfg.fext_coupling_strength * c0 *
         std::pow(f_hz / cfg.dominance_crossover_hz, cfg.fext_growth_exponent);
}

}  // namespace detail

inline void validate(const CableConfig& cfg) {
  if (cfg.n_users < 2) throw std::invalid_argument("cable config: need at least 2 users");
  if (cfg.tone_count < 1) throw std::invalid_argument("cable config: empty tone grid");
  if (cfg.first_tone_hz <= 0 || cfg.tone_spacing_hz <= 0)
    throw std::invalid_argument("cable config: invalid tone grid");
  if (cfg.fext_coupling_strength < 0)
    throw std::invalid_argument("cable config: negative coupling strength");
  if (cfg.fext_coupling_strength > 0) {
    double lo = cfg.first_tone_hz;
    double hi = cfg.tone_frequency(cfg.tone_count - 1);
    if (cfg.dominance_crossover_hz < lo || cfg.dominance_crossover_hz > hi)
      throw std::invalid_argument(
          "cable config: dominance crossover outside the tone grid");
  }
}

/// Generates the per-tone channel matrices of one binder realization.
/// Deterministic in (config, seed): the same inputs yield bit-identical
/// matrices.
inline std::vector<ToneChannel> generate_cable(const CableConfig& cfg,
                                               std::uint64_t seed) {
  validate(cfg);
  const int n = cfg.n_users;
  std::vector<ToneChannel> tones;
  tones.reserve(cfg.tone_count);
  for (int k = 0; k < cfg.tone_count; ++k) {
    const double f = cfg.tone_frequency(k);
    RngStream rng(seed, derive_stream({0x10c4u, static_cast<std::uint64_t>(k)}));
    ToneChannel tc;
    tc.tone_index = k;
    tc.frequency_hz = f;
    tc.H = CMatrix::Zero(n, n);

    const double mag = detail::direct_magnitude(cfg, f);
    const double c = detail::coupling_scale(cfg, f);
    for (int i = 0; i < n; ++i) {
      double phase = 6.283185307179586476925286766559 * rng.uniform();
      tc.H(i, i) = Complex(mag * std::cos(phase), mag * std::sin(phase));
    }
    if (c > 0.0) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (i != j) tc.H(i, j) = c * rng.complex_normal();
    }

    tc.noise_variance =
        std::pow(10.0, (cfg.noise.psd_dbm_hz(f) - cfg.tx_psd_dbm_hz) / 10.0);
    tones.push_back(std::move(tc));
  }
  return tones;
}

/// Row dominance ratios: entry i is |h_ii| / sum_{j != i} |h_ij|, with +inf
/// when the off-diagonal row sum is zero.
inline RVector dominance_ratio(const ToneChannel& ch) {
  const int n = ch.n_users();
  RVector out(n);
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) off += std::abs(ch.H(i, j));
    out(i) = off == 0.0 ? std::numeric_limits<double>::infinity()
                        : std::abs(ch.H(i, i)) / off;
  }
  return out;
}

/// Builds a near-far variant: the last (N - near_count) users sit on a longer
/// loop, modeled by left-multiplying every H with blockdiag(I, H22) where H22
/// is the lower-right block of that tone's H. Inputs are left unmodified.
inline std::vector<ToneChannel> make_near_far(const std::vector<ToneChannel>& chans,
                                              int near_count) {
  std::vector<ToneChannel> out;
  out.reserve(chans.size());
  for (const auto& ch : chans) {
    const int n = ch.n_users();
    if (near_count <= 0 || near_count >= n)
      throw std::invalid_argument("make_near_far: near_count out of range");
    const int far = n - near_count;
    ToneChannel nf = ch;
    // Only the bottom block rows change: [H21 H22] -> H22 * [H21 H22].
    nf.H.bottomRows(far) = ch.H.block(near_count, near_count, far, far) *
                           ch.H.bottomRows(far);
    out.push_back(std::move(nf));
  }
  return out;
}

/// Channel text format: one record per tone,
///   tone_index frequency N re,im ... (N^2 row-major entries) noise_variance
/// Values round-trip bit-exactly (17 significant digits).
inline void save_channels(std::ostream& os, const std::vector<ToneChannel>& chans) {
  for (const auto& ch : chans) {
    os << ch.tone_index << ' ' << format_double(ch.frequency_hz) << ' '
       << ch.n_users();
    for (Eigen::Index i = 0; i < ch.H.rows(); ++i)
      for (Eigen::Index j = 0; j < ch.H.cols(); ++j)
        os << ' ' << format_complex(ch.H(i, j));
    os << ' ' << format_double(ch.noise_variance) << '\n';
  }
}

inline void save_channels(const std::string& path,
                          const std::vector<ToneChannel>& chans) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open channel file for writing: " + path);
  save_channels(os, chans);
}

inline std::vector<ToneChannel> load_channels(std::istream& is) {
  std::vector<ToneChannel> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ToneChannel ch;
    int n = 0;
    std::string freq_tok;
    if (!(ls >> ch.tone_index >> freq_tok >> n) || n < 2)
      throw std::runtime_error("malformed channel record: " + line);
    ch.frequency_hz = parse_double(freq_tok);
    ch.H.resize(n, n);
    std::string tok;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (!(ls >> tok)) throw std::runtime_error("truncated channel record");
        ch.H(i, j) = parse_complex(tok);
      }
    if (!(ls >> tok)) throw std::runtime_error("truncated channel record");
    ch.noise_variance = parse_double(tok);
    out.push_back(std::move(ch));
  }
  return out;
}

inline std::vector<ToneChannel> load_channels(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open channel file: " + path);
  return load_channels(is);
}

}  // namespace dlms

#endif  // DLMS_CHANNEL_HPP

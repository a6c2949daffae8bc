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

// Pilot and noise generation for the per-tone signal model
//   r[n] = H^H d[n] + v[n],   u[n] = W_P^H r[n],
// together with the exact second-order statistics of the preprocessed
// signal u.

#ifndef DLMS_SIGNAL_HPP
#define DLMS_SIGNAL_HPP

#include <stdexcept>

#include "dlms/channel.hpp"
#include "dlms/linalg.hpp"
#include "dlms/rng.hpp"

namespace dlms {

enum class PilotKind { complex_gaussian, qpsk };

/// Stateful pilot stream. Complex-Gaussian pilots have E{d d^H} = I and are
/// independent across draws; QPSK pilots have unit modulus exactly.
struct PilotSource {
  PilotKind kind = PilotKind::complex_gaussian;
  RngStream stream;

  PilotSource() = default;
  PilotSource(PilotKind k, std::uint64_t seed, std::uint64_t stream_id = 0x9110u)
      : kind(k), stream(seed, stream_id) {}
};

inline CVector draw_pilot(PilotSource& src, int n_users) {
  CVector d(n_users);
  if (src.kind == PilotKind::complex_gaussian) {
    for (int i = 0; i < n_users; ++i) d(i) = src.stream.complex_normal();
  } else {
    for (int i = 0; i < n_users; ++i) d(i) = src.stream.qpsk();
  }
  return d;
}

/// r = H^H d + v with v ~ CN(0, noise_variance I). The noiseless flag yields
/// the exact zero-noise limit without consuming random draws.
inline CVector received_signal(const ToneChannel& ch, const CVector& d,
                               RngStream& noise, bool noiseless = false) {
  if (d.size() != ch.H.rows())
    throw std::invalid_argument("received_signal: pilot dimension mismatch");
  CVector r = ch.H.adjoint() * d;
  if (!noiseless) {
    const double sigma = std::sqrt(ch.noise_variance);
    for (Eigen::Index i = 0; i < r.size(); ++i)
      r(i) += noise.complex_normal(sigma);
  }
  return r;
}

/// Exact second-order statistics of u = W_P^H r for unit-power pilots:
///   R         = Ht^H Ht + noise_cov,     Ht = H W_P
///   R_ud      = E{u d^H} = Ht^H
///   noise_cov = sigma_v^2 W_P^H W_P      (covariance of W_P^H v)
///   sigma_tilde(i) = noise_cov(i,i)
struct SecondOrderStats {
  CMatrix R;
  CMatrix R_ud;
  CMatrix noise_cov;
  RVector sigma_tilde;

  double trace() const { return R.diagonal().real().sum(); }
};

inline SecondOrderStats exact_stats(const ToneChannel& ch, const CMatrix& W_P) {
  SecondOrderStats s;
  CMatrix Ht = ch.H * W_P;
  s.noise_cov = ch.noise_variance * (W_P.adjoint() * W_P);
  s.R = Ht.adjoint() * Ht + s.noise_cov;
  s.R = Complex(0.5, 0.0) * (s.R + s.R.adjoint().eval());  // exact Hermitian
  s.R_ud = Ht.adjoint();
  s.sigma_tilde = s.noise_cov.diagonal().real();
  return s;
}

}  // namespace dlms

#endif  // DLMS_SIGNAL_HPP

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

// Input/output SINR, output MSE and achievable-rate evaluation from canceler
// state and channel ground truth.
//
// Conventions: with effective channels Ht = H W_P (canceler input) and
// Hc = H W_P W (canceler output), the signal of user i flows through column i,
// so the residual interference of user i is the off-diagonal part of column i.

#ifndef DLMS_METRICS_HPP
#define DLMS_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "dlms/channel.hpp"
#include "dlms/linalg.hpp"

namespace dlms {

/// Composite channel seen at the canceler output: Hc = H W_P W plus the
/// per-user variance of the filtered noise (W_P W)^H v.
struct EffectiveChannel {
  CMatrix H_check;
  RVector noise_var_out;
};

inline EffectiveChannel effective_channel(const ToneChannel& ch,
                                          const CMatrix& W_P, const CMatrix& W) {
  EffectiveChannel eff;
  CMatrix M = W_P * W;
  eff.H_check = ch.H * M;
  eff.noise_var_out = ch.noise_variance * M.colwise().squaredNorm().transpose();
  return eff;
}

/// Per-user SINR at the LMS input after preprocessing by W_P:
///   Phi_i = |ht_ii|^2 / (sum_{j != i} |ht_ji|^2 + sigma_tilde_i^2),
/// with ht the entries of H W_P and sigma_tilde_i^2 the filtered noise
/// variance. The minimum over users is phi.minCoeff().
inline RVector input_sinr(const ToneChannel& ch, const CMatrix& W_P) {
  const int n = ch.n_users();
  CMatrix Ht = ch.H * W_P;
  RVector phi(n);
  for (int i = 0; i < n; ++i) {
    double interference =
        std::max(0.0, Ht.col(i).squaredNorm() - std::norm(Ht(i, i)));
    double noise = ch.noise_variance * W_P.col(i).squaredNorm();
    phi(i) = std::norm(Ht(i, i)) / (interference + noise);
  }
  return phi;
}

/// Per-user SINR at the canceler output through Hc = H W_P W.
inline RVector output_sinr(const EffectiveChannel& eff) {
  const Eigen::Index n = eff.H_check.rows();
  RVector psi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double interference =
        std::max(0.0, eff.H_check.col(i).squaredNorm() - std::norm(eff.H_check(i, i)));
    psi(i) = std::norm(eff.H_check(i, i)) / (interference + eff.noise_var_out(i));
  }
  return psi;
}

/// Per-user output MSE E{|d_i - x_i|^2} of the current filter:
///   eps_i = |1 - hc_ii|^2 + sum_{j != i} |hc_ji|^2 + noise_var_out_i.
inline RVector output_mse(const EffectiveChannel& eff) {
  const Eigen::Index n = eff.H_check.rows();
  RVector eps(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double interference =
        std::max(0.0, eff.H_check.col(i).squaredNorm() - std::norm(eff.H_check(i, i)));
    eps(i) = std::norm(Complex(1.0, 0.0) - eff.H_check(i, i)) + interference +
             eff.noise_var_out(i);
  }
  return eps;
}

/// Bits loaded on one tone at the given linear SINR, capped at b_max.
inline double tone_bits(double sinr, double b_max = 12.0) {
  if (sinr <= 0.0) return 0.0;
  double b = std::log2(1.0 + sinr);
  return b > b_max ? b_max : b;
}

/// Per-user achievable rate (bit/s) over a set of tones:
///   R_i = W * sum_k min(log2(1 + SINR_ik), b_max)
/// with W the per-tone symbol rate (48 kSymbol/s by default) and b_max the
/// bit-loading cap (12 bits).
inline RVector rate_per_user(const std::vector<RVector>& sinr_per_tone,
                             double tone_bandwidth_hz = 48000.0,
                             double b_max = 12.0) {
  if (sinr_per_tone.empty()) return RVector();
  RVector rate = RVector::Zero(sinr_per_tone.front().size());
  for (const auto& sinr : sinr_per_tone)
    for (Eigen::Index i = 0; i < sinr.size(); ++i)
      rate(i) += tone_bandwidth_hz * tone_bits(sinr(i), b_max);
  return rate;
}

}  // namespace dlms

#endif  // DLMS_METRICS_HPP

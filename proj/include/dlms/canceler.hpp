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

// Adaptive crosstalk cancelers.
//
// The conventional matrix LMS canceler adapts W on u with
//   x = W^H u,  e = d - x,  W <- W + 2 mu u e^H.
//
// The two-layer canceler composes a rarely updated preprocessing matrix W_P
// with the LMS block: u = W_P^H r. At an update instant the current LMS
// progress is folded into the preprocessor,
//   W_P <- W_P W' Dt,   W <- I,
// where W' is the freshly updated LMS matrix and Dt re-normalizes the
// effective channel so that diag(H W_P) = 1. Between updates W_P is constant
// and W evolves exactly like the conventional LMS on u.

#ifndef DLMS_CANCELER_HPP
#define DLMS_CANCELER_HPP

#include <stdexcept>

#include "dlms/channel.hpp"
#include "dlms/linalg.hpp"
#include "dlms/metrics.hpp"
#include "dlms/signal.hpp"

namespace dlms {

/// Thrown when an effective channel diagonal entry is too small for the
/// diagonal normalization to be usable.
struct ZeroDiagonalError : std::runtime_error {
  explicit ZeroDiagonalError(const std::string& what) : std::runtime_error(what) {}
};

struct LmsState {
  CMatrix W;   // columns are the per-user filters
  double mu = 0.0;
};

struct LmsOutput {
  CVector x;
  CVector e;
};

inline LmsState lms_init(int n_users, double mu) {
  return {CMatrix::Identity(n_users, n_users), mu};
}

/// One LMS iteration; advances the state in place and returns (x, e).
inline LmsOutput lms_step(LmsState& st, const CVector& u, const CVector& d) {
  if (u.size() != st.W.rows() || d.size() != st.W.cols())
    throw std::invalid_argument("lms_step: dimension mismatch");
  LmsOutput out;
  out.x.noalias() = st.W.adjoint() * u;
  out.e = d - out.x;
  st.W.noalias() += (2.0 * st.mu) * u * out.e.adjoint();
  return out;
}

/// Maximal step size that still guarantees convergence: mu = 1/(3 tr R).
inline double choose_mu(const SecondOrderStats& stats) {
  double tr = stats.trace();
  if (!(tr > 0.0)) throw std::invalid_argument("choose_mu: trace(R) must be positive");
  return 1.0 / (3.0 * tr);
}

/// Diagonal entries of the normalization matrix Dt with (H W_P Dt)_ii = 1,
/// i.e. Dt_ii = 1 / (H W_P)_ii. Throws ZeroDiagonalError when any effective
/// diagonal entry is below `floor` in magnitude.
inline CVector compute_dtilde(const CMatrix& H, const CMatrix& W_P,
                              double floor = 1e-12) {
  CVector diag = (H * W_P).diagonal();
  CVector dt(diag.size());
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (std::abs(diag(i)) < floor)
      throw ZeroDiagonalError("effective channel diagonal entry " +
                              std::to_string(i) + " below floor");
    dt(i) = Complex(1.0, 0.0) / diag(i);
  }
  return dt;
}

enum class DtildeMode { normalize, identity };
enum class MuMode { exact, estimated };

struct DeepLmsConfig {
  double trigger_db = 5.0;     // SINR improvement that triggers an update
  long n_tilde = 1000;         // forced update after this many iterations
  DtildeMode d_tilde_mode = DtildeMode::normalize;
  long min_update_gap = 0;     // 0 = use n_users (guards degenerate early updates)
  double dtilde_floor = 1e-12;
  MuMode mu_mode = MuMode::exact;
  double trace_ema_beta = 1.0 / 256.0;  // window of the sample trace estimate
};

struct DeepLmsState {
  LmsState lms;
  CMatrix W_P;
  long iter = 0;
  long last_update_iter = 0;
  double sinr_at_last_update_db = 0.0;
  DeepLmsConfig config;
  double trace_estimate = 0.0;  // EMA of ||u||^2 scaled to a trace estimate
  bool trace_primed = false;
};

/// Initializes the two-layer canceler: W = I and W_P equal to the initial
/// diagonal normalization diag(1/h_ii). The step size is chosen from the
/// exact statistics of the initial preprocessed signal.
inline DeepLmsState deep_lms_init(const ToneChannel& ch, DeepLmsConfig cfg = {}) {
  const int n = ch.n_users();
  if (cfg.min_update_gap <= 0) cfg.min_update_gap = n;
  DeepLmsState st;
  st.config = cfg;
  st.W_P = CMatrix(compute_dtilde(ch.H, CMatrix::Identity(n, n), cfg.dtilde_floor)
                       .asDiagonal());
  auto stats = exact_stats(ch, st.W_P);
  st.lms = lms_init(n, choose_mu(stats));
  st.trace_estimate = stats.trace();
  st.sinr_at_last_update_db = db_from_linear(input_sinr(ch, st.W_P).minCoeff());
  return st;
}

/// True when the canceler should fold the LMS block into the preprocessor:
/// either the observed SINR improved by trigger_db since the last update, or
/// n_tilde iterations have elapsed. SINR-based triggers are suppressed for
/// the first min_update_gap iterations of an interval.
inline bool update_trigger(const DeepLmsState& st, double current_min_sinr_db) {
  const long gap = st.iter - st.last_update_iter;
  if (gap >= st.config.n_tilde) return true;
  if (gap < st.config.min_update_gap) return false;
  return current_min_sinr_db - st.sinr_at_last_update_db >= st.config.trigger_db;
}

/// One iteration of the two-layer canceler. Between updates this is exactly
/// lms_step on u = W_P^H r. When update_now is set, the freshly updated LMS
/// matrix is folded into W_P (followed by the diagonal normalization unless
/// d_tilde_mode is identity), W resets to I, and mu is recomputed for the new
/// interval.
inline LmsOutput deep_lms_step(DeepLmsState& st, const ToneChannel& ch,
                               const CVector& r, const CVector& d,
                               bool update_now) {
  CVector u = st.W_P.adjoint() * r;
  if (st.config.mu_mode == MuMode::estimated) {
    double b = st.config.trace_ema_beta;
    double sample = u.squaredNorm();
    st.trace_estimate =
        st.trace_primed ? (1.0 - b) * st.trace_estimate + b * sample : sample;
    st.trace_primed = true;
  }
  LmsOutput out = lms_step(st.lms, u, d);
  st.iter += 1;
  if (update_now) {
    CMatrix composite = st.W_P * st.lms.W;
    if (st.config.d_tilde_mode == DtildeMode::normalize) {
      CVector dt = compute_dtilde(ch.H, composite, st.config.dtilde_floor);
      st.W_P = composite * dt.asDiagonal();
    } else {
      st.W_P = std::move(composite);
    }
    st.lms.W = CMatrix::Identity(st.W_P.rows(), st.W_P.cols());
    if (st.config.mu_mode == MuMode::exact) {
      st.lms.mu = choose_mu(exact_stats(ch, st.W_P));
    } else {
      st.lms.mu = 1.0 / (3.0 * st.trace_estimate);
    }
    st.last_update_iter = st.iter;
    st.sinr_at_last_update_db = db_from_linear(input_sinr(ch, st.W_P).minCoeff());
  }
  return out;
}

/// Exponentially weighted filter averaging. The accumulator keeps the raw
/// weighted sum sum_i theta^(n-i) W[i]; the applied filter is the normalized
/// convex combination W_acc / weight_acc, so a constant W maps to itself.
struct AveragerState {
  double theta = 0.95;
  CMatrix W_acc;       // raw weighted sum, exposed for unnormalized use
  double weight_acc = 0.0;

  void reset() {
    W_acc.setZero();
    weight_acc = 0.0;
  }
};

inline CMatrix averaged_filter(AveragerState& st, const CMatrix& W) {
  if (st.W_acc.size() == 0) st.W_acc = CMatrix::Zero(W.rows(), W.cols());
  st.W_acc = st.theta * st.W_acc + W;
  st.weight_acc = st.theta * st.weight_acc + 1.0;
  return st.W_acc / st.weight_acc;
}

/// The filter averaged_filter would return for W, without consuming it.
inline CMatrix averaged_peek(const AveragerState& st, const CMatrix& W) {
  if (st.W_acc.size() == 0) return W;
  return (st.theta * st.W_acc + W) / (st.theta * st.weight_acc + 1.0);
}

}  // namespace dlms

#endif  // DLMS_CANCELER_HPP

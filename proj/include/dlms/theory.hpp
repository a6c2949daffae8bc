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

// Executable convergence theory for the two-layer LMS canceler.
//
// Everything here treats one update interval: the preprocessed signal u has a
// fixed covariance R with eigendecomposition R = U^H diag(lambda) U, and the
// LMS filter runs with step size mu. The coefficient-error second moments
//   S(i,j)[n] = E{ |(U (W[n] - W*))(i,j)|^2 }
// obey the linear recursion S[n+1] = F S[n] + 4 mu^2 lambda eps*^T with the
// propagation matrix F = diag(rho) + 4 mu^2 lambda lambda^T, and the per-user
// output MSE is eps^T[n] = 1^T diag(lambda) S[n] + eps*^T. On top of the
// recursion sit Gershgorin-based bounds that tie the condition number of R,
// the minimal eigenvalue ratio and ||F||_1 to the minimal input SINR, and a
// per-interval lower bound on the SINR growth across one preprocessor update.
// A brute-force Monte Carlo estimator of S doubles as an independent oracle
// for the recursion.

#ifndef DLMS_THEORY_HPP
#define DLMS_THEORY_HPP

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlms/canceler.hpp"
#include "dlms/channel.hpp"
#include "dlms/io.hpp"
#include "dlms/linalg.hpp"
#include "dlms/parallel.hpp"
#include "dlms/rng.hpp"
#include "dlms/signal.hpp"

namespace dlms {
namespace theory {

/// Thrown when a bound is requested below its SINR domain (phi <= alpha):
/// the analysis only applies to sufficiently high SINR.
struct DomainError : std::domain_error {
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Thrown when the propagation matrix has an eigenvalue >= 1 and the
/// steady-state series diverges.
struct DivergentFError : std::runtime_error {
  explicit DivergentFError(const std::string& what) : std::runtime_error(what) {}
};

/// alpha(phi) = (N-1 + sqrt(N-1)) sqrt(phi) + 2(N-1); the SINR-scaled bound
/// on the largest off-diagonal row sum of R for a normalized channel.
inline double alpha(double phi, int n_users) {
  if (phi < 0.0) throw std::invalid_argument("alpha: phi must be nonnegative");
  if (n_users < 2) throw std::invalid_argument("alpha: need at least 2 users");
  const double m = n_users - 1;
  return (m + std::sqrt(m)) * std::sqrt(phi) + 2.0 * m;
}

/// Smallest phi with phi > alpha(phi, N); bounds below it have no domain.
inline double phi_domain_threshold(int n_users) {
  const double m = n_users - 1;
  const double A = m + std::sqrt(m);
  const double B = 2.0 * m;
  double root = (A + std::sqrt(A * A + 4.0 * B)) / 2.0;
  return root * root;
}

/// g(x) = x - q x^2 on [0,1]: x - x^2/2 for complex LMS, x - x^2 over the
/// reals. The per-step MSE contraction is 1 - (8/9) g(lambda_i / tr R).
inline double g(double x, Field field) {
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("g: x must be in [0,1]");
  return x - field_q(field) * x * x;
}

inline double delta(double phi, int n_users) {
  double a = alpha(phi, n_users);
  if (phi <= a)
    throw DomainError("delta: phi <= alpha(phi), SINR too low for the bound");
  return (1.0 + 2.0 * a) / (phi - a);
}

struct ConvergenceConstants {
  double c;      // SINR retention across one interval, c = 1/(1 + delta)
  double a;      // per-iteration SINR growth factor, a >= 1
  double delta;  // condition-number slack of R
};

/// The interval constants of the SINR growth bound. Requires phi > alpha;
/// both c and a increase with phi once phi > 1.5 N^2 + 3 N.
inline ConvergenceConstants convergence_constants(double phi, int n_users,
                                                  Field field) {
  ConvergenceConstants out{};
  out.delta = delta(phi, n_users);  // throws DomainError when phi <= alpha
  out.c = 1.0 / (1.0 + out.delta);
  double g_arg = (1.0 - (alpha(phi, n_users) + 1.0) / (phi + 1.0)) / n_users;
  out.a = 1.0 / (1.0 - (8.0 / 9.0) * g(g_arg, field));
  return out;
}

/// MSE propagation matrix F = diag(rho) + 4 mu^2 lambda lambda^T with
/// rho_i = 1 - 4 mu lambda_i + 8 q mu^2 lambda_i^2.
inline RMatrix build_f_matrix(const RVector& lambda, double mu, Field field) {
  const double q = field_q(field);
  RMatrix F = (4.0 * mu * mu) * (lambda * lambda.transpose());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    double li = lambda(i);
    if (!(li > 0.0)) throw std::invalid_argument("build_f_matrix: eigenvalues must be positive");
    F(i, i) += 1.0 - 4.0 * mu * li + 8.0 * q * mu * mu * li * li;
  }
  return F;
}

/// Induced l1 norm of F directly (max absolute column sum).
inline double f_norm1(const RMatrix& F) {
  return F.cwiseAbs().colwise().sum().maxCoeff();
}

/// ||F||_1 in closed form at mu = 1/(3 tr R):
///   ||F||_1 = 1 - (8/9) g(lambda_min / tr R).
inline double f_norm1_closed_form(const RVector& lambda, Field field) {
  double tr = lambda.sum();
  if (!(tr > 0.0) || !(lambda.minCoeff() > 0.0))
    throw std::invalid_argument("f_norm1_closed_form: eigenvalues must be positive");
  return 1.0 - (8.0 / 9.0) * g(lambda.minCoeff() / tr, field);
}

/// Wiener solution W* = R^{-1} R_ud and its residual MSE vector
/// eps*_i = 1 - r_ud_i^H R^{-1} r_ud_i (unit-power pilots). eps* does not
/// depend on the preprocessing matrix.
struct WienerSolution {
  CMatrix W_star;
  RVector eps_star;
};

inline WienerSolution wiener(const SecondOrderStats& stats) {
  Eigen::LDLT<CMatrix> ldlt(stats.R);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      !(ldlt.vectorD().real().minCoeff() > 0.0))
    throw std::runtime_error("wiener: R is not positive definite");
  WienerSolution out;
  out.W_star = ldlt.solve(stats.R_ud);
  const Eigen::Index n = stats.R.rows();
  out.eps_star.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double val = 1.0 - (stats.R_ud.col(i).adjoint() * out.W_star.col(i))(0).real();
    out.eps_star(i) = val < 0.0 ? 0.0 : (val > 1.0 ? 1.0 : val);
  }
  return out;
}

/// State of the coefficient-MSE recursion for one interval.
struct MseRecursionState {
  RVector lambda;    // eigenvalues of R, ascending
  CMatrix U;         // R = U^H diag(lambda) U
  RMatrix F;
  RMatrix S;         // S(i,j) = E|V(i,j)|^2, column j belongs to user j
  RVector eps_star;
  double mu = 0.0;
  Field field = Field::complex_lms;
};

/// Builds the recursion state from exact signal statistics and the filter
/// W0 the interval starts from (identity right after a preprocessor update).
inline MseRecursionState init_mse_recursion(const SecondOrderStats& stats,
                                            const CMatrix& W0, double mu,
                                            Field field = Field::complex_lms) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(stats.R);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("init_mse_recursion: eigendecomposition failed");
  MseRecursionState st;
  st.lambda = eig.eigenvalues();  // ascending
  if (!(st.lambda.minCoeff() > 0.0))
    throw std::runtime_error("init_mse_recursion: R is not positive definite");
  st.U = eig.eigenvectors().adjoint();
  auto w = wiener(stats);
  st.eps_star = w.eps_star;
  st.S = (st.U * (W0 - w.W_star)).cwiseAbs2();
  st.mu = mu;
  st.field = field;
  st.F = build_f_matrix(st.lambda, mu, field);
  return st;
}

/// S <- F S + 4 mu^2 lambda eps*^T (one LMS iteration in expectation).
inline void mse_recursion_step(MseRecursionState& st) {
  st.S = (st.F * st.S).eval() +
         (4.0 * st.mu * st.mu) * (st.lambda * st.eps_star.transpose());
}

/// Per-user analytic MSE eps_j[n] = sum_i lambda_i S(i,j) + eps*_j.
inline RVector analytic_mse(const MseRecursionState& st) {
  return st.S.transpose() * st.lambda + st.eps_star;
}

/// Fixed point of the recursion, solving (I - F) S = 4 mu^2 lambda eps*^T.
inline RMatrix steady_state_coefficient_mse(const MseRecursionState& st) {
  const Eigen::Index n = st.lambda.size();
  RMatrix rhs = (4.0 * st.mu * st.mu) * (st.lambda * st.eps_star.transpose());
  return (RMatrix::Identity(n, n) - st.F).partialPivLu().solve(rhs);
}

/// Steady-state bound on the maximal MSE of the interval:
///   eta_inf = (1 + 4 mu^2 lambda^T (I - F)^{-1} lambda) ||eps*||_inf.
/// Requires all eigenvalues of F below 1.
inline double eta_inf_bound(const MseRecursionState& st) {
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(st.F);
  if (eig.info() != Eigen::Success || eig.eigenvalues().maxCoeff() >= 1.0)
    throw DivergentFError("eta_inf_bound: F has an eigenvalue >= 1");
  const Eigen::Index n = st.lambda.size();
  RVector y = (RMatrix::Identity(n, n) - st.F).partialPivLu().solve(st.lambda);
  double series = 4.0 * st.mu * st.mu * st.lambda.dot(y);
  return (1.0 + series) * st.eps_star.maxCoeff();
}

struct GershgorinBounds {
  double cond_bound;            // cond(R) <= 1 + delta(phi)
  double lam_min_trace_bound;   // lambda_min / tr R >= (1/N)(1 - (alpha+1)/(phi+1))
  double b_bound;               // max off-diagonal row sum of R <= alpha/phi
};

inline GershgorinBounds gershgorin_bounds(double phi, int n_users) {
  double a = alpha(phi, n_users);
  if (phi <= a)
    throw DomainError("gershgorin_bounds: phi <= alpha(phi), SINR too low");
  GershgorinBounds out{};
  out.cond_bound = 1.0 + delta(phi, n_users);
  out.lam_min_trace_bound = (1.0 - (a + 1.0) / (phi + 1.0)) / n_users;
  out.b_bound = a / phi;
  return out;
}

struct SinrLowerBound {
  double value;   // lower bound on the minimal input SINR after the update
  bool trivial;   // set when the bound is <= 0 and carries no information
};

/// Minimal SINR after one interval of `gap` iterations followed by a
/// preprocessor update:
///   phi_next >= ((c a^gap phi)^{-1} + eta_inf)^{-1} - 1.
inline SinrLowerBound sinr_lower_bound(double phi, long gap, double eta_inf,
                                       int n_users, Field field) {
  if (gap < 0) throw std::invalid_argument("sinr_lower_bound: negative gap");
  auto k = convergence_constants(phi, n_users, field);  // throws DomainError
  double inv = 1.0 / (k.c * std::pow(k.a, static_cast<double>(gap)) * phi) + eta_inf;
  SinrLowerBound out{};
  out.trivial = inv >= 1.0;
  out.value = 1.0 / inv - 1.0;
  return out;
}

/// Brute-force estimate of the coefficient-MSE trajectory: runs independent
/// LMS trajectories on the simulated signal chain, maps each filter through
/// V[n] = U (W[n] - W*) and averages |v_ij|^2. Also records the empirical
/// output MSE per step. Deterministic in `seed` (fixed chunked reduction).
struct McCoefficientMse {
  std::vector<RMatrix> s_mean;     // steps 0..n_steps
  std::vector<RMatrix> s_stderr;
  std::vector<RVector> mse_mean;   // steps 0..n_steps-1, E|d_i - x_i|^2
  std::vector<RVector> mse_stderr;
  int n_trials = 0;
};

inline McCoefficientMse mc_coefficient_mse(const ToneChannel& ch,
                                           const CMatrix& W_P, double mu,
                                           int n_steps, int n_trials,
                                           std::uint64_t seed,
                                           const CMatrix& W0 = CMatrix(),
                                           int n_threads = 0) {
  const int n = ch.n_users();
  auto stats = exact_stats(ch, W_P);
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(stats.R);
  CMatrix U = eig.eigenvectors().adjoint();
  CMatrix W_star = wiener(stats).W_star;
  CMatrix W_init = W0.size() == 0 ? CMatrix(CMatrix::Identity(n, n)) : W0;

  constexpr int kChunks = 16;
  struct Accum {
    std::vector<RMatrix> s1, s2;
    std::vector<RVector> e1, e2;
    int count = 0;
  };
  std::vector<Accum> partial(kChunks);

  auto run_chunk = [&](int chunk) {
    Accum& acc = partial[chunk];
    acc.s1.assign(n_steps + 1, RMatrix::Zero(n, n));
    acc.s2.assign(n_steps + 1, RMatrix::Zero(n, n));
    acc.e1.assign(n_steps, RVector::Zero(n));
    acc.e2.assign(n_steps, RVector::Zero(n));
    for (int trial = chunk; trial < n_trials; trial += kChunks) {
      PilotSource pilots(PilotKind::complex_gaussian, seed,
                         derive_stream({0x417u, static_cast<std::uint64_t>(trial), 1}));
      RngStream noise(seed,
                      derive_stream({0x417u, static_cast<std::uint64_t>(trial), 2}));
      CMatrix W = W_init;
      CMatrix V(n, n);
      for (int step = 0; step < n_steps; ++step) {
        V.noalias() = U * (W - W_star);
        RMatrix v2 = V.cwiseAbs2();
        acc.s1[step] += v2;
        acc.s2[step] += v2.cwiseProduct(v2);
        CVector d = draw_pilot(pilots, n);
        CVector r = received_signal(ch, d, noise);
        CVector u = W_P.adjoint() * r;
        CVector x = W.adjoint() * u;
        CVector e = d - x;
        RVector e2 = e.cwiseAbs2();
        acc.e1[step] += e2;
        acc.e2[step] += e2.cwiseProduct(e2);
        W.noalias() += (2.0 * mu) * u * e.adjoint();
      }
      V.noalias() = U * (W - W_star);
      RMatrix v2 = V.cwiseAbs2();
      acc.s1[n_steps] += v2;
      acc.s2[n_steps] += v2.cwiseProduct(v2);
      acc.count += 1;
    }
  };
  parallel_for(kChunks, n_threads, run_chunk);

  McCoefficientMse out;
  out.n_trials = n_trials;
  out.s_mean.assign(n_steps + 1, RMatrix::Zero(n, n));
  out.s_stderr.assign(n_steps + 1, RMatrix::Zero(n, n));
  out.mse_mean.assign(n_steps, RVector::Zero(n));
  out.mse_stderr.assign(n_steps, RVector::Zero(n));
  for (int chunk = 0; chunk < kChunks; ++chunk) {
    for (int s = 0; s <= n_steps; ++s) out.s_mean[s] += partial[chunk].s1[s];
    for (int s = 0; s < n_steps; ++s) out.mse_mean[s] += partial[chunk].e1[s];
  }
  const double inv_k = 1.0 / n_trials;
  for (int s = 0; s <= n_steps; ++s) out.s_mean[s] *= inv_k;
  for (int s = 0; s < n_steps; ++s) out.mse_mean[s] *= inv_k;
  // second moments -> standard error of the mean
  for (int chunk = 0; chunk < kChunks; ++chunk) {
    for (int s = 0; s <= n_steps; ++s) out.s_stderr[s] += partial[chunk].s2[s];
    for (int s = 0; s < n_steps; ++s) out.mse_stderr[s] += partial[chunk].e2[s];
  }
  for (int s = 0; s <= n_steps; ++s) {
    RMatrix var = out.s_stderr[s] * inv_k - out.s_mean[s].cwiseProduct(out.s_mean[s]);
    out.s_stderr[s] = (var.cwiseMax(0.0) * inv_k).cwiseSqrt();
  }
  for (int s = 0; s < n_steps; ++s) {
    RVector var = out.mse_stderr[s] * inv_k - out.mse_mean[s].cwiseProduct(out.mse_mean[s]);
    out.mse_stderr[s] = (var.cwiseMax(0.0) * inv_k).cwiseSqrt();
  }
  return out;
}

/// Everything the SINR growth bound needs for one (tone, interval) pair, plus
/// the measured quantities it is checked against.
struct BoundReport {
  int tone_index = 0;
  long interval = 0;
  long n_start = 0;
  long n_end = 0;
  double phi = 0.0;        // measured min input SINR during the interval
  bool domain_ok = false;  // phi > alpha(phi, N)
  double alpha = 0.0;
  double delta = 0.0;
  double c = 0.0;
  double a = 0.0;
  double f_norm1 = 0.0;
  double eta_inf = 0.0;
  double cond_bound = 0.0;
  double lam_min_trace_bound = 0.0;
  double b_bound = 0.0;
  double cond_measured = 0.0;
  double lam_min_trace_measured = 0.0;
  double sinr_bound = 0.0;  // at the realized gap
  bool trivial = false;
  // The bound is an expectation statement; once it approaches the exact
  // expected steady state 1/eta_inf - 1 it has no slack left and a single
  // realization sits above or below it with roughly even odds. Intervals in
  // that regime are flagged and reported rather than enforced.
  bool saturated = false;
  double phi_next = 0.0;    // measured min input SINR right after the update
};

inline long bound_report_gap(const BoundReport& r) { return r.n_end - r.n_start; }

/// The interval's SINR growth bound evaluated at an arbitrary gap. Only
/// meaningful when the report is domain-valid.
inline double bound_value_at_gap(const BoundReport& r, long gap) {
  double inv = 1.0 / (r.c * std::pow(r.a, static_cast<double>(gap)) * r.phi) +
               r.eta_inf;
  return 1.0 / inv - 1.0;
}

inline const char* bound_report_csv_header() {
  return "tone,interval,n_start,n_end,phi,domain_ok,alpha,delta,c,a,f_norm1,"
         "eta_inf,cond_bound,lam_min_trace_bound,b_bound,cond_measured,"
         "lam_min_trace_measured,sinr_bound,trivial,saturated,phi_next";
}

inline void write_bound_report_csv(std::ostream& os,
                                   const std::vector<BoundReport>& rows,
                                   const std::string& schema = "bounds.v1") {
  os << "# schema: " << schema << '\n' << bound_report_csv_header() << '\n';
  for (const auto& r : rows) {
    os << r.tone_index << ',' << r.interval << ',' << r.n_start << ',' << r.n_end
       << ',' << format_double(r.phi) << ',' << (r.domain_ok ? 1 : 0) << ','
       << format_double(r.alpha) << ',' << format_double(r.delta) << ','
       << format_double(r.c) << ',' << format_double(r.a) << ','
       << format_double(r.f_norm1) << ',' << format_double(r.eta_inf) << ','
       << format_double(r.cond_bound) << ',' << format_double(r.lam_min_trace_bound)
       << ',' << format_double(r.b_bound) << ',' << format_double(r.cond_measured)
       << ',' << format_double(r.lam_min_trace_measured) << ','
       << format_double(r.sinr_bound) << ',' << (r.trivial ? 1 : 0) << ','
       << (r.saturated ? 1 : 0) << ',' << format_double(r.phi_next) << '\n';
  }
}

}  // namespace theory
}  // namespace dlms

#endif  // DLMS_THEORY_HPP

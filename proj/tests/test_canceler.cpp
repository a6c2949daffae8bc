#include <catch2/catch.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "dlms/canceler.hpp"
#include "dlms/experiment.hpp"
#include "dlms/metrics.hpp"
#include "dlms/theory.hpp"
#include "test_util.hpp"

using namespace dlms;

TEST_CASE("lms step") {
  SECTION("zero input leaves the filter unchanged") {
    LmsState st = lms_init(3, 0.1);
    CVector u = CVector::Zero(3);
    CVector d(3);
    d << Complex(1, 1), Complex(2, 0), Complex(0, -1);
    CMatrix before = st.W;
    auto out = lms_step(st, u, d);
    CHECK(out.x.cwiseAbs().maxCoeff() == 0.0);
    CHECK((out.e.array() == d.array()).all());
    CHECK(test_util::max_abs_diff(st.W, before) == 0.0);
  }

  SECTION("the Wiener solution of a noiseless identity channel is a fixed point") {
    LmsState st = lms_init(2, 0.2);  // W = I is optimal when u = d
    CVector d(2);
    d << Complex(0.3, -0.7), Complex(-1.1, 0.2);
    auto out = lms_step(st, d, d);
    CHECK(out.e.cwiseAbs().maxCoeff() == 0.0);
    CHECK(test_util::max_abs_diff(st.W, CMatrix::Identity(2, 2)) == 0.0);
  }

  SECTION("hand-evaluated rank-1 update") {
    LmsState st = lms_init(2, 0.1);
    CVector u(2), d(2);
    u << Complex(1, 0), Complex(0, 0);
    d << Complex(1, 0), Complex(1, 0);
    auto out = lms_step(st, u, d);
    CHECK(out.x(0) == Complex(1, 0));
    CHECK(out.x(1) == Complex(0, 0));
    CHECK(out.e(0) == Complex(0, 0));
    CHECK(out.e(1) == Complex(1, 0));
    CMatrix expected(2, 2);
    expected << Complex(1, 0), Complex(0.2, 0), Complex(0, 0), Complex(1, 0);
    CHECK(test_util::max_abs_diff(st.W, expected) < 1e-15);
  }

  SECTION("dimension mismatch is rejected") {
    LmsState st = lms_init(2, 0.1);
    CVector u(3), d(2);
    u.setZero();
    d.setZero();
    CHECK_THROWS_AS(lms_step(st, u, d), std::invalid_argument);
  }
}

TEST_CASE("step size choice") {
  SECTION("identity covariance") {
    ToneChannel ch;
    ch.H = CMatrix::Identity(3, 3);
    ch.noise_variance = 0.0;
    // R = I exactly when noise is zero
    auto stats = exact_stats(ch, CMatrix::Identity(3, 3));
    CHECK(choose_mu(stats) == Approx(1.0 / 9.0).epsilon(1e-14));
  }

  SECTION("hand value for R = 1.01 I") {
    ToneChannel ch;
    ch.H = CMatrix::Identity(2, 2);
    ch.noise_variance = 0.01;
    auto stats = exact_stats(ch, CMatrix::Identity(2, 2));
    CHECK(choose_mu(stats) == Approx(1.0 / 6.06).epsilon(1e-14));
  }

  SECTION("scaling R by s scales mu by 1/s") {
    RngStream rng(5, 0);
    ToneChannel ch;
    ch.H = test_util::random_complex_matrix(3, 3, rng);
    ch.noise_variance = 0.02;
    auto stats = exact_stats(ch, CMatrix::Identity(3, 3));
    auto scaled = stats;
    scaled.R *= 4.0;
    CHECK(choose_mu(scaled) == Approx(choose_mu(stats) / 4.0).epsilon(1e-14));
  }
}

TEST_CASE("diagonal normalization") {
  SECTION("identity stays identity") {
    CVector dt = compute_dtilde(CMatrix::Identity(3, 3), CMatrix::Identity(3, 3));
    CHECK((dt.array() == Complex(1, 0)).all());
  }

  SECTION("reciprocal of the effective diagonal") {
    CMatrix h(2, 2);
    h << Complex(2, 0), Complex(0, 0), Complex(0, 0), Complex(0, -1);
    CVector dt = compute_dtilde(h, CMatrix::Identity(2, 2));
    CHECK(std::abs(dt(0) - Complex(0.5, 0)) < 1e-15);
    CHECK(std::abs(dt(1) - Complex(0, 1)) < 1e-15);
  }

  SECTION("defining property on random inputs") {
    RngStream rng(6, 0);
    for (int trial = 0; trial < 50; ++trial) {
      CMatrix h = test_util::random_complex_matrix(4, 4, rng);
      h += 2.0 * CMatrix::Identity(4, 4);  // keep diagonals away from zero
      CMatrix wp = test_util::random_complex_matrix(4, 4, rng) +
                   2.0 * CMatrix::Identity(4, 4);
      CVector dt = compute_dtilde(h, wp);
      CVector diag = (h * wp * dt.asDiagonal()).diagonal();
      for (int i = 0; i < 4; ++i) REQUIRE(std::abs(diag(i) - Complex(1, 0)) < 1e-12);
    }
  }

  SECTION("zero diagonal raises") {
    CMatrix h = CMatrix::Identity(2, 2);
    h(1, 1) = Complex(0, 0);
    CHECK_THROWS_AS(compute_dtilde(h, CMatrix::Identity(2, 2)), ZeroDiagonalError);
  }
}

namespace {

ToneChannel small_test_channel(std::uint64_t seed, int n = 2, double noise = 1e-3) {
  RngStream rng(seed, 0);
  ToneChannel ch;
  ch.H = test_util::random_complex_matrix(n, n, rng, 0.3) +
         CMatrix::Identity(n, n);
  ch.noise_variance = noise;
  return ch;
}

}  // namespace

TEST_CASE("two-layer canceler initialization") {
  ToneChannel ch = small_test_channel(42);
  DeepLmsState st = deep_lms_init(ch);
  CHECK(test_util::max_abs_diff(st.lms.W, CMatrix::Identity(2, 2)) == 0.0);
  CVector diag = (ch.H * st.W_P).diagonal();
  for (int i = 0; i < 2; ++i) CHECK(std::abs(diag(i) - Complex(1, 0)) < 1e-12);
  CHECK(st.lms.mu == Approx(1.0 / (3.0 * exact_stats(ch, st.W_P).trace())));
}

TEST_CASE("scripted three-iteration trace matches a straight-line execution") {
  // Straight-line reference: the update equations written out directly,
  // with fixed pilots, fixed noise draws, mu = 0.05 and an update at n = 2.
  ToneChannel ch = small_test_channel(11);
  const double mu = 0.05;

  std::vector<CVector> ds, nus;
  {
    RngStream pr(21, 1), nr(21, 2);
    for (int n = 0; n < 3; ++n) {
      CVector d(2), nu(2);
      for (int i = 0; i < 2; ++i) {
        d(i) = pr.complex_normal();
        nu(i) = nr.complex_normal(std::sqrt(ch.noise_variance));
      }
      ds.push_back(d);
      nus.push_back(nu);
    }
  }

  // reference
  CMatrix wp_ref(2, 2);
  wp_ref.setZero();
  wp_ref(0, 0) = Complex(1, 0) / ch.H(0, 0);
  wp_ref(1, 1) = Complex(1, 0) / ch.H(1, 1);
  CMatrix w_ref = CMatrix::Identity(2, 2);
  std::vector<CMatrix> w_hist, wp_hist;
  std::vector<CVector> x_hist, e_hist;
  for (int n = 0; n < 3; ++n) {
    CVector r = ch.H.adjoint() * ds[n] + nus[n];
    CVector u = wp_ref.adjoint() * r;
    CVector x = w_ref.adjoint() * u;
    CVector e = ds[n] - x;
    CMatrix w_breve = w_ref + 2.0 * mu * u * e.adjoint();
    if (n == 2) {
      CMatrix composite = wp_ref * w_breve;
      CMatrix eff = ch.H * composite;
      CMatrix dt = CMatrix::Zero(2, 2);
      dt(0, 0) = Complex(1, 0) / eff(0, 0);
      dt(1, 1) = Complex(1, 0) / eff(1, 1);
      wp_ref = composite * dt;
      w_ref = CMatrix::Identity(2, 2);
    } else {
      w_ref = w_breve;
    }
    w_hist.push_back(w_ref);
    wp_hist.push_back(wp_ref);
    x_hist.push_back(x);
    e_hist.push_back(e);
  }

  // implementation under test
  DeepLmsState st = deep_lms_init(ch);
  st.lms.mu = mu;
  for (int n = 0; n < 3; ++n) {
    CVector r = ch.H.adjoint() * ds[n] + nus[n];
    auto out = deep_lms_step(st, ch, r, ds[n], n == 2);
    INFO("iteration " << n);
    CHECK(test_util::max_abs_diff(st.lms.W, w_hist[n]) < 1e-12);
    CHECK(test_util::max_abs_diff(st.W_P, wp_hist[n]) < 1e-12);
    CHECK((out.x - x_hist[n]).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((out.e - e_hist[n]).cwiseAbs().maxCoeff() < 1e-12);
  }

  // state snapshot export round-trips bit-exactly
  std::stringstream ss;
  write_matrix(ss, st.W_P);
  write_matrix(ss, st.lms.W);
  CMatrix wp_back = read_matrix(ss);
  CMatrix w_back = read_matrix(ss);
  CHECK((wp_back.array() == st.W_P.array()).all());
  CHECK((w_back.array() == st.lms.W.array()).all());
}

TEST_CASE("between updates the inner filter evolves exactly like plain lms") {
  ToneChannel ch = small_test_channel(31, 3);
  DeepLmsState deep = deep_lms_init(ch);
  LmsState plain = deep.lms;  // same W = I and same mu

  PilotSource pilots(PilotKind::complex_gaussian, 7);
  RngStream noise(7, 99);
  for (int n = 0; n < 50; ++n) {
    CVector d = draw_pilot(pilots, 3);
    CVector r = received_signal(ch, d, noise);
    CVector u = deep.W_P.adjoint() * r;
    auto a = deep_lms_step(deep, ch, r, d, false);
    auto b = lms_step(plain, u, d);
    REQUIRE((deep.lms.W.array() == plain.W.array()).all());  // bitwise
    REQUIRE((a.x.array() == b.x.array()).all());
    REQUIRE((a.e.array() == b.e.array()).all());
  }
}

TEST_CASE("update composition and output continuity") {
  ToneChannel ch = small_test_channel(32, 3);
  DeepLmsConfig cfg;
  cfg.d_tilde_mode = DtildeMode::identity;
  DeepLmsState st = deep_lms_init(ch, cfg);

  PilotSource pilots(PilotKind::complex_gaussian, 8);
  RngStream noise(8, 99);
  for (int n = 0; n < 20; ++n) {
    CVector d = draw_pilot(pilots, 3);
    CVector r = received_signal(ch, d, noise);
    deep_lms_step(st, ch, r, d, false);
  }
  CMatrix wp_old = st.W_P;
  CMatrix w_old = st.lms.W;
  double mu = st.lms.mu;

  CVector d = draw_pilot(pilots, 3);
  CVector r = received_signal(ch, d, noise);
  deep_lms_step(st, ch, r, d, true);

  // W_P[n+1] = W_P[n] * W_breve[n+1] in identity mode
  CVector u = wp_old.adjoint() * r;
  CVector e = d - w_old.adjoint() * u;
  CMatrix w_breve = w_old + 2.0 * mu * u * e.adjoint();
  CHECK(test_util::max_abs_diff(st.W_P, CMatrix(wp_old * w_breve)) < 1e-12);
  CHECK(test_util::max_abs_diff(st.lms.W, CMatrix::Identity(3, 3)) == 0.0);

  // the composite map applied to a fresh probe is continuous across the fold
  CVector probe = draw_pilot(pilots, 3);
  CVector x_old = w_breve.adjoint() * (wp_old.adjoint() * probe);
  CVector x_new = st.lms.W.adjoint() * (st.W_P.adjoint() * probe);
  CHECK((x_old - x_new).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("normalize mode re-normalizes the effective diagonal") {
  ToneChannel ch = small_test_channel(33, 4);
  DeepLmsState st = deep_lms_init(ch);
  PilotSource pilots(PilotKind::complex_gaussian, 9);
  RngStream noise(9, 99);
  for (int n = 0; n < 30; ++n) {
    CVector d = draw_pilot(pilots, 4);
    CVector r = received_signal(ch, d, noise);
    deep_lms_step(st, ch, r, d, n == 14 || n == 29);
  }
  CVector diag = (ch.H * st.W_P).diagonal();
  for (int i = 0; i < 4; ++i) REQUIRE(std::abs(diag(i) - Complex(1, 0)) < 1e-10);
}

TEST_CASE("update trigger") {
  ToneChannel ch = small_test_channel(34, 2);
  DeepLmsConfig cfg;
  cfg.trigger_db = 5.0;
  cfg.n_tilde = 100;
  DeepLmsState st = deep_lms_init(ch, cfg);
  st.sinr_at_last_update_db = 10.0;
  st.last_update_iter = 0;

  st.iter = 50;  // past the early-update guard, below n_tilde
  CHECK(update_trigger(st, 15.0));
  CHECK_FALSE(update_trigger(st, 14.9));

  st.iter = 100;  // gap hits n_tilde: forced regardless of SINR
  CHECK(update_trigger(st, -100.0));

  st.iter = 1;  // below the min-gap guard: SINR trigger suppressed
  CHECK_FALSE(update_trigger(st, 50.0));
}

TEST_CASE("averaged filter") {
  SECTION("first call returns the input") {
    AveragerState avg;
    CMatrix w = CMatrix::Identity(2, 2) * Complex(3, 1);
    CMatrix applied = averaged_filter(avg, w);
    CHECK(test_util::max_abs_diff(applied, w) < 1e-15);
  }

  SECTION("a constant sequence is a fixed point") {
    AveragerState avg;
    RngStream rng(1, 1);
    CMatrix w = test_util::random_complex_matrix(3, 3, rng);
    for (int n = 0; n < 20; ++n) {
      CMatrix applied = averaged_filter(avg, w);
      REQUIRE(test_util::max_abs_diff(applied, w) < 1e-12);
    }
  }

  SECTION("two-step hand value") {
    AveragerState avg;
    avg.theta = 0.95;
    averaged_filter(avg, CMatrix::Identity(2, 2));
    CMatrix applied = averaged_filter(avg, CMatrix(2.0 * CMatrix::Identity(2, 2)));
    CMatrix expected = (0.95 + 2.0) / 1.95 * CMatrix::Identity(2, 2);
    CHECK(test_util::max_abs_diff(applied, expected) < 1e-14);
    // raw accumulator stays unnormalized
    CHECK(test_util::max_abs_diff(avg.W_acc, CMatrix(2.95 * CMatrix::Identity(2, 2))) < 1e-14);
    CHECK(avg.weight_acc == Approx(1.95));
  }
}

TEST_CASE("diagonal right-multiplication leaves the SINRs unchanged") {
  ToneChannel ch = small_test_channel(35, 3);
  DeepLmsState st = deep_lms_init(ch);
  PilotSource pilots(PilotKind::complex_gaussian, 10);
  RngStream noise(10, 99);
  for (int n = 0; n < 40; ++n) {
    CVector d = draw_pilot(pilots, 3);
    CVector r = received_signal(ch, d, noise);
    deep_lms_step(st, ch, r, d, n == 20);
  }
  CMatrix scale = CMatrix::Zero(3, 3);
  scale(0, 0) = Complex(2, 0);
  scale(1, 1) = Complex(0, 3);
  scale(2, 2) = Complex(-1.5, 0.5);

  RVector phi = input_sinr(ch, st.W_P);
  RVector phi_scaled = input_sinr(ch, CMatrix(st.W_P * scale));
  CHECK((phi - phi_scaled).cwiseAbs().maxCoeff() < 1e-12 * phi.maxCoeff());

  auto eff = effective_channel(ch, st.W_P, st.lms.W);
  auto eff_scaled = effective_channel(ch, st.W_P, CMatrix(st.lms.W * scale));
  RVector psi = output_sinr(eff), psi_scaled = output_sinr(eff_scaled);
  CHECK((psi - psi_scaled).cwiseAbs().maxCoeff() < 1e-12 * psi.maxCoeff());
}

TEST_CASE("sample-estimated trace drives a workable step size") {
  ToneChannel ch = small_test_channel(47, 4, 1e-4);
  DeepLmsConfig cfg;
  cfg.mu_mode = MuMode::estimated;
  cfg.n_tilde = 400;
  DeepLmsState est = deep_lms_init(ch, cfg);
  DeepLmsState exact = deep_lms_init(ch);

  PilotSource pilots(PilotKind::complex_gaussian, 13);
  RngStream noise(13, 99);
  double true_trace = exact_stats(ch, est.W_P).trace();
  for (int n = 0; n < 1200; ++n) {
    CVector d = draw_pilot(pilots, 4);
    CVector r = received_signal(ch, d, noise);
    bool update = (n + 1) % 400 == 0;
    deep_lms_step(est, ch, r, d, update);
    deep_lms_step(exact, ch, r, d, update);
    if (n == 398) {
      // EMA of ||u||^2 approaches tr(R) of the first interval
      CHECK(est.trace_estimate == Approx(true_trace).epsilon(0.25));
    }
  }
  // both modes converge to a similar place on an easy channel
  double psi_est = output_sinr(effective_channel(ch, est.W_P, est.lms.W)).minCoeff();
  double psi_exact = output_sinr(effective_channel(ch, exact.W_P, exact.lms.W)).minCoeff();
  CHECK(db_from_linear(psi_est) > db_from_linear(psi_exact) - 6.0);
  CHECK(db_from_linear(psi_est) > 20.0);
}

TEST_CASE("lms MSE trajectory is non-increasing in expectation") {
  ToneChannel ch = random_normalized_channel(4, 30.0, 60.0, 0.3, 91);
  auto stats = exact_stats(ch, CMatrix::Identity(4, 4));
  double mu = choose_mu(stats);
  auto mc = theory::mc_coefficient_mse(ch, CMatrix::Identity(4, 4), mu, 160, 200, 17);
  // window-averaged user-mean MSE, checked at spaced checkpoints
  auto window_mean = [&](int center) {
    double acc = 0.0;
    int count = 0;
    for (int n = std::max(0, center - 4); n <= std::min(159, center + 4); ++n) {
      acc += mc.mse_mean[n].mean();
      ++count;
    }
    return acc / count;
  };
  std::vector<int> checkpoints{4, 20, 40, 80, 150};
  for (size_t k = 1; k < checkpoints.size(); ++k) {
    CHECK(window_mean(checkpoints[k]) <= window_mean(checkpoints[k - 1]) * 1.10);
  }
}

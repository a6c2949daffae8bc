#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "dlms/channel.hpp"
#include "test_util.hpp"

using namespace dlms;

namespace {

CableConfig band_20_100mhz(int users = 10) {
  CableConfig cfg;
  cfg.n_users = users;
  cfg.first_tone_hz = 20e6;
  cfg.tone_spacing_hz = 10e6;
  cfg.tone_count = 9;  // 20 .. 100 MHz
  cfg.dominance_crossover_hz = 30e6;
  return cfg;
}

}  // namespace

TEST_CASE("zero coupling yields a diagonal channel with infinite dominance") {
  CableConfig cfg = band_20_100mhz(4);
  cfg.fext_coupling_strength = 0.0;
  auto chans = generate_cable(cfg, 1);
  REQUIRE(chans.size() == 9);
  for (const auto& ch : chans) {
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        if (i != j) REQUIRE(ch.H(i, j) == Complex(0.0, 0.0));
    RVector dom = dominance_ratio(ch);
    for (int i = 0; i < 4; ++i)
      REQUIRE(dom(i) == std::numeric_limits<double>::infinity());
  }
}

TEST_CASE("dominance collapses above the crossover") {
  auto chans = generate_cable(band_20_100mhz(10), 3);
  const auto& high = chans.back();  // 100 MHz
  REQUIRE(high.frequency_hz == Approx(100e6));
  CHECK(dominance_ratio(high).minCoeff() < 1.0);
}

TEST_CASE("generation is bit-identical for the same seed") {
  auto a = generate_cable(band_20_100mhz(6), 77);
  auto b = generate_cable(band_20_100mhz(6), 77);
  auto c = generate_cable(band_20_100mhz(6), 78);
  REQUIRE(a.size() == b.size());
  bool all_equal = true, any_diff = false;
  for (size_t k = 0; k < a.size(); ++k) {
    all_equal = all_equal && (a[k].H.array() == b[k].H.array()).all() &&
                a[k].noise_variance == b[k].noise_variance;
    any_diff = any_diff || !(a[k].H.array() == c[k].H.array()).all();
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("dominance ratio hand values") {
  ToneChannel ch;
  ch.H = CMatrix(2, 2);
  ch.H << 2.0, 1.0, 1.0, 2.0;
  RVector dom = dominance_ratio(ch);
  CHECK(dom(0) == Approx(2.0));
  CHECK(dom(1) == Approx(2.0));

  ToneChannel tri;
  tri.H = CMatrix::Zero(3, 3);
  tri.H(0, 0) = 1.0; tri.H(0, 1) = 1.0; tri.H(0, 2) = 1.0;
  tri.H(1, 1) = 1.0;
  tri.H(2, 2) = 1.0;
  RVector d3 = dominance_ratio(tri);
  CHECK(d3(0) == Approx(0.5));
  CHECK(d3(1) == std::numeric_limits<double>::infinity());
  CHECK(d3(2) == std::numeric_limits<double>::infinity());

  ToneChannel eye;
  eye.H = CMatrix::Identity(2, 2);
  CHECK(dominance_ratio(eye).minCoeff() == std::numeric_limits<double>::infinity());
}

TEST_CASE("median dominance ratio decreases with frequency") {
  CableConfig cfg = band_20_100mhz(10);
  const int n_seeds = 32;
  std::vector<std::vector<double>> mean_ratio(cfg.tone_count);
  for (int s = 0; s < n_seeds; ++s) {
    auto chans = generate_cable(cfg, 1000 + s);
    for (int k = 0; k < cfg.tone_count; ++k)
      mean_ratio[k].push_back(dominance_ratio(chans[k]).mean());
  }
  std::vector<double> med(cfg.tone_count);
  for (int k = 0; k < cfg.tone_count; ++k) {
    auto& v = mean_ratio[k];
    std::sort(v.begin(), v.end());
    med[k] = 0.5 * (v[15] + v[16]);
  }
  for (int k = 1; k < cfg.tone_count; ++k) CHECK(med[k] <= med[k - 1] * 1.02);
  CHECK(med.front() > 1.0);
  CHECK(med.back() < 1.0);
}

TEST_CASE("near-far block construction") {
  SECTION("identity channel is unchanged") {
    ToneChannel ch;
    ch.H = CMatrix::Identity(4, 4);
    auto nf = make_near_far({ch}, 2);
    CHECK(test_util::max_abs_diff(nf[0].H, ch.H) == 0.0);
  }

  SECTION("10x10 split matches explicit block multiplication") {
    RngStream rng(11, 0);
    ToneChannel ch;
    ch.H = test_util::random_complex_matrix(10, 10, rng);
    auto nf = make_near_far({ch}, 5);
    CMatrix h11 = ch.H.block(0, 0, 5, 5), h12 = ch.H.block(0, 5, 5, 5);
    CMatrix h21 = ch.H.block(5, 0, 5, 5), h22 = ch.H.block(5, 5, 5, 5);
    CHECK(test_util::max_abs_diff(nf[0].H.block(0, 0, 5, 5), h11) == 0.0);
    CHECK(test_util::max_abs_diff(nf[0].H.block(0, 5, 5, 5), h12) == 0.0);
    CHECK(test_util::max_abs_diff(nf[0].H.block(5, 0, 5, 5), CMatrix(h22 * h21)) < 1e-14);
    CHECK(test_util::max_abs_diff(nf[0].H.block(5, 5, 5, 5), CMatrix(h22 * h22)) < 1e-14);
  }

  SECTION("2x2 scalar block scales the far row") {
    RngStream rng(12, 0);
    ToneChannel ch;
    ch.H = test_util::random_complex_matrix(2, 2, rng);
    auto nf = make_near_far({ch}, 1);
    CHECK(nf[0].H(0, 0) == ch.H(0, 0));
    CHECK(nf[0].H(0, 1) == ch.H(0, 1));
    CHECK(std::abs(nf[0].H(1, 0) - ch.H(1, 1) * ch.H(1, 0)) < 1e-15);
    CHECK(std::abs(nf[0].H(1, 1) - ch.H(1, 1) * ch.H(1, 1)) < 1e-15);
  }

  SECTION("idempotent when the far block is identity") {
    RngStream rng(13, 0);
    ToneChannel ch;
    ch.H = test_util::random_complex_matrix(4, 4, rng);
    ch.H.block(2, 2, 2, 2) = CMatrix::Identity(2, 2);
    auto once = make_near_far({ch}, 2);
    auto twice = make_near_far(once, 2);
    CHECK(test_util::max_abs_diff(twice[0].H, once[0].H) == 0.0);
  }

  SECTION("near_count out of range is rejected") {
    ToneChannel ch;
    ch.H = CMatrix::Identity(3, 3);
    CHECK_THROWS_AS(make_near_far({ch}, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_near_far({ch}, 3), std::invalid_argument);
  }

  SECTION("inputs are not modified") {
    RngStream rng(14, 0);
    ToneChannel ch;
    ch.H = test_util::random_complex_matrix(4, 4, rng);
    CMatrix original = ch.H;
    std::vector<ToneChannel> in{ch};
    auto nf = make_near_far(in, 2);
    CHECK(test_util::max_abs_diff(in[0].H, original) == 0.0);
  }
}

TEST_CASE("channel file round-trips bit-exactly") {
  auto chans = generate_cable(band_20_100mhz(5), 21);
  std::stringstream ss;
  save_channels(ss, chans);
  auto loaded = load_channels(ss);
  REQUIRE(loaded.size() == chans.size());
  for (size_t k = 0; k < chans.size(); ++k) {
    CHECK(loaded[k].tone_index == chans[k].tone_index);
    CHECK(loaded[k].frequency_hz == chans[k].frequency_hz);
    CHECK(loaded[k].noise_variance == chans[k].noise_variance);
    CHECK((loaded[k].H.array() == chans[k].H.array()).all());
  }
}

TEST_CASE("invalid cable configs are rejected") {
  CableConfig cfg = band_20_100mhz(10);
  cfg.n_users = 1;
  CHECK_THROWS_AS(generate_cable(cfg, 1), std::invalid_argument);
  cfg = band_20_100mhz(10);
  cfg.tone_count = 0;
  CHECK_THROWS_AS(generate_cable(cfg, 1), std::invalid_argument);
  cfg = band_20_100mhz(10);
  cfg.dominance_crossover_hz = 500e6;
  CHECK_THROWS_AS(generate_cable(cfg, 1), std::invalid_argument);
  cfg.fext_coupling_strength = 0.0;  // no dominance shaping, crossover unused
  CHECK_NOTHROW(generate_cable(cfg, 1));
}

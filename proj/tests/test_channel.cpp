// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "rydmimo/channel.hpp"
#include "rydmimo/numerics.hpp"

#include <cmath>

using namespace rydmimo;

TEST_CASE("single broadside path gives the all-ones channel") {
  ChannelConfig cfg;
  cfg.nt = 3;
  cfg.nr = 4;
  cfg.paths = 1;
  const ComplexMatrix h = channel_from_paths(cfg, {PathParams{Complex(1.0, 0.0), 0.0, 0.0}});
  CHECK(h.isApprox(ComplexMatrix::Ones(4, 3), 1e-15));
  const auto s = svd(h);
  CHECK(s.rank() == 1);
}

TEST_CASE("steering phases use 2 pi d / lambda from antenna zero") {
  ChannelConfig cfg;
  cfg.nt = 2;
  cfg.nr = 2;
  const double arrival = 30.0;
  const ComplexMatrix h = channel_from_paths(cfg, {PathParams{Complex(1.0, 0.0), arrival, 0.0}});
  const double phase = 2.0 * std::numbers::pi * cfg.spacing / cfg.wavelength * std::sin(arrival * std::numbers::pi / 180.0);
  CHECK(std::abs(h(0, 0) - Complex(1.0, 0.0)) <= 1e-15);
  CHECK(std::abs(h(1, 0) - std::polar(1.0, phase)) <= 1e-14);
}

TEST_CASE("single-path channels are rank one") {
  ChannelConfig cfg;
  cfg.nt = 6;
  cfg.nr = 5;
  cfg.paths = 1;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = svd(generate_channel(cfg, seed).h);
    CHECK(s.singular_values(1) / s.singular_values(0) < 1e-10);
  }
}

TEST_CASE("entry power equals the path count on average") {
  ChannelConfig cfg;  // 2x2, L = 10
  const int trials = 10000;
  RealMatrix power = RealMatrix::Zero(cfg.nr, cfg.nt);
  ComplexMatrix mean = ComplexMatrix::Zero(cfg.nr, cfg.nt);
  for (int t = 0; t < trials; ++t) {
    const ComplexMatrix h = generate_channel(cfg, static_cast<std::uint64_t>(t)).h;
    power += h.cwiseAbs2();
    mean += h;
  }
  power /= trials;
  mean /= trials;
  for (Eigen::Index i = 0; i < power.size(); ++i) {
    CHECK(std::abs(power(i) - cfg.paths) / cfg.paths < 0.05);
    // Each component has variance L / 2; standardized mean within 3.
    const double se = std::sqrt(cfg.paths / 2.0 / trials);
    CHECK(std::abs(mean(i).real()) / se < 3.0);
    CHECK(std::abs(mean(i).imag()) / se < 3.0);
  }
}

TEST_CASE("generation is deterministic per seed") {
  ChannelConfig cfg;
  cfg.nt = 4;
  cfg.nr = 3;
  const auto a = generate_channel(cfg, 99);
  const auto b = generate_channel(cfg, 99);
  CHECK(a.h == b.h);
  CHECK(a.r == b.r);
  const auto c = generate_channel(cfg, 100);
  CHECK(a.h != c.h);
}

TEST_CASE("reference magnitudes equal the reference gain") {
  ChannelConfig cfg;
  cfg.nr = 8;
  const ComplexVector r1 = generate_reference(cfg, 3);
  for (Eigen::Index m = 0; m < r1.size(); ++m) CHECK(std::abs(r1(m)) == doctest::Approx(1.0).epsilon(1e-15));
  cfg.reference_gain = 5.0;
  const ComplexVector r5 = generate_reference(cfg, 3);
  CHECK(r5.squaredNorm() == doctest::Approx(200.0).epsilon(1e-13));
  CHECK(generate_reference(cfg, 3) == r5);
}

TEST_CASE("receive SNR examples") {
  const ComplexMatrix i2 = ComplexMatrix::Identity(2, 2);
  CHECK(receive_snr_db(i2, i2, 1.0) == doctest::Approx(0.0));
  CHECK(receive_snr_db(ComplexMatrix(2.0 * i2), i2, 1.0) == doctest::Approx(10.0 * std::log10(4.0)));
  CHECK_THROWS_AS(receive_snr_db(i2, i2, 0.0), InvalidArgument);
}

TEST_CASE("receive SNR trace formula matches sampling") {
  Rng rng(5);
  const ComplexMatrix h = oracle::complex_gaussian(3, 4, rng);
  const ComplexMatrix g = oracle::complex_gaussian(4, 4, rng);
  const ComplexMatrix q = g * g.adjoint() / 4.0;
  const ComplexMatrix l = q.llt().matrixL();
  const int samples = 200000;
  double acc = 0.0;
  for (int s = 0; s < samples; ++s) acc += (h * (l * oracle::complex_gaussian(4, rng))).squaredNorm();
  const double sampled = 10.0 * std::log10(acc / samples / (3 * 0.5));
  CHECK(std::abs(std::pow(10.0, (sampled - receive_snr_db(h, q, 0.5)) / 10.0) - 1.0) < 0.01);
}

TEST_CASE("RSNR examples and monotonicity") {
  // ||r||^2 = 100, trace(HQH^H) = 9, nr noise = 1.
  ComplexMatrix h = ComplexMatrix::Zero(1, 1);
  h(0, 0) = 3.0;
  ComplexVector r(1);
  r << 10.0;
  CHECK(rsnr_db(h, r, ComplexMatrix::Identity(1, 1), 1.0) == doctest::Approx(10.0));
  double prev = std::numeric_limits<double>::infinity();
  for (double rho : {10.0, 1.0, 0.1, 0.01}) {
    ComplexVector rr(1);
    rr << rho;
    const double v = rsnr_db(h, rr, ComplexMatrix::Identity(1, 1), 1.0);
    CHECK(v < prev);
    prev = v;
  }
  CHECK_THROWS(rsnr_db(ComplexMatrix::Zero(1, 1), r, ComplexMatrix::Identity(1, 1), 0.0));
}

TEST_CASE("calibration hits receive SNR and RSNR targets") {
  ChannelConfig cfg;
  cfg.nt = 8;
  cfg.nr = 6;
  const auto ch = generate_channel(cfg, 17);
  for (double snr : {-5.0, 0.0, 10.0}) {
    const double p = power_for_receive_snr(ch.h, snr, 0.7);
    CHECK(receive_snr_db(ch.h, p, 0.7) == doctest::Approx(snr).epsilon(1e-12));
    for (double target : {-5.0, 10.0, 25.0}) {
      const double signal = p * ch.h.squaredNorm() / cfg.nt;
      const double rho = reference_gain_for_rsnr(cfg.nr, signal, 0.7, target);
      const ComplexVector r = ch.r * rho;
      CHECK(std::abs(rsnr_db(ch.h, r, p, 0.7) - target) < 0.01);
    }
  }
}

TEST_CASE("config validation names the field") {
  ChannelConfig cfg;
  cfg.paths = 0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("paths"), InvalidArgument);
  cfg = ChannelConfig{};
  cfg.wavelength = -1.0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("wavelength"), InvalidArgument);
  cfg = ChannelConfig{};
  cfg.nt = 0;
  CHECK_THROWS_AS(generate_channel(cfg, 0), InvalidArgument);
}

TEST_CASE("JSON round trip of a realization") {
  ChannelConfig cfg;
  cfg.nt = 3;
  cfg.nr = 2;
  cfg.reference_gain = 4.0;
  const auto ch = generate_channel(cfg, 21);
  const auto back = channel_from_json(nlohmann::json::parse(to_json(ch).dump()));
  CHECK(back.h == ch.h);
  CHECK(back.r == ch.r);
  CHECK(back.seed == ch.seed);
  CHECK(back.config.nt == 3);
  CHECK(back.config.reference_gain == 4.0);
  CHECK(back.paths.size() == ch.paths.size());
  const auto j = to_json(ch);
  CHECK(j.at("rows") == 2);
  CHECK(j.at("cols") == 3);
  CHECK(j.at("h").at(0).at(0).size() == 2);
}

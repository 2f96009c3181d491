// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "rydmimo/channel.hpp"
#include "rydmimo/frontend.hpp"
#include "rydmimo/precoding.hpp"

#include <cmath>

using namespace rydmimo;
using namespace std::complex_literals;

namespace {

ComplexMatrix example_channel() {
  ComplexMatrix h(2, 2);
  h << 2.0, 1i, 1i, 1.0;
  return h;
}

RealMatrix example_real() {
  RealMatrix h(2, 4);
  h << 2, 0, 0, -1, 0, 1, -1, 0;
  return h;
}

}  // namespace

TEST_CASE("IQ-aware precoder on the worked example") {
  const auto p = iq_digital_precoder(example_real(), 1.0, 1.0, 1);
  REQUIRE(p.f.rows() == 4);
  REQUIRE(p.f.cols() == 2);
  RealVector v1(4), v2(4);
  v1 << 0.8944, 0, 0, -0.4472;
  v2 << 0, 0.7071, -0.7071, 0;
  const double p1 = 1.15;
  const double p2 = 0.85;
  CHECK(p.f.col(0).squaredNorm() == doctest::Approx(p1).epsilon(1e-12));
  CHECK(p.f.col(1).squaredNorm() == doctest::Approx(p2).epsilon(1e-12));
  for (const auto& [col, ref] : {std::pair{0, v1}, std::pair{1, v2}}) {
    const RealVector u = p.f.col(col).normalized();
    const double sign = u.dot(ref) < 0 ? -1.0 : 1.0;
    CHECK((sign * u - ref).cwiseAbs().maxCoeff() <= 1e-3);
  }
  CHECK(p.power() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.gains(0) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
}

TEST_CASE("IQ-aware precoder on a scaled identity is uniform") {
  const RealMatrix h = 3.0 * RealMatrix::Identity(4, 4);
  const auto p = iq_digital_precoder(h, 2.0, 1.0, 2);
  for (Eigen::Index k = 0; k < 4; ++k) CHECK(p.allocation.allocation(k) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((p.f.transpose() * p.f - RealMatrix::Identity(4, 4)).norm() <= 1e-12);
}

TEST_CASE("IQ-aware precoder invariants") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const RealMatrix h = oracle::gaussian(6, 8, rng);
    const double power = std::exp(rng.uniform(-2.0, 2.0));
    const auto p = iq_digital_precoder(h, power, 0.5, 3);
    CHECK(std::abs(p.power() - power) <= 1e-9 * power);
    const RealMatrix gram = p.f.transpose() * p.f;
    CHECK((gram - RealMatrix(gram.diagonal().asDiagonal())).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, power));
    CHECK(p.block(0, 0).rows() == 4);
    CHECK(p.block(1, 1).cols() == 3);
  }
}

TEST_CASE("IQ-aware precoder beats random power-feasible precoders") {
  Rng rng(2);
  for (int instance = 0; instance < 3; ++instance) {
    const RealMatrix h = oracle::gaussian(4, 6, rng);
    const double power = 1.5;
    const auto p = iq_digital_precoder(h, power, 1.0, 2);
    const double best = achievable_rate(h, p.covariance(), 1.0);
    for (int s = 0; s < 1000; ++s) {
      const RealMatrix g = oracle::gaussian(6, 4, rng);
      const RealMatrix q = power * g * g.transpose() / (g * g.transpose()).trace();
      CHECK(best >= oracle::real_mi(h, q, 1.0) - 1e-12);
    }
  }
}

TEST_CASE("IQ-aware precoder rejects too many streams") {
  CHECK_THROWS_AS(iq_digital_precoder(example_real(), 1.0, 1.0, 2), InvalidArgument);
  RealMatrix rank_one = RealMatrix::Zero(3, 4);
  rank_one.row(0) << 1, 2, 3, 4;
  rank_one.row(1) = 2 * rank_one.row(0);
  CHECK_THROWS_AS(iq_digital_precoder(rank_one, 1.0, 1.0, 1), InvalidArgument);
  CHECK_THROWS_AS(iq_digital_precoder(example_real(), 0.0, 1.0, 1), InvalidArgument);
}

TEST_CASE("classical and IQ-aware coincide on a block-coupled channel") {
  // Rows (G; jG) give H_bar = diag(I, -I) real_equivalent(G); with equal
  // singular values of G both designs fill the same paired streams.
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexMatrix g = oracle::complex_gaussian(2, 2, rng);
    const ComplexMatrix u = Eigen::HouseholderQR<ComplexMatrix>(g).householderQ() * ComplexMatrix::Identity(2, 2);
    ComplexMatrix h(4, 2);
    h << 1.7 * u, ComplexMatrix(1.7i * u);
    const auto lc = linearize(h, ComplexVector::Ones(4));
    const auto iq = iq_digital_precoder(lc.real, 2.0, 1.0, 2);
    const auto cl = classical_precoder(lc.rotated, 2.0, 1.0, 2);
    CHECK(achievable_rate(lc.real, cl.covariance(), 1.0) ==
          doctest::Approx(achievable_rate(lc.real, iq.covariance(), 1.0)).epsilon(1e-9));
  }
}

TEST_CASE("classical precoder wastes quadrature power on a real diagonal channel") {
  ComplexMatrix h = ComplexMatrix::Zero(2, 2);
  h(0, 0) = 3.0;
  h(1, 1) = 1.5;
  const auto lc = linearize(h, ComplexVector::Ones(2));
  const auto iq = svd_precoder(lc.real, 1.0, 1.0, 2);
  const auto cl = classical_precoder(lc.rotated, 1.0, 1.0, 2);
  RealVector g(2);
  g << 3.0, 1.5;
  // Only the in-phase half of the classical signal reaches the detector.
  CHECK(achievable_rate(lc.real, cl.covariance(), 1.0) ==
        doctest::Approx(oracle::parallel_rate(g, cl.allocation.allocation, 1.0)).epsilon(1e-12));
  CHECK(achievable_rate(lc.real, iq.covariance(), 1.0) ==
        doctest::Approx(oracle::parallel_rate(g, oracle::water_fill_bisection(g, 2.0, 1.0), 1.0)).epsilon(1e-9));
  CHECK(achievable_rate(lc.real, iq.covariance(), 1.0) > achievable_rate(lc.real, cl.covariance(), 1.0));
}

TEST_CASE("classical precoder is strictly worse on the worked example") {
  const auto lc = linearize(example_channel(), ComplexVector::Ones(2));
  const auto iq = iq_digital_precoder(lc.real, 1.0, 1.0, 1);
  const auto cl = classical_precoder(lc.rotated, 1.0, 1.0, 1);
  CHECK(achievable_rate(lc.real, cl.covariance(), 1.0) < achievable_rate(lc.real, iq.covariance(), 1.0) - 1e-6);
}

TEST_CASE("classical precoder structure and power") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexMatrix h = oracle::complex_gaussian(4, 3, rng);
    const auto cl = classical_precoder(h, 2.5, 1.0, 2);
    const Eigen::Index nt = 3, ns = 2;
    CHECK(cl.f_real.topLeftCorner(nt, ns) == cl.f_real.bottomRightCorner(nt, ns));
    CHECK(cl.f_real.topRightCorner(nt, ns) == RealMatrix(-cl.f_real.bottomLeftCorner(nt, ns)));
    CHECK(cl.f_real == real_equivalent(cl.f));
    CHECK(std::abs(cl.complex_covariance().trace().real() - 2.5) <= 1e-9 * 2.5);
  }
  CHECK_THROWS_AS(classical_precoder(ComplexMatrix::Ones(2, 2), 1.0, 1.0, 2), InvalidArgument);
}

TEST_CASE("achievable rate examples") {
  CHECK(achievable_rate(example_real(), RealMatrix::Zero(4, 4), 1.0) == 0.0);
  RealVector g(1), p(1);
  g << std::sqrt(5.0);
  p << 1.15;
  CHECK(closed_form_rate(g, p, 1.0) == doctest::Approx(0.5 * std::log2(6.75)).epsilon(1e-14));
  CHECK(closed_form_rate(g, p, 1.0) == doctest::Approx(1.377).epsilon(1e-3));
  Rng rng(4);
  const RealMatrix h = oracle::gaussian(3, 4, rng);
  const RealMatrix b = oracle::gaussian(4, 4, rng);
  const RealMatrix q = b * b.transpose();
  CHECK(achievable_rate(h, q, 0.7) == mi_linearized(h, q, 0.7));
}

TEST_CASE("achievable rate equals the per-stream closed form") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index nr = 2 + static_cast<Eigen::Index>(rng.uniform() * 5);
    const Eigen::Index nt = 1 + static_cast<Eigen::Index>(rng.uniform() * 4);
    const RealMatrix h = oracle::gaussian(nr, 2 * nt, rng);
    const int streams = static_cast<int>(std::min(nr, 2 * nt));
    const auto p = svd_precoder(h, std::exp(rng.uniform(-3.0, 3.0)), 1.0, streams);
    CHECK(std::abs(achievable_rate(h, p.covariance(), 1.0) - closed_form_rate(p.gains, p.allocation.allocation, 1.0)) <=
          1e-9);
  }
}

TEST_CASE("IQ-aware rate dominates the classical rate") {
  Rng rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    const int nr = 2 + static_cast<int>(rng.uniform() * 3);
    const int nt = 2 + static_cast<int>(rng.uniform() * 3);
    const ComplexMatrix h = oracle::complex_gaussian(nr, nt, rng);
    const auto lc = linearize(h, oracle::complex_gaussian(nr, rng));
    const int ns = std::min(nr, 2 * nt) / 2;
    const double snr = std::pow(10.0, rng.uniform(-1.0, 2.0));
    const auto iq = iq_digital_precoder(lc.real, snr, 1.0, ns);
    const auto cl = classical_precoder(lc.rotated, snr, 1.0, ns);
    CHECK(achievable_rate(lc.real, iq.covariance(), 1.0) >= achievable_rate(lc.real, cl.covariance(), 1.0) - 1e-9);
  }
}

TEST_CASE("capacity is nondecreasing and concave in power") {
  Rng rng(7);
  const RealMatrix h = oracle::gaussian(4, 6, rng);
  std::vector<double> c;
  for (int i = 0; i <= 40; ++i) {
    const double power = 0.05 * (i + 1);
    c.push_back(achievable_rate(h, svd_precoder(h, power, 1.0, 4).covariance(), 1.0));
  }
  for (std::size_t i = 1; i < c.size(); ++i) CHECK(c[i] >= c[i - 1]);
  for (std::size_t i = 1; i + 1 < c.size(); ++i) CHECK(c[i + 1] - 2.0 * c[i] + c[i - 1] <= 1e-12);
}

TEST_CASE("classical precoder achieves the phase-coherent capacity") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const ComplexMatrix h = oracle::complex_gaussian(3, 4, rng);
    const double power = std::exp(rng.uniform(-2.0, 3.0));
    const double reference = oracle::complex_capacity(h, power, 0.8);
    const auto cl = classical_precoder(h, power, 0.8, 3);
    CHECK(linear_rate(h, cl.complex_covariance(), 0.8) == doctest::Approx(reference).epsilon(1e-9));
    CHECK(linear_capacity(h, power, 0.8) == doctest::Approx(reference).epsilon(1e-9));
  }
}

TEST_CASE("inphase-only precoder leaves the quadrature silent") {
  Rng rng(9);
  const ComplexMatrix h = oracle::complex_gaussian(4, 2, rng);
  const auto p = inphase_only_precoder(h, 1.0, 1.0, 2);
  CHECK(p.f.bottomRows(2).isZero(0.0));
  CHECK(p.power() == doctest::Approx(1.0).epsilon(1e-12));
  const RealMatrix re = h.real();
  const auto ref = svd_precoder(re, 1.0, 1.0, 2);
  CHECK(achievable_rate(realify_channel(h), p.covariance(), 1.0) ==
        doctest::Approx(achievable_rate(re, ref.covariance(), 1.0)).epsilon(1e-12));
}

TEST_CASE("DoF slopes at high SNR") {
  struct Case {
    int nr;
    double atomic;
  };
  for (const Case c : {Case{2, 1.0}, Case{3, 1.5}, Case{4, 2.0}}) {
    DofOptions opts;
    opts.channel.nt = 2;
    opts.channel.nr = c.nr;
    opts.snr_db = {30.0, 35.0, 40.0};
    opts.trials = 100;
    opts.seed = 100;
    const auto res = dof_slope(opts);
    CHECK(std::abs(res.atomic - c.atomic) <= 0.1);
    CHECK(std::abs(res.inphase - 1.0) <= 0.1);
    CHECK(std::abs(res.classical - 2.0) <= 0.1);
    CHECK(res.trials.size() == 100);
  }
}

TEST_CASE("capacity minus the high-SNR asymptote stays bounded") {
  // C - d log2(SNR / d) with d = min(nr / 2, nt) changes little over 30..40 dB.
  ChannelConfig cfg;
  cfg.nt = 2;
  cfg.nr = 4;
  const double d = 2.0;
  double drift = 0.0;
  const int trials = 50;
  for (int t = 0; t < trials; ++t) {
    const auto ch = generate_channel(cfg, 500 + static_cast<std::uint64_t>(t));
    const auto lc = linearize(ch.h, ch.r);
    auto gap = [&](double snr_db) {
      const double snr = std::pow(10.0, snr_db / 10.0);
      const double c = achievable_rate(lc.real, svd_precoder(lc.real, snr, 1.0, 4).covariance(), 1.0);
      return c - d * std::log2(snr / d);
    };
    drift += std::abs(gap(40.0) - gap(30.0));
  }
  CHECK(drift / trials < 0.1 * std::log2(10.0));
}

TEST_CASE("DoF grid validation") {
  ChannelConfig cfg;
  CHECK_THROWS_AS(dof_trial(cfg, {30.0}, 0), InvalidArgument);
  CHECK_THROWS_AS(dof_trial(cfg, {35.0, 30.0}, 0), InvalidArgument);
  CHECK_THROWS_AS(dof_trial(cfg, {30.0, 30.0}, 0), InvalidArgument);
  const auto two = dof_trial(cfg, {30.0, 40.0}, 0);
  CHECK(two.at_snr_db.size() == 1);
  CHECK(two.at_snr_db[0] == 35.0);
}

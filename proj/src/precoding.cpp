// SPDX-License-Identifier: Apache-2.0
#include "rydmimo/precoding.hpp"

#include "rydmimo/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace rydmimo {

RealMatrix DigitalPrecoder::block(int row, int col) const {
  if (f.cols() % 2 != 0) throw InvalidArgument("DigitalPrecoder::block: odd stream count");
  if (row < 0 || row > 1 || col < 0 || col > 1) throw InvalidArgument("DigitalPrecoder::block: index out of range");
  const Eigen::Index nt = antennas();
  const Eigen::Index ns = complex_streams();
  return f.block(row * nt, col * ns, nt, ns);
}

DigitalPrecoder svd_precoder(const RealMatrix& h_bar, double power, double noise_variance, int real_streams) {
  if (!(power > 0)) throw InvalidArgument("precoder: power must be positive");
  if (!(noise_variance > 0)) throw InvalidArgument("precoder: noise variance must be positive");
  if (real_streams < 1) throw InvalidArgument("precoder: need at least one stream");
  if (h_bar.cols() % 2 != 0) throw InvalidArgument("precoder: real channel must have 2nt columns");
  const auto dec = svd(h_bar);
  if (real_streams > dec.rank())
    throw InvalidArgument("precoder: " + std::to_string(real_streams) + " real streams exceed channel rank " +
                          std::to_string(dec.rank()));
  DigitalPrecoder out;
  out.gains = dec.singular_values.head(real_streams);
  out.allocation = water_fill(out.gains, 2.0 * power, noise_variance);
  out.f = dec.v.leftCols(real_streams) * out.allocation.allocation.cwiseSqrt().asDiagonal();
  return out;
}

DigitalPrecoder iq_digital_precoder(const RealMatrix& h_bar, double power, double noise_variance, int ns) {
  if (ns < 1) throw InvalidArgument("iq_digital_precoder: ns must be >= 1");
  return svd_precoder(h_bar, power, noise_variance, 2 * ns);
}

DigitalPrecoder inphase_only_precoder(const ComplexMatrix& h_rot, double power, double noise_variance,
                                      int real_streams) {
  const RealMatrix h_in = h_rot.real();
  // Pad with zero quadrature columns so svd_precoder sees a 2nt-column channel;
  // the zero columns carry no gain and are never selected.
  RealMatrix padded = RealMatrix::Zero(h_in.rows(), 2 * h_in.cols());
  padded.leftCols(h_in.cols()) = h_in;
  DigitalPrecoder out = svd_precoder(padded, power, noise_variance, real_streams);
  out.f.bottomRows(h_in.cols()).setZero();
  return out;
}

ClassicalPrecoder classical_precoder(const ComplexMatrix& h_rot, double power, double noise_variance, int ns) {
  if (!(power > 0)) throw InvalidArgument("classical_precoder: power must be positive");
  if (!(noise_variance > 0)) throw InvalidArgument("classical_precoder: noise variance must be positive");
  if (ns < 1) throw InvalidArgument("classical_precoder: ns must be >= 1");
  const auto dec = svd(h_rot);
  if (ns > dec.rank())
    throw InvalidArgument("classical_precoder: " + std::to_string(ns) + " streams exceed channel rank " +
                          std::to_string(dec.rank()));
  ClassicalPrecoder out;
  const RealVector gains = dec.singular_values.head(ns);
  out.allocation = water_fill(gains, power, noise_variance);
  out.f = dec.v.leftCols(ns) * out.allocation.allocation.cwiseSqrt().cast<Complex>().asDiagonal();
  out.f_real = real_equivalent(out.f);
  return out;
}

double achievable_rate(const RealMatrix& h_bar, const RealMatrix& q_bar, double noise_variance) {
  return mi_linearized(h_bar, q_bar, noise_variance);
}

double closed_form_rate(const RealVector& gains, const RealVector& allocation, double noise_variance) {
  if (gains.size() != allocation.size()) throw InvalidArgument("closed_form_rate: size mismatch");
  double rate = 0.0;
  for (Eigen::Index k = 0; k < gains.size(); ++k)
    rate += 0.5 * std::log2(1.0 + gains(k) * gains(k) * allocation(k) / noise_variance);
  return rate;
}

double linear_rate(const ComplexMatrix& h, const ComplexMatrix& q, double noise_variance) {
  if (!(noise_variance > 0)) throw InvalidArgument("linear_rate: noise variance must be positive");
  if (q.rows() != h.cols() || q.cols() != h.cols()) throw InvalidArgument("linear_rate: covariance must be nt x nt");
  const ComplexMatrix m = h * q * h.adjoint() / noise_variance;
  return log2_det_identity_plus(m);
}

double linear_capacity(const ComplexMatrix& h, double power, double noise_variance) {
  const auto dec = svd(h);
  const RealVector gains = dec.singular_values.head(dec.rank());
  const auto wf = water_fill(gains, power, noise_variance);
  double rate = 0.0;
  for (Eigen::Index k = 0; k < gains.size(); ++k)
    rate += std::log2(1.0 + gains(k) * gains(k) * wf.allocation(k) / noise_variance);
  return rate;
}

DofSlopes dof_trial(const ChannelConfig& channel, const std::vector<double>& snr_db, std::uint64_t seed) {
  if (snr_db.size() < 2) throw InvalidArgument("dof_slope: SNR grid needs at least two points");
  if (!std::is_sorted(snr_db.begin(), snr_db.end()) ||
      std::adjacent_find(snr_db.begin(), snr_db.end()) != snr_db.end())
    throw InvalidArgument("dof_slope: SNR grid must be strictly increasing");

  const ChannelRealization ch = generate_channel(channel, seed);
  const LinearizedChannel lc = linearize(ch.h, ch.r);
  const double noise = channel.noise_variance;
  const int atomic_streams = static_cast<int>(std::min<Eigen::Index>(
      std::min(channel.nr, 2 * channel.nt), svd(lc.real).rank()));
  const int inphase_streams = static_cast<int>(std::min<Eigen::Index>(
      std::min(channel.nr, channel.nt), svd(RealMatrix(lc.rotated.real())).rank()));

  std::vector<double> atomic, inphase, classical;
  for (double snr : snr_db) {
    const double power = std::pow(10.0, snr / 10.0) * noise;
    const auto iq = svd_precoder(lc.real, power, noise, atomic_streams);
    atomic.push_back(closed_form_rate(iq.gains, iq.allocation.allocation, noise));
    const auto ip = inphase_only_precoder(lc.rotated, power, noise, inphase_streams);
    inphase.push_back(closed_form_rate(ip.gains, ip.allocation.allocation, noise));
    classical.push_back(linear_capacity(ch.h, power, noise));
  }

  auto log2_snr = [&](std::size_t i) { return snr_db[i] / 10.0 * std::numbers::log2e / std::numbers::log10e; };
  DofSlopes out;
  auto push = [&](std::size_t lo, std::size_t hi, double at) {
    const double dx = log2_snr(hi) - log2_snr(lo);
    out.at_snr_db.push_back(at);
    out.atomic.push_back((atomic[hi] - atomic[lo]) / dx);
    out.inphase.push_back((inphase[hi] - inphase[lo]) / dx);
    out.classical.push_back((classical[hi] - classical[lo]) / dx);
  };
  if (snr_db.size() == 2) {
    push(0, 1, 0.5 * (snr_db[0] + snr_db[1]));
  } else {
    for (std::size_t i = 1; i + 1 < snr_db.size(); ++i) push(i - 1, i + 1, snr_db[i]);
  }
  return out;
}

DofResult dof_slope(const DofOptions& opts) {
  if (opts.trials < 1) throw InvalidArgument("dof_slope: trials must be >= 1");
  opts.channel.validate();
  DofResult out;
  std::size_t count = 0;
  for (std::size_t t = 0; t < opts.trials; ++t) {
    DofSlopes s = dof_trial(opts.channel, opts.snr_db, opts.seed + t);
    for (std::size_t i = 0; i < s.atomic.size(); ++i) {
      out.atomic += s.atomic[i];
      out.inphase += s.inphase[i];
      out.classical += s.classical[i];
      ++count;
    }
    out.trials.push_back(std::move(s));
  }
  out.atomic /= static_cast<double>(count);
  out.inphase /= static_cast<double>(count);
  out.classical /= static_cast<double>(count);
  return out;
}

}  // namespace rydmimo

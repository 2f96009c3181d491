// SPDX-License-Identifier: Apache-2.0
//
// Fully digital precoders for the linearized atomic channel: the IQ-aware
// SVD/water-filling precoder, the complex-valued classical baseline, the
// in-phase-only baseline, rate evaluation and high-SNR DoF slopes.
#pragma once

#include "rydmimo/channel.hpp"
#include "rydmimo/numerics.hpp"
#include "rydmimo/types.hpp"

#include <cstdint>
#include <vector>

namespace rydmimo {

/// Real precoder F_bar (2nt x k) acting on (s_I; s_Q) with s ~ N(0, I / 2),
/// so that Q_bar = F_bar F_bar^T / 2.
struct DigitalPrecoder {
  RealMatrix f;
  RealVector gains;  // channel singular values of the streams used
  WaterFillResult allocation;

  Eigen::Index antennas() const { return f.rows() / 2; }
  Eigen::Index complex_streams() const { return f.cols() / 2; }
  /// Block (row, col) in {0, 1}^2 of the 2x2 IQ partition; requires an even
  /// column count.
  RealMatrix block(int row, int col) const;
  RealMatrix covariance() const { return 0.5 * f * f.transpose(); }
  double power() const { return 0.5 * f.squaredNorm(); }
};

struct ClassicalPrecoder {
  ComplexMatrix f;  // nt x ns
  RealMatrix f_real;  // real_equivalent(f)
  WaterFillResult allocation;

  RealMatrix covariance() const { return 0.5 * f_real * f_real.transpose(); }
  ComplexMatrix complex_covariance() const { return f * f.adjoint(); }
};

/// Capacity-achieving IQ-aware precoder: the top 2 ns right singular vectors
/// of H_bar scaled by the square roots of a water-filling allocation that
/// sums to 2 power. Throws InvalidArgument when 2 ns exceeds rank(H_bar).
DigitalPrecoder iq_digital_precoder(const RealMatrix& h_bar, double power, double noise_variance, int ns);

/// Same construction with an arbitrary number of real streams (may be odd).
DigitalPrecoder svd_precoder(const RealMatrix& h_bar, double power, double noise_variance, int real_streams);

/// In-phase-only transmission: x_Q = 0 and the precoder is designed on the
/// real channel rows Re(H_rot). Returned as a 2nt-row precoder whose
/// quadrature rows are zero.
DigitalPrecoder inphase_only_precoder(const ComplexMatrix& h_rot, double power, double noise_variance,
                                      int real_streams);

/// Classical complex precoder: top ns complex right singular vectors of
/// H_rot with water-filling on the complex singular values (total power).
ClassicalPrecoder classical_precoder(const ComplexMatrix& h_rot, double power, double noise_variance, int ns);

/// 0.5 log2 det(I + (2 / noise) H_bar Q_bar H_bar^T); identical to
/// mi_linearized.
double achievable_rate(const RealMatrix& h_bar, const RealMatrix& q_bar, double noise_variance);

/// sum_k 0.5 log2(1 + gain_k^2 p_k / noise).
double closed_form_rate(const RealVector& gains, const RealVector& allocation, double noise_variance);

/// log2 det(I + H Q H^H / noise) of a phase-coherent linear receiver.
double linear_rate(const ComplexMatrix& h, const ComplexMatrix& q, double noise_variance);

/// Water-filled capacity of a phase-coherent linear receiver.
double linear_capacity(const ComplexMatrix& h, double power, double noise_variance);

struct DofOptions {
  ChannelConfig channel;        // nt, nr, geometry, noise variance
  std::vector<double> snr_db;   // sorted, >= 2 points; SNR = P / noise
  std::size_t trials = 500;
  std::uint64_t seed = 0;
};

/// Finite-difference slopes dC / d(log2 SNR) at each evaluation point of the
/// grid: central differences at interior points, or the single forward
/// difference of a two-point grid.
struct DofSlopes {
  std::vector<double> at_snr_db;
  std::vector<double> atomic;     // IQ-aware, 2ns = min(nr, 2nt) real streams
  std::vector<double> inphase;    // x_Q = 0, min(nr, nt) real streams
  std::vector<double> classical;  // phase-coherent receiver
};

DofSlopes dof_trial(const ChannelConfig& channel, const std::vector<double>& snr_db, std::uint64_t seed);

struct DofResult {
  double atomic = 0.0;
  double inphase = 0.0;
  double classical = 0.0;
  std::vector<DofSlopes> trials;
};

/// Mean slope over trials and evaluation points; trial t uses channel seed
/// seed + t.
DofResult dof_slope(const DofOptions& opts);

}  // namespace rydmimo

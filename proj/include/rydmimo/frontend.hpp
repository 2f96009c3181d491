// SPDX-License-Identifier: Apache-2.0
//
// Receiver models for an atomic array driven by a local-oscillator
// reference: the exact magnitude detector y = |Hx + r + w| and its
// strong-reference linearization y - |r| ~ Re(H_rot x) + w_bar.
#pragma once

#include "rydmimo/types.hpp"

#include <cstddef>
#include <cstdint>

namespace rydmimo {

struct LinearizedChannel {
  ComplexMatrix rotated;  // row m multiplied by exp(-j arg r_m)
  RealMatrix real;        // (rotated_I, -rotated_Q), nr x 2nt
  RealVector offset;      // |r|
};

/// Throws NumericError when some r_m is zero.
LinearizedChannel linearize(const ComplexMatrix& h, const ComplexVector& r);

/// y = |Hx + r + w|, element-wise magnitude.
RealVector measure_magnitude(const ComplexMatrix& h, const ComplexVector& x, const ComplexVector& r,
                             const ComplexVector& w);

/// y_bar = Re(H_rot x) + w_bar.
RealVector measure_linearized(const LinearizedChannel& lc, const ComplexVector& x, const RealVector& w_bar);

/// Real noise of the linearized model paired with the complex noise draw w:
/// w_bar_m = Re(exp(-j arg r_m) w_m).
RealVector rotate_noise(const ComplexVector& w, const ComplexVector& r);

/// 0.5 log2 det(I + (2 / noise) H_bar Q_bar H_bar^T). Throws NumericError
/// when Q_bar is not symmetric positive semidefinite.
double mi_linearized(const RealMatrix& h_bar, const RealMatrix& q_bar, double noise_variance);

/// Natural log of I0(z) for z >= 0, accurate for arguments far beyond the
/// overflow point of I0 itself.
double log_bessel_i0(double z);

/// Log-density of a Rician magnitude: y = |nu + n| with n ~ CN(0, 2 s2),
/// i.e. s2 is the per-component noise variance.
double log_rician_density(double y, double nu, double s2);

struct MiOptions {
  std::size_t samples = 100000;      // outer (y, x) draws
  std::size_t inner_samples = 1000;  // mixture components for p(y)
  std::size_t batches = 20;
  unsigned jobs = 1;
};

struct MiEstimate {
  double value = 0.0;           // bits
  double standard_error = 0.0;  // bits, from batch means
  std::size_t samples = 0;
  bool low_sample_warning = false;  // fewer than 1e4 outer samples
};

/// Nested Monte-Carlo estimate of I(y; x) for y = |Hx + r + w|,
/// x_bar ~ N(0, q_bar), w ~ CN(0, noise I).
///
/// log p(y | x) is evaluated exactly as a product of Rician densities; p(y)
/// is the average of p(y | x'_j) over a shared pool of inner draws. Every
/// batch owns its own RNG sub-stream, so the result does not depend on
/// `jobs`.
MiEstimate mi_nonlinear_mc(const ComplexMatrix& h, const ComplexVector& r, double noise_variance,
                           const RealMatrix& q_bar, const MiOptions& opts, std::uint64_t seed);

/// Factor L with L L^T = q_bar (symmetric eigendecomposition, clipped at zero).
/// Throws NumericError when q_bar has an eigenvalue below -1e-10 * max(1, ||q_bar||).
RealMatrix psd_factor(const RealMatrix& q_bar);

}  // namespace rydmimo

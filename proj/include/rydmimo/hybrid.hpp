// SPDX-License-Identifier: Apache-2.0
//
// IQ-aware hybrid precoding: a block-coupled analog phase-shifter network A
// followed by an IQ-aware real digital precoder D_bar, fitted to a fully
// digital precoder F_bar by alternating minimization.
//
// Fully-connected (FC): every RF chain reaches every antenna. The fit runs
// on the lifted problem min || F_tilde D_tilde^T - gamma A_bar ||_F^2 with
// F_tilde = (F_bar, F_c) and D_tilde orthogonal, gamma = sqrt(2P / nt).
//
// Sub-connected (SC): RF chain n drives antennas [nK, (n+1)K) only, so
// A_bar^T A_bar = K I and the power constraint reduces to
// (K / 2) ||D_bar||_F^2 = P.
#pragma once

#include "rydmimo/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace rydmimo {

enum class Architecture { FullyConnected, SubConnected };

struct HybridPrecoder {
  ComplexMatrix analog;  // nt x nrf
  RealMatrix digital;    // 2nrf x 2ns
  Architecture architecture = Architecture::FullyConnected;
  int antennas_per_chain = 0;  // K, SC only

  RealMatrix analog_real() const;
  /// A_bar D_bar, the 2nt x 2ns real precoder actually radiated.
  RealMatrix effective() const;
  RealMatrix covariance() const;
  double power() const;
};

struct AltMinTrace {
  std::vector<double> objective;  // one value per completed iteration
  int iterations = 0;
  bool converged = false;

  /// Every value is at most its predecessor plus `slack`.
  bool monotone(double slack = 1e-12) const;
  /// "iteration,objective" header then one row per iteration (1-based).
  void write_csv(std::ostream& os) const;
};

struct AltMinOptions {
  double power = 1.0;
  double tol = 1e-6;  // stop when the relative decrease of one iteration drops below tol
  int max_iter = 500;
  std::uint64_t seed = 0;
  int restarts = 1;  // best final objective over restarts with seeds seed, seed + 1, ...
};

struct HybridResult {
  HybridPrecoder precoder;
  AltMinTrace trace;
};

/// Unit-modulus minimizer of || Z - gamma A_bar ||_F^2 for Z = F_tilde D_tilde^T.
/// With Z partitioned into nt x nrf blocks Z11 Z12 / Z21 Z22, entry (m, n) of
/// A is the projection of (Z11 + Z22, Z21 - Z12)(m, n) onto the unit circle.
/// The minimizer does not depend on gamma > 0. Entries with Z = 0 are ties;
/// they keep the phase from `current` (phase 0 in the two-argument form).
ComplexMatrix fc_analog_update(const RealMatrix& f_tilde, const RealMatrix& d_tilde);
ComplexMatrix fc_analog_update(const RealMatrix& f_tilde, const RealMatrix& d_tilde, const ComplexMatrix& current);

/// Orthogonal D_tilde maximizing trace(D_tilde F_tilde^T A_bar).
RealMatrix fc_digital_update(const RealMatrix& f_tilde, const RealMatrix& a_bar);

/// F_c = gamma A_bar D_tilde(:, 2ns:), the auxiliary columns that cancel the
/// residual of the complementary digital columns.
RealMatrix fc_aux_update(const RealMatrix& a_bar, const RealMatrix& d_tilde, double gamma, int ns);

/// || F_tilde - gamma A_bar D_tilde ||_F^2.
double fc_objective(const RealMatrix& f_tilde, const RealMatrix& a_bar, const RealMatrix& d_tilde, double gamma);

/// Algorithm 1 (FC). Requires ns <= nrf <= nt with F_bar of shape 2nt x 2ns.
/// The trace records the lifted objective; the returned digital part is
/// rescaled so that power() == opts.power.
HybridResult alg1_fc(const RealMatrix& f_bar, int nrf, const AltMinOptions& opts);

/// Block-diagonal unit-modulus maximizer of trace(D_bar F_bar^T A_bar):
/// theta(n, k) = arg Y(nK + k, n) for Y = (Y11 + Y22) + j(Y21 - Y12) from
/// F_bar D_bar^T. A zero Y entry gives phase 0.
ComplexMatrix sc_analog_update(const RealMatrix& f_bar, const RealMatrix& d_bar, int antennas_per_chain);

/// sqrt(2P / (K ||A_bar^T F_bar||^2)) A_bar^T F_bar. Throws NumericError when
/// A_bar^T F_bar vanishes.
RealMatrix sc_digital_update(const RealMatrix& f_bar, const RealMatrix& a_bar, double power, int antennas_per_chain);

/// Block-diagonal analog matrix from per-chain phases, phases(k, n) for
/// antenna k of chain n.
ComplexMatrix sc_analog_from_phases(const RealMatrix& phases);

/// Algorithm 2 (SC). Requires nt divisible by nrf and ns <= nrf.
HybridResult alg2_sc(const RealMatrix& f_bar, int nrf, const AltMinOptions& opts);

}  // namespace rydmimo

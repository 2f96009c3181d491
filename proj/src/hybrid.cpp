// SPDX-License-Identifier: Apache-2.0
#include "rydmimo/hybrid.hpp"

#include "rydmimo/numerics.hpp"
#include "rydmimo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

namespace rydmimo {

RealMatrix HybridPrecoder::analog_real() const { return real_equivalent(analog); }

RealMatrix HybridPrecoder::effective() const { return analog_real() * digital; }

RealMatrix HybridPrecoder::covariance() const {
  const RealMatrix f = effective();
  return 0.5 * f * f.transpose();
}

double HybridPrecoder::power() const { return 0.5 * effective().squaredNorm(); }

bool AltMinTrace::monotone(double slack) const {
  for (std::size_t i = 1; i < objective.size(); ++i)
    if (objective[i] > objective[i - 1] + slack) return false;
  return true;
}

void AltMinTrace::write_csv(std::ostream& os) const {
  os << "iteration,objective\n";
  char buf[64];
  for (std::size_t i = 0; i < objective.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, objective[i]);
    os << buf;
  }
}

namespace {

struct Dims {
  Eigen::Index nt;
  Eigen::Index ns;
};

Dims check_target(const RealMatrix& f_bar, int nrf) {
  if (f_bar.rows() == 0 || f_bar.cols() == 0 || f_bar.rows() % 2 != 0 || f_bar.cols() % 2 != 0)
    throw InvalidArgument("hybrid: F_bar must be 2nt x 2ns with nt, ns >= 1");
  require_finite(f_bar, "hybrid: F_bar");
  const Dims d{f_bar.rows() / 2, f_bar.cols() / 2};
  if (nrf < d.ns || nrf > d.nt)
    throw InvalidArgument("hybrid: need ns <= nrf <= nt (ns=" + std::to_string(d.ns) + ", nrf=" +
                          std::to_string(nrf) + ", nt=" + std::to_string(d.nt) + ")");
  return d;
}

void check_options(const AltMinOptions& opts) {
  if (!(opts.power > 0) || !std::isfinite(opts.power)) throw InvalidArgument("hybrid: power must be positive");
  if (!(opts.tol >= 0)) throw InvalidArgument("hybrid: tol must be nonnegative");
  if (opts.max_iter < 1) throw InvalidArgument("hybrid: max_iter must be >= 1");
  if (opts.restarts < 1) throw InvalidArgument("hybrid: restarts must be >= 1");
}

ComplexMatrix random_phases(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  ComplexMatrix a(rows, cols);
  for (Eigen::Index n = 0; n < cols; ++n)
    for (Eigen::Index m = 0; m < rows; ++m) a(m, n) = std::polar(1.0, rng.uniform(0.0, 2.0 * std::numbers::pi));
  return a;
}

bool decrease_below(double prev, double current, double tol, double floor) {
  return current <= floor || prev - current <= tol * prev;
}

template <typename Run>
HybridResult best_of_restarts(const AltMinOptions& opts, Run run) {
  HybridResult best;
  double best_value = std::numeric_limits<double>::infinity();
  for (int k = 0; k < opts.restarts; ++k) {
    HybridResult r = run(opts.seed + static_cast<std::uint64_t>(k));
    const double value = r.trace.objective.empty() ? std::numeric_limits<double>::infinity() : r.trace.objective.back();
    if (k == 0 || value < best_value) {
      best_value = value;
      best = std::move(r);
    }
  }
  return best;
}

}  // namespace

ComplexMatrix fc_analog_update(const RealMatrix& f_tilde, const RealMatrix& d_tilde) {
  return fc_analog_update(f_tilde, d_tilde, ComplexMatrix::Ones(f_tilde.rows() / 2, d_tilde.rows() / 2));
}

ComplexMatrix fc_analog_update(const RealMatrix& f_tilde, const RealMatrix& d_tilde, const ComplexMatrix& current) {
  if (f_tilde.cols() != d_tilde.cols() || d_tilde.rows() != d_tilde.cols() || f_tilde.rows() % 2 != 0 ||
      d_tilde.rows() % 2 != 0)
    throw InvalidArgument("fc_analog_update: shape mismatch");
  const Eigen::Index nt = f_tilde.rows() / 2;
  const Eigen::Index nrf = d_tilde.rows() / 2;
  if (current.rows() != nt || current.cols() != nrf) throw InvalidArgument("fc_analog_update: current A must be nt x nrf");
  const RealMatrix z = f_tilde * d_tilde.transpose();
  const RealMatrix z_i = z.topLeftCorner(nt, nrf) + z.bottomRightCorner(nt, nrf);
  const RealMatrix z_q = z.bottomLeftCorner(nt, nrf) - z.topRightCorner(nt, nrf);
  ComplexMatrix a(nt, nrf);
  for (Eigen::Index n = 0; n < nrf; ++n)
    for (Eigen::Index m = 0; m < nt; ++m)
      a(m, n) = z_i(m, n) == 0.0 && z_q(m, n) == 0.0 ? current(m, n) : project_unit_modulus(z_i(m, n), z_q(m, n));
  return a;
}

RealMatrix fc_digital_update(const RealMatrix& f_tilde, const RealMatrix& a_bar) {
  if (f_tilde.rows() != a_bar.rows() || f_tilde.cols() != a_bar.cols())
    throw InvalidArgument("fc_digital_update: F_tilde and A_bar must both be 2nt x 2nrf");
  return procrustes(f_tilde.transpose() * a_bar);
}

RealMatrix fc_aux_update(const RealMatrix& a_bar, const RealMatrix& d_tilde, double gamma, int ns) {
  if (a_bar.cols() != d_tilde.rows() || d_tilde.rows() != d_tilde.cols() || 2 * ns > d_tilde.cols() || ns < 0)
    throw InvalidArgument("fc_aux_update: shape mismatch");
  return gamma * a_bar * d_tilde.rightCols(d_tilde.cols() - 2 * ns);
}

double fc_objective(const RealMatrix& f_tilde, const RealMatrix& a_bar, const RealMatrix& d_tilde, double gamma) {
  return (f_tilde - gamma * a_bar * d_tilde).squaredNorm();
}

HybridResult alg1_fc(const RealMatrix& f_bar, int nrf, const AltMinOptions& opts) {
  const Dims dims = check_target(f_bar, nrf);
  check_options(opts);
  const double gamma = std::sqrt(2.0 * opts.power / static_cast<double>(dims.nt));
  const double floor = 1e-28 * std::max(f_bar.squaredNorm(), std::numeric_limits<double>::min());

  return best_of_restarts(opts, [&](std::uint64_t seed) {
    Rng rng = Rng::substream(seed, 0);
    ComplexMatrix a = random_phases(dims.nt, nrf, rng);
    RealMatrix a_bar = real_equivalent(a);
    RealMatrix f_tilde = RealMatrix::Zero(2 * dims.nt, 2 * nrf);
    f_tilde.leftCols(2 * dims.ns) = f_bar;
    RealMatrix d_tilde = RealMatrix::Identity(2 * nrf, 2 * nrf);

    HybridResult out;
    double prev = fc_objective(f_tilde, a_bar, d_tilde, gamma);
    for (int it = 0; it < opts.max_iter; ++it) {
      a = fc_analog_update(f_tilde, d_tilde, a);
      a_bar = real_equivalent(a);
      d_tilde = fc_digital_update(f_tilde, a_bar);
      f_tilde.rightCols(2 * (nrf - dims.ns)) = fc_aux_update(a_bar, d_tilde, gamma, static_cast<int>(dims.ns));
      const double current = fc_objective(f_tilde, a_bar, d_tilde, gamma);
      out.trace.objective.push_back(current);
      out.trace.iterations = it + 1;
      if (decrease_below(prev, current, opts.tol, floor)) {
        out.trace.converged = true;
        break;
      }
      prev = current;
    }

    const RealMatrix d_u = d_tilde.leftCols(2 * dims.ns);
    const double radiated = (a_bar * d_u).squaredNorm();
    if (!(radiated > 0)) throw NumericError("alg1_fc: analog-digital product vanished");
    out.precoder.analog = a;
    out.precoder.digital = std::sqrt(2.0 * opts.power / radiated) * d_u;
    out.precoder.architecture = Architecture::FullyConnected;
    out.precoder.antennas_per_chain = 0;
    return out;
  });
}

ComplexMatrix sc_analog_from_phases(const RealMatrix& phases) {
  const Eigen::Index k = phases.rows();
  const Eigen::Index nrf = phases.cols();
  ComplexMatrix a = ComplexMatrix::Zero(k * nrf, nrf);
  for (Eigen::Index n = 0; n < nrf; ++n)
    for (Eigen::Index i = 0; i < k; ++i) a(n * k + i, n) = std::polar(1.0, phases(i, n));
  return a;
}

ComplexMatrix sc_analog_update(const RealMatrix& f_bar, const RealMatrix& d_bar, int antennas_per_chain) {
  if (f_bar.cols() != d_bar.cols() || f_bar.rows() % 2 != 0 || d_bar.rows() % 2 != 0 || antennas_per_chain < 1)
    throw InvalidArgument("sc_analog_update: shape mismatch");
  const Eigen::Index nt = f_bar.rows() / 2;
  const Eigen::Index nrf = d_bar.rows() / 2;
  if (nt != nrf * antennas_per_chain) throw InvalidArgument("sc_analog_update: nt must equal nrf * K");
  const RealMatrix y = f_bar * d_bar.transpose();
  ComplexMatrix a = ComplexMatrix::Zero(nt, nrf);
  for (Eigen::Index n = 0; n < nrf; ++n) {
    for (Eigen::Index k = 0; k < antennas_per_chain; ++k) {
      const Eigen::Index m = n * antennas_per_chain + k;
      const double y_i = y(m, n) + y(nt + m, nrf + n);
      const double y_q = y(nt + m, n) - y(m, nrf + n);
      a(m, n) = project_unit_modulus(y_i, y_q);
    }
  }
  return a;
}

RealMatrix sc_digital_update(const RealMatrix& f_bar, const RealMatrix& a_bar, double power, int antennas_per_chain) {
  if (f_bar.rows() != a_bar.rows()) throw InvalidArgument("sc_digital_update: shape mismatch");
  if (!(power > 0) || antennas_per_chain < 1) throw InvalidArgument("sc_digital_update: need power > 0 and K >= 1");
  const RealMatrix proj = a_bar.transpose() * f_bar;
  const double norm2 = proj.squaredNorm();
  if (!(norm2 > 0)) throw NumericError("sc_digital_update: degenerate alignment (A_bar^T F_bar = 0)");
  return std::sqrt(2.0 * power / (antennas_per_chain * norm2)) * proj;
}

HybridResult alg2_sc(const RealMatrix& f_bar, int nrf, const AltMinOptions& opts) {
  const Dims dims = check_target(f_bar, nrf);
  check_options(opts);
  if (dims.nt % nrf != 0)
    throw InvalidArgument("alg2_sc: nt=" + std::to_string(dims.nt) + " is not divisible by nrf=" + std::to_string(nrf));
  const int k = static_cast<int>(dims.nt / nrf);
  const double floor = 1e-28 * std::max(f_bar.squaredNorm(), std::numeric_limits<double>::min());

  return best_of_restarts(opts, [&](std::uint64_t seed) {
    Rng rng = Rng::substream(seed, 0);
    RealMatrix phases(k, nrf);
    for (Eigen::Index n = 0; n < nrf; ++n)
      for (Eigen::Index i = 0; i < k; ++i) phases(i, n) = rng.uniform(0.0, 2.0 * std::numbers::pi);
    ComplexMatrix a = sc_analog_from_phases(phases);
    RealMatrix a_bar = real_equivalent(a);
    RealMatrix d_bar = sc_digital_update(f_bar, a_bar, opts.power, k);

    HybridResult out;
    double prev = (f_bar - a_bar * d_bar).squaredNorm();
    for (int it = 0; it < opts.max_iter; ++it) {
      a = sc_analog_update(f_bar, d_bar, k);
      a_bar = real_equivalent(a);
      d_bar = sc_digital_update(f_bar, a_bar, opts.power, k);
      const double current = (f_bar - a_bar * d_bar).squaredNorm();
      out.trace.objective.push_back(current);
      out.trace.iterations = it + 1;
      if (decrease_below(prev, current, opts.tol, floor)) {
        out.trace.converged = true;
        break;
      }
      prev = current;
    }
    out.precoder.analog = a;
    out.precoder.digital = d_bar;
    out.precoder.architecture = Architecture::SubConnected;
    out.precoder.antennas_per_chain = k;
    return out;
  });
}

}  // namespace rydmimo

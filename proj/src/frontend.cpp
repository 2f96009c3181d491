// SPDX-License-Identifier: Apache-2.0
#include "rydmimo/frontend.hpp"

#include "rydmimo/numerics.hpp"
#include "rydmimo/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>
#include <vector>

namespace rydmimo {

LinearizedChannel linearize(const ComplexMatrix& h, const ComplexVector& r) {
  if (r.size() != h.rows()) throw InvalidArgument("linearize: reference length must equal nr");
  require_finite(h, "linearize: H");
  require_finite(r, "linearize: r");
  LinearizedChannel lc;
  lc.offset = r.cwiseAbs();
  if ((lc.offset.array() <= 0.0).any()) throw NumericError("linearize: degenerate reference (zero entry)");
  lc.rotated = h;
  for (Eigen::Index m = 0; m < h.rows(); ++m) lc.rotated.row(m) *= std::conj(r(m)) / lc.offset(m);
  lc.real = realify_channel(lc.rotated);
  return lc;
}

RealVector measure_magnitude(const ComplexMatrix& h, const ComplexVector& x, const ComplexVector& r,
                             const ComplexVector& w) {
  if (x.size() != h.cols() || r.size() != h.rows() || w.size() != h.rows())
    throw InvalidArgument("measure_magnitude: shape mismatch");
  return (h * x + r + w).cwiseAbs();
}

RealVector measure_linearized(const LinearizedChannel& lc, const ComplexVector& x, const RealVector& w_bar) {
  if (x.size() != lc.rotated.cols() || w_bar.size() != lc.rotated.rows())
    throw InvalidArgument("measure_linearized: shape mismatch");
  return lc.real * stack_iq(x) + w_bar;
}

RealVector rotate_noise(const ComplexVector& w, const ComplexVector& r) {
  if (w.size() != r.size()) throw InvalidArgument("rotate_noise: shape mismatch");
  RealVector out(w.size());
  for (Eigen::Index m = 0; m < w.size(); ++m) {
    const double mag = std::abs(r(m));
    if (!(mag > 0)) throw NumericError("rotate_noise: degenerate reference (zero entry)");
    out(m) = (std::conj(r(m)) / mag * w(m)).real();
  }
  return out;
}

RealMatrix psd_factor(const RealMatrix& q_bar) {
  if (q_bar.rows() != q_bar.cols()) throw InvalidArgument("covariance must be square");
  require_finite(q_bar, "covariance");
  const RealMatrix sym = 0.5 * (q_bar + q_bar.transpose());
  if ((sym - q_bar).norm() > 1e-10 * std::max(1.0, q_bar.norm())) throw NumericError("covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<RealMatrix> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericError("covariance eigendecomposition failed");
  const double tol = 1e-10 * std::max(1.0, sym.norm());
  if (eig.eigenvalues().size() > 0 && eig.eigenvalues().minCoeff() < -tol)
    throw NumericError("covariance is not positive semidefinite");
  const RealVector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

double mi_linearized(const RealMatrix& h_bar, const RealMatrix& q_bar, double noise_variance) {
  if (!(noise_variance > 0)) throw InvalidArgument("mi_linearized: noise variance must be positive");
  if (q_bar.rows() != h_bar.cols() || q_bar.cols() != h_bar.cols())
    throw InvalidArgument("mi_linearized: covariance must be 2nt x 2nt");
  const RealMatrix factor = psd_factor(q_bar);
  const RealMatrix g = h_bar * factor;
  const RealMatrix m = (2.0 / noise_variance) * (g * g.transpose());
  return 0.5 * log2_det_identity_plus(m);
}

namespace {

// log(I0(z)) - z.
double log_bessel_i0_scaled(double z) {
  if (z < 30.0) return std::log(std::cyl_bessel_i(0.0, z)) - z;
  // Asymptotic series; the first omitted term is below 1e-9 at z = 30.
  const double t = 1.0 / (8.0 * z);
  const double series =
      1.0 + t * (1.0 + t * (9.0 / 2.0 + t * (225.0 / 6.0 + t * (11025.0 / 24.0 + t * (893025.0 / 120.0)))));
  return -0.5 * std::log(2.0 * std::numbers::pi * z) + std::log(series);
}

// log p(y | nu) with the exponent written around (y - nu)^2 so that large
// reference magnitudes do not cancel catastrophically.
double log_rician_stable(double y, double nu, double s2) {
  const double d = y - nu;
  return std::log(y / s2) - d * d / (2.0 * s2) + log_bessel_i0_scaled(y * nu / s2);
}

// Polynomial log(I0(z) e^-z) with relative error below 2e-7 in I0. The
// estimator uses it for both the conditional and the marginal density so
// that the approximation error cancels when y does not depend on x.
double log_bessel_i0_scaled_fast(double z) {
  if (z < 3.75) {
    const double t = (z / 3.75) * (z / 3.75);
    const double i0 =
        1.0 + t * (3.5156229 + t * (3.0899424 + t * (1.2067492 + t * (0.2659732 + t * (0.0360768 + t * 0.0045813)))));
    return std::log(i0) - z;
  }
  const double t = 3.75 / z;
  const double p =
      0.39894228 +
      t * (0.01328592 +
           t * (0.00225319 +
                t * (-0.00157565 +
                     t * (0.00916281 + t * (-0.02057706 + t * (0.02635537 + t * (-0.01647633 + t * 0.00392377)))))));
  return std::log(p) - 0.5 * std::log(z);
}

}  // namespace

double log_bessel_i0(double z) {
  if (z < 0) throw InvalidArgument("log_bessel_i0: argument must be nonnegative");
  return z + log_bessel_i0_scaled(z);
}

double log_rician_density(double y, double nu, double s2) {
  if (!(s2 > 0)) throw InvalidArgument("log_rician_density: variance must be positive");
  if (y < 0 || nu < 0) throw InvalidArgument("log_rician_density: magnitudes must be nonnegative");
  if (y == 0) return -std::numeric_limits<double>::infinity();
  return log_rician_stable(y, nu, s2);
}

MiEstimate mi_nonlinear_mc(const ComplexMatrix& h, const ComplexVector& r, double noise_variance,
                           const RealMatrix& q_bar, const MiOptions& opts, std::uint64_t seed) {
  if (r.size() != h.rows()) throw InvalidArgument("mi_nonlinear_mc: reference length must equal nr");
  if (q_bar.rows() != 2 * h.cols()) throw InvalidArgument("mi_nonlinear_mc: covariance must be 2nt x 2nt");
  if (!(noise_variance > 0)) throw InvalidArgument("mi_nonlinear_mc: noise variance must be positive");
  if (opts.samples == 0 || opts.inner_samples == 0 || opts.batches < 2 || opts.batches > opts.samples)
    throw InvalidArgument("mi_nonlinear_mc: need samples >= batches >= 2 and inner_samples >= 1");
  require_finite(h, "mi_nonlinear_mc: H");
  require_finite(r, "mi_nonlinear_mc: r");

  const Eigen::Index nr = h.rows();
  const Eigen::Index nt = h.cols();
  const RealMatrix factor = psd_factor(q_bar);
  const double s2 = noise_variance / 2.0;

  auto draw_input = [&](Rng& rng) {
    RealVector g(factor.cols());
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = rng.normal();
    const RealVector xb = factor * g;
    ComplexVector x(nt);
    for (Eigen::Index n = 0; n < nt; ++n) x(n) = {xb(n), xb(n + nt)};
    return x;
  };

  // Noiseless magnitudes |Hx' + r| of the shared inner pool, one row per draw.
  const auto inner = static_cast<Eigen::Index>(opts.inner_samples);
  RealMatrix pool(nr, inner);
  {
    Rng rng = Rng::substream(seed, 0);
    for (Eigen::Index j = 0; j < inner; ++j) pool.col(j) = (h * draw_input(rng) + r).cwiseAbs();
  }
  const double log_inner = std::log(static_cast<double>(inner));

  const std::size_t batches = opts.batches;
  std::vector<double> batch_mean(batches, 0.0);
  std::vector<std::size_t> batch_count(batches, 0);

  auto run_batch = [&](std::size_t b) {
    const std::size_t count = opts.samples / batches + (b < opts.samples % batches ? 1 : 0);
    Rng rng = Rng::substream(seed, b + 1);
    std::vector<double> log_terms(static_cast<std::size_t>(inner));
    RealVector y(nr);
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const ComplexVector mean = h * draw_input(rng) + r;
      double log_cond = 0.0;
      for (Eigen::Index m = 0; m < nr; ++m) {
        y(m) = std::abs(mean(m) + rng.complex_normal(noise_variance));
        const double nu = std::abs(mean(m));
        const double d = y(m) - nu;
        log_cond += std::log(y(m) / s2) + log_bessel_i0_scaled_fast(y(m) * nu / s2) - d * d / (2.0 * s2);
      }
      double peak = -std::numeric_limits<double>::infinity();
      // sum_m log(y_m / s2) does not depend on the pool entry.
      double log_y = 0.0;
      for (Eigen::Index m = 0; m < nr; ++m) log_y += std::log(y(m) / s2);
      for (Eigen::Index j = 0; j < inner; ++j) {
        double a = log_y;
        for (Eigen::Index m = 0; m < nr; ++m) {
          const double d = y(m) - pool(m, j);
          a += log_bessel_i0_scaled_fast(y(m) * pool(m, j) / s2) - d * d / (2.0 * s2);
        }
        log_terms[static_cast<std::size_t>(j)] = a;
        peak = std::max(peak, a);
      }
      double acc = 0.0;
      for (double a : log_terms) acc += std::exp(a - peak);
      const double log_marginal = peak + std::log(acc) - log_inner;
      sum += log_cond - log_marginal;
    }
    batch_mean[b] = sum / static_cast<double>(count) / std::numbers::ln2;
    batch_count[b] = count;
  };

  const unsigned jobs = std::max(1u, std::min<unsigned>(opts.jobs, static_cast<unsigned>(batches)));
  if (jobs == 1) {
    for (std::size_t b = 0; b < batches; ++b) run_batch(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (unsigned t = 0; t < jobs; ++t)
      workers.emplace_back([&] {
        for (std::size_t b = next++; b < batches; b = next++) run_batch(b);
      });
  }

  double total = 0.0;
  for (std::size_t b = 0; b < batches; ++b) total += batch_mean[b] * static_cast<double>(batch_count[b]);
  MiEstimate out;
  out.samples = opts.samples;
  out.value = total / static_cast<double>(opts.samples);
  double ss = 0.0;
  double plain = 0.0;
  for (double v : batch_mean) plain += v;
  plain /= static_cast<double>(batches);
  for (double v : batch_mean) ss += (v - plain) * (v - plain);
  const double se = std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
  // Identical batches (e.g. H = 0) leave only rounding; report that floor.
  out.standard_error = std::max(se, std::numeric_limits<double>::epsilon() * (1.0 + std::abs(out.value)));
  out.low_sample_warning = opts.samples < 10000;
  return out;
}

}  // namespace rydmimo

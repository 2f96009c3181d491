// SPDX-License-Identifier: Apache-2.0
//
// Dense kernels shared by every precoding routine: complex/real equivalence
// maps, a sign-normalized SVD, water-filling, the orthogonal Procrustes
// solver and projection onto the unit circle.
#pragma once

#include "rydmimo/types.hpp"

#include <cmath>
#include <span>
#include <type_traits>

namespace rydmimo {

namespace detail {
template <typename T>
struct real_of {
  using type = T;
};
template <typename T>
struct real_of<std::complex<T>> {
  using type = T;
};
}  // namespace detail

template <typename Scalar>
using RealOf = typename detail::real_of<Scalar>::type;

/// Block-coupled real form [[M_I, -M_Q], [M_Q, M_I]] of a complex matrix.
/// Multiplicative: real_equivalent(A * B) == real_equivalent(A) * real_equivalent(B).
template <typename Derived>
Matrix<RealOf<typename Derived::Scalar>> real_equivalent(const Eigen::MatrixBase<Derived>& m) {
  using Real = RealOf<typename Derived::Scalar>;
  const Eigen::Index rows = m.rows();
  const Eigen::Index cols = m.cols();
  Matrix<Real> out(2 * rows, 2 * cols);
  out.topLeftCorner(rows, cols) = m.real();
  out.topRightCorner(rows, cols) = -m.imag();
  out.bottomLeftCorner(rows, cols) = m.imag();
  out.bottomRightCorner(rows, cols) = m.real();
  return out;
}

/// Inverse of real_equivalent for matrices with exact block-coupled structure.
/// Only the left block column is read.
template <typename Derived>
Matrix<std::complex<typename Derived::Scalar>> complex_from_real_equivalent(
    const Eigen::MatrixBase<Derived>& m) {
  using Real = typename Derived::Scalar;
  if (m.rows() % 2 != 0 || m.cols() % 2 != 0)
    throw InvalidArgument("complex_from_real_equivalent: dimensions must be even");
  const Eigen::Index rows = m.rows() / 2;
  const Eigen::Index cols = m.cols() / 2;
  Matrix<std::complex<Real>> out(rows, cols);
  out.real() = m.topLeftCorner(rows, cols);
  out.imag() = m.bottomLeftCorner(rows, cols);
  return out;
}

/// Real channel seen by a real-part detector: (H_I, -H_Q), so that
/// realify_channel(H) * [x_I; x_Q] == Re(H x).
template <typename Derived>
Matrix<RealOf<typename Derived::Scalar>> realify_channel(const Eigen::MatrixBase<Derived>& h) {
  using Real = RealOf<typename Derived::Scalar>;
  Matrix<Real> out(h.rows(), 2 * h.cols());
  out.leftCols(h.cols()) = h.real();
  out.rightCols(h.cols()) = -h.imag();
  return out;
}

/// Stacks a complex vector into (x_I; x_Q).
template <typename Derived>
Vector<RealOf<typename Derived::Scalar>> stack_iq(const Eigen::MatrixBase<Derived>& x) {
  using Real = RealOf<typename Derived::Scalar>;
  Vector<Real> out(2 * x.size());
  out.head(x.size()) = x.real();
  out.tail(x.size()) = x.imag();
  return out;
}

template <typename Scalar>
struct SvdResult {
  Matrix<Scalar> u;
  Vector<RealOf<Scalar>> singular_values;  // descending
  Matrix<Scalar> v;

  Eigen::Index rank(RealOf<Scalar> relative_tol = 1e-10) const {
    if (singular_values.size() == 0 || singular_values(0) <= 0) return 0;
    Eigen::Index r = 0;
    for (Eigen::Index k = 0; k < singular_values.size(); ++k)
      if (singular_values(k) > relative_tol * singular_values(0)) ++r;
    return r;
  }
};

/// Thin SVD M = U diag(s) V^H with singular values in descending order.
///
/// Each right singular vector is normalized so that its first entry with
/// magnitude above 1e-12 is real and positive; the matching left vector
/// carries the compensating phase, so the factorization is unchanged.
template <typename Derived>
SvdResult<typename Derived::Scalar> svd(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  using Real = RealOf<Scalar>;
  if (!m.allFinite()) throw NumericError("svd: non-finite input");

  SvdResult<Scalar> out;
  if (m.rows() == 0 || m.cols() == 0) {
    out.u = Matrix<Scalar>(m.rows(), 0);
    out.v = Matrix<Scalar>(m.cols(), 0);
    out.singular_values = Vector<Real>(0);
    return out;
  }

  Eigen::JacobiSVD<Matrix<Scalar>> dec(m.eval(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success) throw NumericError("svd: decomposition did not converge");

  out.u = dec.matrixU();
  out.v = dec.matrixV();
  out.singular_values = dec.singularValues();

  for (Eigen::Index k = 0; k < out.v.cols(); ++k) {
    for (Eigen::Index i = 0; i < out.v.rows(); ++i) {
      const Real mag = std::abs(out.v(i, k));
      if (mag > Real(1e-12)) {
        const Scalar phase = out.v(i, k) / mag;  // unit modulus
        if constexpr (std::is_floating_point_v<Scalar>) {
          if (phase < 0) {
            out.v.col(k) = -out.v.col(k);
            out.u.col(k) = -out.u.col(k);
          }
        } else {
          out.v.col(k) *= std::conj(phase);
          out.u.col(k) *= std::conj(phase);
        }
        break;
      }
    }
  }
  return out;
}

struct WaterFillResult {
  RealVector allocation;  // one entry per gain, same order as the input
  double water_level = 0.0;
};

/// Water-filling over parallel channels with amplitude gains `gains`.
///
/// allocation_k = max(water_level - noise / gains_k^2, 0) and the allocations
/// sum to `total`. The water level is found exactly by scanning active-set
/// sizes in order of increasing noise floor. Zero gains receive no power.
WaterFillResult water_fill(std::span<const double> gains, double total, double noise);
WaterFillResult water_fill(const RealVector& gains, double total, double noise);

/// Orthogonal D maximizing trace(D * G). With G = V1 S V2^T, D = V2 V1^T.
RealMatrix procrustes(const RealMatrix& g);

/// Closest point on the unit circle to (in_phase, quadrature). The origin,
/// where every phase is optimal, maps to (1, 0).
template <typename Real>
std::complex<Real> project_unit_modulus(Real in_phase, Real quadrature) {
  const Real norm = std::hypot(in_phase, quadrature);
  if (norm == Real(0)) return {Real(1), Real(0)};
  return {in_phase / norm, quadrature / norm};
}

/// Entry-wise unit-modulus projection of a complex matrix.
template <typename Derived>
Matrix<typename Derived::Scalar> project_unit_modulus(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  return z.unaryExpr([](const Scalar& c) { return project_unit_modulus(c.real(), c.imag()); });
}

/// log2 det(I + M) for Hermitian positive semidefinite M.
template <typename Derived>
RealOf<typename Derived::Scalar> log2_det_identity_plus(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  using Real = RealOf<Scalar>;
  if (m.rows() != m.cols()) throw InvalidArgument("log2_det_identity_plus: matrix must be square");
  Matrix<Scalar> a = Matrix<Scalar>::Identity(m.rows(), m.cols()) + m;
  Eigen::LLT<Matrix<Scalar>> llt(a);
  if (llt.info() != Eigen::Success) throw NumericError("log2_det_identity_plus: I + M not positive definite");
  Real sum = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) sum += std::log2(std::real(llt.matrixLLT()(i, i)));
  return 2 * sum;
}

}  // namespace rydmimo

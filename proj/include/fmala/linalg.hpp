#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace fmala {

template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorT<double>;
using Matrix = MatrixT<double>;

/// Square-root factor R1 of the damped rank-one inverse:
/// R1 R1^T = (s s^T + lambda I)^-1, built without forming the inverse.
/// R1 = (1/sqrt(lambda)) (I - r1 s s^T / (lambda + s^T s)),
/// r1 = 1 / (1 + sqrt(lambda / (lambda + s^T s))).
template <typename Derived>
MatrixT<typename Derived::Scalar> sqrt_precond_init(
    const Eigen::MatrixBase<Derived>& signal, typename Derived::Scalar lambda) {
  using Scalar = typename Derived::Scalar;
  if (!(lambda > Scalar(0))) {
    throw std::invalid_argument("sqrt_precond_init: damping must be positive");
  }
  const VectorT<Scalar> s = signal.derived();
  const Eigen::Index d = s.size();
  const Scalar c = lambda + s.squaredNorm();
  const Scalar r1 = Scalar(1) / (Scalar(1) + std::sqrt(lambda / c));
  MatrixT<Scalar> r = MatrixT<Scalar>::Identity(d, d);
  r.noalias() -= (r1 / c) * (s * s.transpose());
  r *= Scalar(1) / std::sqrt(lambda);
  return r;
}

/// Rank-one square-root update, in place:
/// with phi = R^T s, the new factor satisfies
/// R_new R_new^T = ((R R^T)^-1 + s s^T)^-1.
/// R <- R - r (R phi) phi^T / (1 + phi^T phi),
/// r = 1 / (1 + sqrt(1 / (1 + phi^T phi))).
template <typename Scalar>
void sqrt_precond_update_inplace(MatrixT<Scalar>& R, const VectorT<Scalar>& s) {
  const VectorT<Scalar> phi = R.transpose() * s;
  const Scalar u = phi.squaredNorm();
  const Scalar r = Scalar(1) / (Scalar(1) + std::sqrt(Scalar(1) / (Scalar(1) + u)));
  const VectorT<Scalar> r_phi = R * phi;
  R.noalias() -= (r / (Scalar(1) + u)) * (r_phi * phi.transpose());
}

template <typename Scalar>
MatrixT<Scalar> sqrt_precond_update(MatrixT<Scalar> R, const VectorT<Scalar>& s) {
  sqrt_precond_update_inplace(R, s);
  return R;
}

/// Sherman-Morrison step on the matrix itself, used as the dense
/// counterpart of the square-root recursion:
/// returns (M^-1 + s s^T)^-1 = M - M s s^T M / (1 + s^T M s),
/// symmetrized to suppress round-off drift.
template <typename Scalar>
MatrixT<Scalar> woodbury_update(const MatrixT<Scalar>& M, const VectorT<Scalar>& s) {
  const VectorT<Scalar> ms = M * s;
  const Scalar denom = Scalar(1) + s.dot(ms);
  MatrixT<Scalar> out = M;
  out.noalias() -= (Scalar(1) / denom) * (ms * ms.transpose());
  out = ((out + out.transpose()) / Scalar(2)).eval();
  return out;
}

/// Rescale so the average eigenvalue is one: B * d / trace(B).
template <typename Derived>
MatrixT<typename Derived::Scalar> trace_normalize(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  const Scalar tr = m.derived().trace();
  if (!(tr > Scalar(0))) {
    throw std::invalid_argument("trace_normalize: trace must be positive");
  }
  return m.derived() * (Scalar(m.rows()) / tr);
}

/// In-place rank-one Cholesky update: L L^T + w w^T refactored into L.
/// L must be lower triangular with positive diagonal; w is consumed.
template <typename Scalar>
void cholesky_rank_one_update(MatrixT<Scalar>& L, VectorT<Scalar> w) {
  const Eigen::Index d = L.rows();
  for (Eigen::Index k = 0; k < d; ++k) {
    const Scalar lkk = L(k, k);
    const Scalar r = std::hypot(lkk, w(k));
    const Scalar c = r / lkk;
    const Scalar s = w(k) / lkk;
    L(k, k) = r;
    const Eigen::Index m = d - k - 1;
    if (m > 0) {
      auto lt = L.col(k).tail(m);
      auto wt = w.tail(m);
      lt = (lt + s * wt) / c;
      wt = c * wt - s * lt;
    }
  }
}

/// Square-root preconditioner: a square factor R with M = R R^T kept
/// positive definite across rank-one corrections. Starts at the identity.
template <typename Scalar>
class SqrtPreconditionerT {
 public:
  explicit SqrtPreconditionerT(Eigen::Index dim)
      : R_(MatrixT<Scalar>::Identity(dim, dim)) {}
  explicit SqrtPreconditionerT(MatrixT<Scalar> factor) : R_(std::move(factor)) {}

  static SqrtPreconditionerT init(const VectorT<Scalar>& s, Scalar lambda) {
    return SqrtPreconditionerT(sqrt_precond_init(s, lambda));
  }

  void rank_one_update(const VectorT<Scalar>& s) { sqrt_precond_update_inplace(R_, s); }

  /// M v = R (R^T v)
  VectorT<Scalar> apply(const VectorT<Scalar>& v) const { return R_ * (R_.transpose() * v); }
  /// R eta, the sampling factor
  VectorT<Scalar> apply_factor(const VectorT<Scalar>& eta) const { return R_ * eta; }

  MatrixT<Scalar> matrix() const { return R_ * R_.transpose(); }
  Scalar trace() const { return R_.squaredNorm(); }  // tr(R R^T)
  const MatrixT<Scalar>& factor() const { return R_; }
  Eigen::Index dim() const { return R_.rows(); }

 private:
  MatrixT<Scalar> R_;
};

using SqrtPreconditioner = SqrtPreconditionerT<double>;

}  // namespace fmala
